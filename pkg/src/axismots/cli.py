"""Command-line front end.

Exit codes: 0 success, 1 domain error, 2 numerical failure or failed
verification, 3 usage or configuration error.  Data go to stdout (or
``--out``), diagnostics to stderr.

Model configs are INI files::

    [metric]
    preset = sin3          ; round | round_r | poly | sin3 | table
    eps = 0.1              ; sin3 parameter
    scale = 1.0            ; r
    coeffs = 1, 0, 0.2     ; poly: g(cos theta) coefficients
    table = profile.txt    ; table: two-column theta rho file

    [extrinsic]
    alpha = 0.0, 0.1       ; alpha(t) coefficients in t
    beta = 0.3:2:0         ; coef:sin_power:cos_power terms
    warp = 0.2:2:0         ; coef:t_power:cos_power terms of w(t, theta)

    [surface]
    height = 0.1:1         ; coef:cos_power terms of f(theta)

    [solver]
    n = 128
    m_max = 8
    c = 1.0
    newton_tol = 1e-10
    max_iters = 25
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DomainError, MotsError, NumericalError
from .geomcore import GraphSurface, ThetaGrid, load_profile_table, preset
from .initdata import (ProductData, TimePolynomial, TrigTerms, Warp,
                       graph_fields, beta_deformation_check, minimize_omega,
                       omega_of_surface, surface_quantities)
from .stability import (StabilityProblem, principal_eigenpair,
                        stability_inequality_check)

N_MIN, N_MAX = 8, 4096

_SCHEMA = {
    "metric": {"preset", "scale", "coeffs", "eps", "table"},
    "extrinsic": {"alpha", "beta", "warp"},
    "surface": {"height"},
    "solver": {"n", "m_max", "c", "newton_tol", "max_iters"},
}


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    """Parsed model and solver settings."""

    data: ProductData
    surface: GraphSurface
    n: int = 128
    m_max: int = 8
    c: float = 1.0
    newton_tol: float = 1e-10
    max_iters: int = 25
    source: str = ""
    extras: dict = field(default_factory=dict)


def _floats(text, key):
    try:
        return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{key}: expected a comma-separated list of numbers") from None


def _terms(text, key, arity):
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if len(parts) != arity:
            raise ConfigError(f"{key}: term {item!r} must have {arity} ':'-separated fields")
        try:
            out.append((float(parts[0]),) + tuple(int(p) for p in parts[1:]))
        except ValueError:
            raise ConfigError(f"{key}: malformed term {item!r}") from None
    return out


def _check_n(n, what="n"):
    if not N_MIN <= n <= N_MAX:
        raise ConfigError(f"{what}={n} outside [{N_MIN}, {N_MAX}]")
    return n


def load_config(path):
    """Read a model INI file with strict section and key checking."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        unknown = set(cp[section]) - _SCHEMA[section]
        if unknown:
            raise ConfigError(f"{path}: unknown key(s) in [{section}]: {sorted(unknown)}")
    if "metric" not in cp or "preset" not in cp["metric"]:
        raise ConfigError(f"{path}: [metric] preset is required")

    met = cp["metric"]
    name = met["preset"].strip()
    try:
        scale = float(met.get("scale", "1.0"))
        if name == "table":
            if "table" not in met:
                raise ConfigError("[metric] table path is required for preset = table")
            table = Path(met["table"])
            if not table.is_absolute():
                table = path.parent / table
            metric = load_profile_table(table, scale=scale)
        elif name in ("round", "round_r"):
            metric = preset(name, r=scale)
        elif name == "poly":
            metric = preset("poly", coeffs=_floats(met.get("coeffs", "1"), "coeffs"),
                            scale=scale)
        elif name == "sin3":
            metric = preset("sin3", eps=float(met.get("eps", "0.0")), scale=scale)
        else:
            metric = preset(name, scale=scale)
    except ValueError as exc:
        if isinstance(exc, DomainError):
            raise
        raise ConfigError(f"[metric]: {exc}") from None

    ext = cp["extrinsic"] if "extrinsic" in cp else {}
    alpha = TimePolynomial(_floats(ext.get("alpha", "0"), "alpha"))
    beta = TrigTerms(_terms(ext.get("beta", ""), "beta", 3))
    warp = Warp(_terms(ext.get("warp", ""), "warp", 3))
    data = ProductData(metric, alpha, beta, warp)

    surf = cp["surface"] if "surface" in cp else {}
    hterms = _terms(surf.get("height", ""), "height", 2)
    if hterms:
        deg = max(p for _, p in hterms)
        if deg < 0:
            raise ConfigError("height powers must be non-negative")
        coeffs = np.zeros(deg + 1)
        for c, p in hterms:
            coeffs[p] += c
        surface = GraphSurface.cos_powers(metric, coeffs)
    else:
        surface = GraphSurface.constant(metric)

    sol = cp["solver"] if "solver" in cp else {}
    try:
        n = _check_n(int(sol.get("n", "128")))
        m_max = int(sol.get("m_max", "8"))
        c = float(sol.get("c", "1.0"))
        tol = float(sol.get("newton_tol", "1e-10"))
        iters = int(sol.get("max_iters", "25"))
    except ValueError as exc:
        raise ConfigError(f"[solver]: {exc}") from None
    if m_max < 0 or iters < 1 or not tol > 0:
        raise ConfigError("[solver]: m_max >= 0, max_iters >= 1 and newton_tol > 0 required")
    return RunConfig(data, surface, n, m_max, c, tol, iters, str(path))


# ---------------------------------------------------------------------------
# output


def _round12(x):
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return None
        return float(f"{x:.12g}")
    if isinstance(x, dict):
        return {k: _round12(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_round12(v) for v in x]
    return x


def dump_json(obj):
    return json.dumps(_round12(obj), indent=2) + "\n"


def dump_csv(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else f"{float(v):.12g}" for v in row])
    return buf.getvalue()


def _emit(text, out=None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# commands


def cmd_nariai_point(args, plot=False):
    from .nariai import NariaiParams, eps_expansion, nariai_point

    p = NariaiParams(args.a, args.ell)
    rep = nariai_point(p, args.quad_n)
    d = rep.as_dict()
    d["gap_over_eps4"] = rep.gap_over_eps4
    d["a_max_over_ell"] = float(2.0 - math.sqrt(3.0))
    if p.eps > 0:
        d["rc2_eps4_coefficient"] = eps_expansion(p, args.quad_n)["rc2_eps4_coefficient"]
    if args.csv or plot:
        keys = ["a_over_ell", "rc2", "area", "omega", "bound", "gap"]
        _emit(dump_csv(keys, [[d[k] for k in keys]]), args.out)
    else:
        _emit(dump_json(d), args.out)
    return 0


def cmd_nariai_sweep(args, plot=False):
    from .nariai import sweep

    if args.steps < 2:
        raise ConfigError("--steps must be at least 2")
    if not 0 <= args.a_min < args.a_max:
        raise ConfigError("need 0 <= --a-min < --a-max")
    a = np.linspace(args.a_min, args.a_max, args.steps) * args.ell
    table = sweep(a, args.ell, args.quad_n)
    _emit(table.to_csv(), args.out)
    return 0


def _config_or_preset(args):
    if getattr(args, "config", None):
        cfg = load_config(args.config)
    else:
        try:
            metric = preset(args.preset)
        except TypeError:
            raise ConfigError(
                f"preset {args.preset!r} needs parameters; use --config"
            ) from None
        cfg = RunConfig(ProductData(metric), GraphSurface.constant(metric))
    n = _check_n(args.n if getattr(args, "n", None) is not None else cfg.n)
    return cfg, ThetaGrid(n)


def cmd_eig(args, plot=False):
    cfg, grid = _config_or_preset(args)
    m_max = args.m_max if args.m_max is not None else cfg.m_max
    p = StabilityProblem.from_surface(cfg.data, cfg.surface, grid, m_max=m_max,
                                      energy=args.c)
    res = principal_eigenpair(p)
    if plot:
        _emit(res.u_to_csv())
    else:
        d = res.as_dict()
        d["axisymmetric_minimum"] = res.axisymmetric_minimum
        _emit(dump_json(d))
    return 0


def cmd_omega(args, plot=False):
    cfg, grid = _config_or_preset(args)
    c = args.c if args.c is not None else cfg.c
    q = surface_quantities(cfg.data, cfg.surface, grid)
    rep = omega_of_surface(q, grid, c)
    if plot:
        _emit(q.to_csv())
    else:
        _emit(dump_json(rep.as_dict()))
    return 0


def cmd_foliate(args, plot=False):
    from .foliation import build_chart

    cfg, grid = _config_or_preset(args)
    if args.leaves < 2:
        raise ConfigError("--leaves must be at least 2")
    chart = build_chart(cfg.data, args.s_max, args.leaves, grid,
                        tol=cfg.newton_tol, max_iters=cfg.max_iters)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "chart.json").write_text(dump_json(chart.as_dict()))
        for i in range(len(chart.leaves)):
            (out / f"leaf_{i:03d}.csv").write_text(chart.leaf_csv(i))
    if plot:
        header = ["theta"] + [f"f_{i}" for i in range(len(chart.leaves))]
        rows = np.column_stack([chart.theta] + [lf.f for lf in chart.leaves])
        _emit(dump_csv(header, rows))
    elif not args.out:
        _emit(dump_json(chart.as_dict()))
    return 0


def rigidity_battery(cfg, grid, tol=1e-8):
    """Equality-case checks of the area bound on the configured surface.

    The bound ``|Sigma| <= 4 pi / (c + omega)`` is required only when the
    hypotheses (``lambda_1 >= 0`` and ``mu + J(nu) >= c``) hold.  When it
    is saturated, the surface must have ``chi+ = 0``,
    ``kappa = c + |X^eta|^2``, ``mu + J(nu) = c`` and ``lambda_1 = 0``.
    The product-data conclusions (round ``kappa = c``, ``beta = 0``) are
    checked only when the surface also minimizes ``omega``.
    """
    d, s, c = cfg.data, cfg.surface, cfg.c
    f, fp, fpp = s.evaluate(grid)
    gf = graph_fields(d, grid.nodes, f, fp, fpp)
    q = surface_quantities(d, s, grid)
    rep = omega_of_surface(q, grid, c)
    p = StabilityProblem.from_surface(d, s, grid, m_max=min(cfg.m_max, 4))
    eig = principal_eigenpair(p)
    stable = eig.lambda1 >= -eig.spectral_tol
    min_energy = float(np.min(gf["mu_plus_J_nu"]))
    hypotheses = stable and min_energy >= c - tol
    rel = abs(rep.area - rep.bound) / rep.bound
    saturated = rel <= 1e-10
    checks = {
        "stable": stable,
        "energy_ge_c": min_energy >= c - tol,
        "area_le_bound": rep.area <= rep.bound * (1 + 1e-10),
        "saturated": saturated,
    }
    values = {
        "area": rep.area, "bound": rep.bound, "omega": rep.omega, "c": c,
        "lambda1": eig.lambda1, "komar": rep.komar, "min_energy": min_energy,
        "max_chi_plus_norm2": float(np.max(np.abs(gf["chi_plus_norm2"]))),
        "max_kappa_defect": float(np.max(np.abs(gf["kappa"] - c - gf["X_eta_norm2"]))),
        "max_energy_defect": float(np.max(np.abs(gf["mu_plus_J_nu"] - c))),
    }
    if saturated:
        checks["chi_plus_vanishes"] = values["max_chi_plus_norm2"] <= tol
        checks["kappa_eq_c_plus_x_eta"] = values["max_kappa_defect"] <= tol
        checks["energy_eq_c"] = values["max_energy_defect"] <= tol
        checks["lambda1_zero"] = abs(eig.lambda1) <= 1e-6
        trial = stability_inequality_check(p, [np.ones(grid.n)], eigen=eig)
        values["ineq_gap_f1"] = float(trial.rhs[0] - trial.lhs[0])
        checks["equality_f_eq_1"] = abs(values["ineq_gap_f1"]) <= 1e-10 * max(1.0, abs(trial.rhs[0]))
    if d.is_product and grid.n >= 16:
        mo = minimize_omega(d, grid, basis_size=min(4, grid.n // 4))
        minimizes = mo.omega >= mo.omega_slice - 1e-12
        values["omega_star"] = mo.omega
        checks["slice_minimizes_omega"] = minimizes
        if saturated and minimizes:
            kap = gf["kappa"]
            checks["round_kappa_c"] = float(np.max(np.abs(kap - c))) <= tol
            checks["beta_vanishes"] = rep.omega <= tol
    # without the hypotheses the bound carries no information
    optional = {"saturated", "slice_minimizes_omega", "stable", "energy_ge_c"}
    if not hypotheses:
        optional.add("area_le_bound")
    ok = all(v for k, v in checks.items() if k not in optional)
    return {"ok": ok, "hypotheses": hypotheses, "checks": checks, "values": values}


def cmd_verify_rigidity(args, plot=False):
    cfg = load_config(args.config)
    grid = ThetaGrid(cfg.n)
    result = rigidity_battery(cfg, grid)
    if plot:
        rows = [[k, v] for k, v in {**result["values"], **result["checks"]}.items()]
        _emit(dump_csv(["key", "value"], [[k, float(v)] for k, v in rows]))
    else:
        _emit(dump_json(result))
    return 0 if result["ok"] else 2


def cmd_verify_deformation(args, plot=False):
    cfg = load_config(args.config)
    grid = ThetaGrid(cfg.n)
    d = cfg.data
    family = [GraphSurface.constant(d.metric, 0.3)] + [
        GraphSurface.cosine_series(d.metric, [0.0, delta]) for delta in (0.1, 0.5, 1.0)
    ]
    rep = beta_deformation_check(d, family, grid)
    basis = args.basis if args.basis is not None else 4
    mo = minimize_omega(d, grid, basis)
    strict = rep.beta_vanishes or mo.omega < rep.base_omega
    ok = rep.ok and strict
    result = {
        "ok": ok,
        "base_omega": rep.base_omega,
        "base_integral": rep.base_integral,
        "rows": [r.__dict__ for r in rep.rows],
        "omega_star": mo.omega,
        "omega_star_coeffs": list(mo.coeffs),
        "minimizer_converged": mo.converged,
    }
    if plot:
        _emit(dump_csv(["max_slope", "area", "x_eta_integral", "omega"],
                       [[r.max_slope, r.area, r.x_eta_integral, r.omega] for r in rep.rows]))
    else:
        _emit(dump_json(result))
    return 0 if ok else 2


# ---------------------------------------------------------------------------
# parser


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def build_parser():
    ap = _Parser(prog="axismots", description="Axisymmetric MOTS toolkit")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_commands(sub)
    plot = sub.add_parser("plotdata", help="columnar output of another subcommand")
    psub = plot.add_subparsers(dest="inner", required=True, parser_class=_Parser)
    _add_commands(psub)
    return ap


def _add_commands(sub):
    nar = sub.add_parser("nariai", help="rotating Nariai horizon")
    nsub = nar.add_subparsers(dest="nariai_cmd", required=True, parser_class=_Parser)
    pt = nsub.add_parser("point")
    pt.add_argument("--a", type=float, required=True)
    pt.add_argument("--ell", type=float, default=1.0)
    pt.add_argument("--quad-n", type=int, default=512)
    fmt = pt.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true")
    fmt.add_argument("--csv", action="store_true")
    pt.add_argument("--out")
    pt.set_defaults(func=cmd_nariai_point)
    sw = nsub.add_parser("sweep")
    sw.add_argument("--a-min", type=float, required=True)
    sw.add_argument("--a-max", type=float, required=True)
    sw.add_argument("--steps", type=int, required=True)
    sw.add_argument("--ell", type=float, default=1.0)
    sw.add_argument("--quad-n", type=int, default=512)
    sw.add_argument("--out")
    sw.set_defaults(func=cmd_nariai_sweep)

    eig = sub.add_parser("eig", help="principal eigenpair of the stability operator")
    src = eig.add_mutually_exclusive_group(required=True)
    src.add_argument("--preset")
    src.add_argument("--config")
    eig.add_argument("--n", type=int)
    eig.add_argument("--m-max", type=int)
    eig.add_argument("--c", type=float)
    eig.add_argument("--json", action="store_true")
    eig.set_defaults(func=cmd_eig)

    om = sub.add_parser("omega", help="omega, area bound and Komar integral")
    om.add_argument("--config", required=True)
    om.add_argument("--c", type=float)
    om.add_argument("--n", type=int)
    om.set_defaults(func=cmd_omega)

    fo = sub.add_parser("foliate", help="constant-expansion foliation")
    fo.add_argument("--config", required=True)
    fo.add_argument("--s-max", type=float, required=True)
    fo.add_argument("--leaves", type=int, required=True)
    fo.add_argument("--n", type=int)
    fo.add_argument("--out")
    fo.set_defaults(func=cmd_foliate)

    ver = sub.add_parser("verify", help="verification batteries")
    vsub = ver.add_subparsers(dest="verify_cmd", required=True, parser_class=_Parser)
    rg = vsub.add_parser("rigidity")
    rg.add_argument("--config", required=True)
    rg.set_defaults(func=cmd_verify_rigidity)
    lb = vsub.add_parser("lemma-beta")
    lb.add_argument("--config", required=True)
    lb.add_argument("--basis", type=int)
    lb.set_defaults(func=cmd_verify_deformation)


def run(argv=None):
    """Execute one command line; returns the exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        plot = args.command == "plotdata"
        return args.func(args, plot=plot)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 3
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 2
    except MotsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(run())
