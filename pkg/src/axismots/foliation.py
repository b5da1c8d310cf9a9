"""Constant-expansion foliations near an axisymmetric MOTS.

Leaves are graphs ``t = f_s(theta)`` solving ``theta_plus(f) = k`` with the
normalization ``int f dA_0 = s``, where ``dA_0`` is the area element of the
``s = 0`` leaf ``t = 0``.  The unknowns are the node values of ``f`` and the
constant ``k``; the bordered system is solved by Newton iteration.

Only axisymmetric ``f`` are representable, so the component of the map
orthogonal to the axisymmetric subspace is identically zero.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConvergenceError, DomainError, NumericalError
from .geomcore import grid_derivatives
from .initdata import graph_fields, induced_metric

__all__ = [
    "FoliationLeaf",
    "FoliationChart",
    "theta_map",
    "base_measure",
    "newton_leaf",
    "build_chart",
    "observed_orders",
    "quadratic_constants",
]

DEFAULT_TOL = 1e-10
DEFAULT_BOUND = 10.0


def base_measure(d, grid):
    """Quadrature weights of ``int . dA_0`` on the ``t = 0`` leaf."""
    z = np.zeros(grid.n)
    sig, rho = induced_metric(d, grid.nodes, z, z)
    return 2.0 * np.pi * grid.weights * sig * rho


def _fields(d, f, grid):
    f1, f2 = grid_derivatives(f, grid.spacing, parity=1)
    return graph_fields(d, grid.nodes, f, f1, f2)


def _theta_plus(d, f, grid):
    return _fields(d, f, grid)["theta_plus"]


def theta_map(d, f, k, grid, bound=DEFAULT_BOUND):
    """``(theta_plus(f) - k, int f dA_0, 0)`` for node values ``f``.

    The third entry is the (vanishing) non-axisymmetric component.
    """
    f = np.asarray(f)
    if f.shape != (grid.n,):
        raise DomainError(f"height field must have {grid.n} node values")
    if np.max(np.abs(f)) > bound:
        raise DomainError(f"graph leaves the chart: max|f| = {np.max(np.abs(f)):.6g} > {bound}")
    res = _theta_plus(d, f, grid) - k
    mean = base_measure(d, grid) @ f
    return res, mean, 0.0


@dataclass(frozen=True)
class FoliationLeaf:
    s: float
    f: np.ndarray
    k: float
    newton_iters: int = 0
    residual: float = 0.0
    mean_error: float = 0.0
    history: tuple = ()
    min_singular_value: Optional[float] = None
    area: Optional[float] = None

    @classmethod
    def zero(cls, grid):
        return cls(0.0, np.zeros(grid.n), 0.0)


def _jacobian_complex(d, f, grid, h=1e-30):
    """Exact Jacobian of the discrete ``theta_plus`` map.

    The stencil is tridiagonal, so three complex-step evaluations suffice.
    """
    n = grid.n
    J = np.zeros((n, n))
    rows = np.arange(n)
    for colour in range(3):
        pert = (rows % 3 == colour).astype(float)
        deriv = np.imag(_theta_plus(d, f + 1j * h * pert, grid)) / h
        for off in (-1, 0, 1):
            cols = rows + off
            ok = (cols >= 0) & (cols < n)
            sel = ok & (cols % 3 == colour)
            J[rows[sel], cols[sel]] = deriv[sel]
    return J


def _jacobian_analytic(d, f, grid):
    """``L`` plus the first-variation correction terms, on the current leaf."""
    from .geomcore import GraphSurface
    from .stability import StabilityProblem, assemble_mode

    s = GraphSurface.from_samples(d.metric, grid, f)
    p = StabilityProblem.from_surface(d, s, grid, m_max=0)
    gf = _fields(d, f, grid)
    tp = gf["theta_plus"]
    invW = gf["normal_t"]
    dtp, _ = grid_derivatives(tp, grid.spacing, parity=1)
    fp, _ = grid_derivatives(f, grid.spacing, parity=1)
    A = assemble_mode(p, 0)
    A[np.diag_indices_from(A)] += gf["tau"] * tp - 0.5 * tp**2
    J = A * invW[None, :]
    J[np.diag_indices_from(J)] += fp / gf["sigma"] ** 2 * dtp
    return J


def _jacobian_fd(d, f, grid, h=1e-7):
    n = grid.n
    J = np.zeros((n, n))
    base = _theta_plus(d, f, grid)
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (_theta_plus(d, f + e, grid) - base) / h
    return J


_JACOBIANS = {"complex": _jacobian_complex, "analytic": _jacobian_analytic,
              "fd": _jacobian_fd}


def _bordered(Jf, weights):
    n = Jf.shape[0]
    J = np.zeros((n + 1, n + 1))
    J[:n, :n] = Jf
    J[:n, n] = -1.0
    J[n, :n] = weights
    return J


def _leaf_area(d, f, grid):
    f1, _ = grid_derivatives(f, grid.spacing, parity=1)
    sig, rho = induced_metric(d, grid.nodes, f, f1)
    return float(2.0 * np.pi * grid.integrate(sig * rho))


def newton_leaf(d, s, seed, grid, tol=DEFAULT_TOL, max_iters=25,
                jacobian="complex", bound=DEFAULT_BOUND):
    """Solve ``theta_plus(f) = k``, ``int f dA_0 = s`` starting from ``seed``.

    Parameters
    ----------
    jacobian : {"complex", "analytic", "fd"}
        ``"complex"`` differentiates the discrete residual exactly;
        ``"analytic"`` uses the assembled stability operator with the
        first-variation correction (exact only up to truncation error);
        ``"fd"`` is a forward-difference cross-check.

    Raises
    ------
    NumericalError
        Singular bordered Jacobian (the smallest singular value is reported).
    ConvergenceError
        ``max_iters`` exceeded; carries the residual history.
    """
    if jacobian not in _JACOBIANS:
        raise DomainError(f"unknown jacobian mode {jacobian!r}")
    weights = base_measure(d, grid)
    f = np.array(seed.f, dtype=float)
    k = float(seed.k)
    history = []
    smin = None
    for it in range(max_iters + 1):
        res, mean, _ = theta_map(d, f, k, grid, bound)
        if not np.all(np.isfinite(res)):
            raise NumericalError(f"non-finite theta_plus residual at iteration {it}")
        r_norm = max(float(np.max(np.abs(res))), abs(mean - s))
        history.append(r_norm)
        if r_norm <= tol:
            return FoliationLeaf(float(s), f, k, it, float(np.max(np.abs(res))),
                                 float(abs(mean - s)), tuple(history), smin,
                                 _leaf_area(d, f, grid))
        if it == max_iters:
            break
        J = _bordered(_JACOBIANS[jacobian](d, f, grid), weights)
        sv = np.linalg.svd(J, compute_uv=False)
        smin = float(sv[-1])
        if smin <= 1e-13 * sv[0]:
            raise NumericalError(
                f"bordered Jacobian is numerically singular (smallest singular value {smin:.3e})"
            )
        step = np.linalg.solve(J, -np.concatenate((res, [mean - s])))
        f = f + step[:-1]
        k = k + step[-1]
    raise ConvergenceError(
        f"Newton did not reach tol={tol:g} in {max_iters} iterations "
        f"(last residual {history[-1]:.3e})", history)


def observed_orders(history, floor=1e-13):
    """Estimated convergence orders ``log(r2/r1) / log(r1/r0)`` along a history."""
    r = [x for x in history if x > floor]
    out = []
    for i in range(len(r) - 2):
        a, b = np.log(r[i + 1] / r[i]), np.log(r[i + 2] / r[i + 1])
        if a != 0:
            out.append(float(b / a))
    return out


def quadratic_constants(history, floor=1e-13):
    """Ratios ``r_{i+1} / r_i^2`` for consecutive residuals above ``floor``.

    Bounded ratios over two or more consecutive steps indicate quadratic
    convergence.
    """
    r = list(history)
    return [float(r[i + 1] / r[i] ** 2) for i in range(len(r) - 1)
            if r[i] > floor and r[i] > 0]


@dataclass(frozen=True)
class FoliationChart:
    leaves: list
    lapse: list
    normalized_lapse: list
    theta: np.ndarray
    weakly_outermost_claimed: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def s(self):
        return np.array([lf.s for lf in self.leaves])

    @property
    def k(self):
        return np.array([lf.k for lf in self.leaves])

    @property
    def min_gaps(self):
        return np.array([np.min(b.f - a.f) for a, b in zip(self.leaves, self.leaves[1:])])

    @property
    def outermost_contradiction(self):
        """True when data claimed weakly outermost carry an outer trapped leaf."""
        if not self.weakly_outermost_claimed:
            return False
        tol = max((lf.residual for lf in self.leaves), default=0.0) + 1e-12
        return bool(any(lf.k < -tol for lf in self.leaves if lf.s > 0))

    def as_dict(self):
        return {
            "leaves": [
                {"s": lf.s, "k": lf.k, "residual": lf.residual,
                 "mean_error": lf.mean_error, "area": lf.area,
                 "newton_iters": lf.newton_iters}
                for lf in self.leaves
            ],
            "outermost_contradiction": self.outermost_contradiction,
            **self.meta,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)

    def leaf_csv(self, i):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "f"])
        for t, v in zip(self.theta, self.leaves[i].f):
            w.writerow([f"{t:.12g}", f"{v:.12g}"])
        return buf.getvalue()


def build_chart(d, s_max, n_leaves, grid, tol=DEFAULT_TOL, max_iters=25,
                jacobian="complex", weakly_outermost=False, bound=DEFAULT_BOUND):
    """Continue leaves from ``s = 0`` to ``s_max`` (``n_leaves`` values).

    Each leaf seeds the next; a failed step is retried once through its
    midpoint.  The lapse between consecutive leaves is the normal speed of
    ``(f_{i+1} - f_i) / (s_{i+1} - s_i)``; the normalized lapse divides by
    its area mean, which is the reparametrization making a leafwise
    constant lapse equal to one.
    """
    if n_leaves < 2 or not s_max > 0:
        raise DomainError("need n_leaves >= 2 and s_max > 0")
    res0, _, _ = theta_map(d, np.zeros(grid.n), 0.0, grid, bound)
    if np.max(np.abs(res0)) > tol:
        raise DomainError(
            f"the t = 0 leaf is not a MOTS (max|theta_plus| = {np.max(np.abs(res0)):.3e})"
        )
    kw = dict(tol=tol, max_iters=max_iters, jacobian=jacobian, bound=bound)
    leaves = [newton_leaf(d, 0.0, FoliationLeaf.zero(grid), grid, **kw)]
    for s in np.linspace(0.0, s_max, n_leaves)[1:]:
        prev = leaves[-1]
        try:
            leaf = newton_leaf(d, s, prev, grid, **kw)
        except NumericalError:
            mid = newton_leaf(d, 0.5 * (prev.s + s), prev, grid, **kw)
            leaf = newton_leaf(d, s, mid, grid, **kw)
        gap = leaf.f - prev.f
        if np.min(gap) <= 0:
            j = int(np.argmin(gap))
            raise NumericalError(
                f"leaves s={prev.s:.6g} and s={leaf.s:.6g} cross at node {j} "
                f"(gap {gap[j]:.3e})"
            )
        leaves.append(leaf)

    lapse, normalized = [], []
    for a, b in zip(leaves, leaves[1:]):
        fmid = 0.5 * (a.f + b.f)
        invW = _fields(d, fmid, grid)["normal_t"]
        phi = (b.f - a.f) / (b.s - a.s) * invW
        f1, _ = grid_derivatives(fmid, grid.spacing, parity=1)
        sig, rho = induced_metric(d, grid.nodes, fmid, f1)
        dens = sig * rho
        avg = grid.integrate(phi * dens) / grid.integrate(dens)
        lapse.append(phi)
        normalized.append(phi / avg)
    if any(np.min(p) <= 0 for p in lapse):
        raise NumericalError("non-positive lapse between consecutive leaves")
    return FoliationChart(leaves, lapse, normalized, grid.nodes.copy(),
                          bool(weakly_outermost),
                          {"n": grid.n, "s_max": float(s_max), "tol": tol})
