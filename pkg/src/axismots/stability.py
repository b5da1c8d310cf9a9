"""MOTS stability operator on an axisymmetric sphere.

On a surface with metric ``sigma^2 dth^2 + rho^2 dphi^2`` the operator

    L u = -Delta u + 2 <X, grad u> + (Q - |X|^2 + div X) u

decouples into azimuthal modes ``u = v(theta) e^{i m phi}``.  Each mode is
discretized on the midpoint grid with a flux-form Laplacian (the flux
``rho/sigma`` vanishes at the poles) and a centered first-order term whose
ghost values are even for ``m = 0`` and odd for ``m >= 1``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla

from .errors import DomainError, NumericalError
from .geomcore import MetricProfile, ThetaGrid, grid_derivatives
from .initdata import graph_fields, induced_metric

__all__ = [
    "StabilityProblem",
    "EigenResult",
    "InequalityReport",
    "FirstVariationReport",
    "assemble_mode",
    "assemble_adjoint",
    "assemble_symmetrized",
    "area_weights",
    "principal_eigenpair",
    "stability_inequality_check",
    "first_variation_check",
]


def _field(value, theta):
    if callable(value):
        value = value(theta)
    arr = np.asarray(value, dtype=float)
    if arr.ndim and arr.shape != np.shape(theta):
        raise DomainError(f"field has shape {arr.shape}, grid has {np.shape(theta)}")
    return np.broadcast_to(arr, np.shape(theta)).copy()


@dataclass(frozen=True)
class StabilityProblem:
    """Coefficients of ``L`` sampled on a grid.

    ``rho_half``/``sigma_half`` live on the ``n + 1`` cell faces, poles
    included (``rho_half`` is zero there).  ``div_X`` defaults to a centered
    difference of ``sigma rho X_theta``.
    """

    grid: ThetaGrid
    rho: np.ndarray
    sigma: np.ndarray
    rho_half: np.ndarray
    sigma_half: np.ndarray
    Q: np.ndarray
    X_theta: np.ndarray
    X_phi: np.ndarray
    div_X: Optional[np.ndarray] = None
    m_max: int = 8
    metric: Optional[MetricProfile] = None

    def __post_init__(self):
        n = self.grid.n
        for name in ("rho", "sigma", "Q", "X_theta", "X_phi"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n,):
                raise DomainError(f"{name} must be sampled on the {n} grid nodes")
            if not np.all(np.isfinite(arr)):
                bad = int(np.flatnonzero(~np.isfinite(arr))[0])
                raise DomainError(f"{name} is not finite at node {bad}")
            object.__setattr__(self, name, arr)
        for name in ("rho_half", "sigma_half"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (n + 1,):
                raise DomainError(f"{name} must have {n + 1} face values")
            object.__setattr__(self, name, arr)
        if np.any(self.rho <= 0) or np.any(self.sigma <= 0):
            raise DomainError("rho and sigma must be positive at the nodes")
        if self.m_max < 0:
            raise DomainError("m_max must be non-negative")
        if self.div_X is None:
            flux = self.sigma * self.rho * self.X_theta
            d1, _ = grid_derivatives(flux, self.grid.spacing, parity=1)
            object.__setattr__(self, "div_X", d1 / (self.sigma * self.rho))
        else:
            object.__setattr__(self, "div_X", _field(self.div_X, self.grid.nodes))

    # constructors --------------------------------------------------------
    @classmethod
    def on_profile(cls, metric, grid, Q=0.0, X_theta=0.0, X_phi=0.0,
                   div_X=None, m_max=8):
        """Problem on the sphere ``metric`` itself.

        ``Q``, ``X_theta``, ``X_phi`` and ``div_X`` may be scalars, arrays on
        the nodes or callables of theta.
        """
        th, half = grid.nodes, grid.half_nodes
        rho_half = np.zeros(grid.n + 1)
        rho_half[1:-1] = metric.rho(half[1:-1])
        sig = metric.sigma
        return cls(grid, metric.rho(th), np.full(grid.n, sig), rho_half,
                   np.full(grid.n + 1, sig), _field(Q, th), _field(X_theta, th),
                   _field(X_phi, th),
                   None if div_X is None else _field(div_X, th), m_max, metric)

    @classmethod
    def from_surface(cls, d, s, grid, m_max=8, energy=None):
        """Problem on the graph ``s`` in the initial data ``d``.

        ``energy`` replaces ``mu + J(nu)`` by a constant, which models data
        whose energy density is pinned at that value along the surface.
        """
        f, fp, fpp = s.evaluate(grid)
        gf = graph_fields(d, grid.nodes, f, fp, fpp)
        Q = gf["Q"] if energy is None else gf["Q"] + gf["mu_plus_J_nu"] - energy
        half = grid.half_nodes[1:-1]
        if s.is_analytic:
            fh, fph, _ = s.evaluate_at(half)
        else:
            fh = 0.5 * (f[1:] + f[:-1])
            fph = np.diff(f) / grid.spacing
        sig_h, rho_h = induced_metric(d, half, fh, fph)
        sigma_half = np.empty(grid.n + 1)
        sigma_half[1:-1] = sig_h
        sigma_half[0], sigma_half[-1] = sig_h[0], sig_h[-1]
        rho_half = np.zeros(grid.n + 1)
        rho_half[1:-1] = rho_h
        return cls(grid, gf["rho"], gf["sigma"], rho_half, sigma_half, Q,
                   gf["X_theta"], gf["X_phi"], gf["div_X"], m_max, d.metric)

    # derived fields ------------------------------------------------------
    @property
    def X_norm2(self):
        return self.sigma**2 * self.X_theta**2 + self.rho**2 * self.X_phi**2

    @property
    def X_eta_norm2(self):
        return self.rho**2 * self.X_phi**2

    @property
    def potential(self):
        """Zeroth-order coefficient ``Q - |X|^2 + div X``."""
        return self.Q - self.X_norm2 + self.div_X

    def shifted(self, q):
        """Same problem with ``Q + q``."""
        return StabilityProblem(self.grid, self.rho, self.sigma, self.rho_half,
                                self.sigma_half, self.Q + q, self.X_theta,
                                self.X_phi, self.div_X, self.m_max, self.metric)

    def integrate(self, values):
        """``int values dA`` with the grid quadrature."""
        return 2.0 * np.pi * self.grid.integrate(values * self.sigma * self.rho)


# ---------------------------------------------------------------------------
# assembly


def area_weights(p):
    """Diagonal weights making the discrete Laplacian symmetric."""
    return p.sigma * p.rho * p.grid.spacing


def _laplacian(p, m):
    """Matrix of ``-Delta`` restricted to mode ``m``."""
    n, h = p.grid.n, p.grid.spacing
    flux = p.rho_half / p.sigma_half
    denom = p.sigma * p.rho * h**2
    lower, upper = flux[:-1], flux[1:]
    A = np.zeros((n, n))
    idx = np.arange(n)
    A[idx, idx] = (lower + upper) / denom + m**2 / p.rho**2
    A[idx[1:], idx[:-1]] = -lower[1:] / denom[1:]
    A[idx[:-1], idx[1:]] = -upper[:-1] / denom[:-1]
    return A


def _first_derivative(n, h, parity):
    D = np.zeros((n, n))
    idx = np.arange(n)
    D[idx[:-1], idx[1:]] = 1.0
    D[idx[1:], idx[:-1]] = -1.0
    D[0, 0] -= parity
    D[-1, -1] += parity
    return D / (2.0 * h)


def _check_mode(p, m):
    if not 0 <= m <= p.m_max:
        raise DomainError(f"mode m={m} outside 0..{p.m_max}")


def assemble_mode(p, m):
    """Dense matrix of ``L`` on the azimuthal mode ``m``.

    Real for ``m = 0``, complex otherwise.
    """
    _check_mode(p, m)
    parity = 1 if m == 0 else -1
    D = _first_derivative(p.grid.n, p.grid.spacing, parity)
    A = _laplacian(p, m) + 2.0 * p.X_theta[:, None] * D
    A[np.diag_indices_from(A)] += p.potential
    if m == 0:
        return A
    A = A.astype(complex)
    A[np.diag_indices_from(A)] += 2j * m * p.X_phi
    return A


def assemble_adjoint(p, m=0):
    """Independent discretization of ``L* u = -Delta u - 2<X, grad u> +
    (Q - |X|^2 - div X) u``.

    Agrees with the weighted transpose of :func:`assemble_mode` only to
    truncation order; used for the duality pairing.
    """
    _check_mode(p, m)
    parity = 1 if m == 0 else -1
    D = _first_derivative(p.grid.n, p.grid.spacing, parity)
    A = _laplacian(p, m) - 2.0 * p.X_theta[:, None] * D
    A[np.diag_indices_from(A)] += p.Q - p.X_norm2 - p.div_X
    if m == 0:
        return A
    A = A.astype(complex)
    A[np.diag_indices_from(A)] -= 2j * m * p.X_phi
    return A


def discrete_adjoint(p, m=0):
    """Formal adjoint of the mode matrix in the weighted inner product."""
    A = assemble_mode(p, m)
    w = area_weights(p)
    return (A.conj().T * w[None, :]) / w[:, None]


def assemble_symmetrized(p):
    """Symmetric matrix similar to ``-Delta + Q`` on axisymmetric functions."""
    A = _laplacian(p, 0)
    A[np.diag_indices_from(A)] += p.Q
    sw = np.sqrt(area_weights(p))
    S = sw[:, None] * A / sw[None, :]
    return 0.5 * (S + S.T)


# ---------------------------------------------------------------------------
# eigenproblem


@dataclass(frozen=True)
class EigenResult:
    lambda1: float
    u: np.ndarray
    theta: np.ndarray
    per_mode_min_re: list
    lambda1_adjoint: float
    lambda1_symmetrized: float
    spectral_tol: float
    n: int
    m_max: int
    near_degenerate: bool = False
    mode_margin: Optional[float] = None

    @property
    def axisymmetric_minimum(self):
        return all(self.per_mode_min_re[0] <= v + self.spectral_tol
                   for v in self.per_mode_min_re)

    def as_dict(self):
        return {
            "lambda1": self.lambda1,
            "lambda1_adjoint": self.lambda1_adjoint,
            "lambda1_symmetrized": self.lambda1_symmetrized,
            "per_mode_min_re": list(self.per_mode_min_re),
            "mode_margin": self.mode_margin,
            "near_degenerate": self.near_degenerate,
            "n": self.n,
            "m_max": self.m_max,
            "spectral_tol": self.spectral_tol,
        }

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)

    def u_to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "u"])
        for t, v in zip(self.theta, self.u):
            w.writerow([f"{t:.12g}", f"{v:.12g}"])
        return buf.getvalue()


def _sign_changes(v):
    s = np.sign(v[np.abs(v) > 1e-12 * np.max(np.abs(v))])
    return int(np.count_nonzero(s[1:] != s[:-1]))


def _real_vector(v):
    v = v / v[np.argmax(np.abs(v))]
    return np.real(v)


def _eig(A, what):
    try:
        return sla.eig(A)
    except (sla.LinAlgError, ValueError) as exc:
        raise NumericalError(f"eigen-solver failed on {what}: {exc}") from exc


def principal_eigenpair(p, spectral_tol=None):
    """Principal eigenvalue and eigenfunction of ``L``, checked across modes.

    Raises
    ------
    NumericalError
        If the selected eigenfunction is not sign-definite.
    """
    vals0, vecs0 = _eig(assemble_mode(p, 0), "mode 0")
    re = vals0.real
    lam_min = re.min()
    tol = spectral_tol if spectral_tol is not None else 1e-7 * max(1.0, abs(lam_min))
    cands = np.flatnonzero(re <= lam_min + tol)
    near = cands.size > 1
    if near:
        best = min(cands, key=lambda i: (_sign_changes(_real_vector(vecs0[:, i])), re[i]))
    else:
        best = int(np.argmin(re))
    lam = float(re[best])
    u = _real_vector(vecs0[:, best])
    if np.min(u) <= 0:
        j = int(np.argmin(u))
        raise NumericalError(
            f"principal eigenfunction changes sign at node {j} "
            f"(theta={p.grid.nodes[j]:.6g}); refine the grid or check the coefficients"
        )
    u = u / np.max(u)

    per_mode = [float(lam_min)]
    for m in range(1, p.m_max + 1):
        vals = _eig(assemble_mode(p, m), f"mode {m}")[0]
        per_mode.append(float(vals.real.min()))

    adj = _eig(discrete_adjoint(p, 0), "adjoint")[0]
    lam_adj = float(adj.real.min())
    lam_sym = float(sla.eigvalsh(assemble_symmetrized(p))[0])
    margin = min(per_mode[1:]) - per_mode[0] if p.m_max >= 1 else None
    return EigenResult(lam, u, p.grid.nodes.copy(), per_mode, lam_adj, lam_sym,
                       float(tol), p.grid.n, p.m_max, bool(near), margin)


# ---------------------------------------------------------------------------
# stability inequality


@dataclass(frozen=True)
class InequalityReport:
    lambda1: float
    lhs: np.ndarray
    rhs: np.ndarray
    tol: np.ndarray

    @property
    def margins(self):
        return self.rhs - self.lhs

    @property
    def ok(self):
        return bool(np.all(self.lhs <= self.rhs + self.tol))

    @property
    def min_margin(self):
        return float(np.min(self.margins))


def _trial_values(p, f):
    th = p.grid.nodes
    if callable(f):
        v = np.asarray(f(th), dtype=float)
        h = 1e-4
        dv = (f(th + h) - f(th - h)) / (2.0 * h)
    else:
        v = np.asarray(f, dtype=float)
        dv, _ = grid_derivatives(v, p.grid.spacing, parity=1)
    return np.broadcast_to(v, th.shape), np.broadcast_to(dv, th.shape)


def stability_inequality_check(p, trial_fns, rel_tol=1e-8, eigen=None):
    """Check ``int |X^eta|^2 f^2 <= int |grad f|^2 + Q f^2`` for each trial ``f``.

    Trial functions are callables of theta or arrays on the nodes.
    """
    eigen = eigen if eigen is not None else principal_eigenpair(p)
    if eigen.lambda1 < -eigen.spectral_tol:
        raise DomainError(
            f"stability inequality needs a stable surface, lambda1={eigen.lambda1:.6g}"
        )
    lhs, rhs, tol = [], [], []
    for f in trial_fns:
        v, dv = _trial_values(p, f)
        left = p.integrate(p.X_eta_norm2 * v**2)
        grad = p.integrate(dv**2 / p.sigma**2)
        right = grad + p.integrate(p.Q * v**2)
        lhs.append(left)
        rhs.append(right)
        tol.append(rel_tol * max(abs(right), grad, abs(left), 1e-300))
    return InequalityReport(eigen.lambda1, np.array(lhs), np.array(rhs), np.array(tol))


# ---------------------------------------------------------------------------
# first variation of theta_plus


def _theta_derivs(fn, theta, h=1e-3):
    """First and second theta-derivatives of a callable by 5-point stencils."""
    fm2, fm1, f0 = fn(theta - 2 * h), fn(theta - h), fn(theta)
    fp1, fp2 = fn(theta + h), fn(theta + 2 * h)
    d1 = (fm2 - 8 * fm1 + 8 * fp1 - fp2) / (12 * h)
    d2 = (-fm2 + 16 * fm1 - 30 * f0 + 16 * fp1 - fp2) / (12 * h**2)
    return d1, d2


@dataclass(frozen=True)
class FirstVariationReport:
    theta: np.ndarray
    predicted: np.ndarray
    steps: tuple
    errors: tuple
    extrapolated: np.ndarray
    extrapolated_error: float
    monotone: bool


def first_variation_check(d, s, phi, steps=(1e-3, 5e-4, 2.5e-4), grid=None):
    """Compare a finite-difference variation of ``theta_plus`` with ``L``.

    The graph ``t = f + h phi`` moves with velocity ``phi d_t``, whose normal
    part is ``psi = phi / W`` and whose tangential part transports the
    theta-coordinate by ``phi f' / sigma^2``.  The prediction is therefore

        L psi + (tau theta+ - theta+^2 / 2) psi + (phi f'/sigma^2) d_theta theta+.

    ``phi`` is a callable of theta, or a triple ``(phi, phi', phi'')``.
    """
    if not s.is_analytic:
        raise DomainError("first-variation check needs an analytic graph")
    grid = grid if grid is not None else ThetaGrid(64)
    th = grid.nodes
    if callable(phi):
        phi_fn = phi
        dphi_fn = lambda t: _theta_derivs(phi, t)[0]
        d2phi_fn = lambda t: _theta_derivs(phi, t)[1]
    else:
        phi_fn, dphi_fn, d2phi_fn = phi

    def tp(h):
        def fn(t):
            t = np.asarray(t, dtype=float)
            f, fp, fpp = s.evaluate_at(t)
            f = f + h * phi_fn(t)
            fp = fp + h * dphi_fn(t)
            fpp = fpp + h * d2phi_fn(t)
            return graph_fields(d, t, f, fp, fpp)["theta_plus"]
        return fn

    f, fp, fpp = s.evaluate_at(th)
    gf = graph_fields(d, th, f, fp, fpp)
    W = 1.0 / gf["normal_t"]

    def psi_fn(t):
        ff, ffp, _ = s.evaluate_at(t)
        sig, _ = induced_metric(d, t, ff, ffp)
        A = sig**2 - ffp**2
        return phi_fn(t) / np.sqrt(1.0 + ffp**2 / A)

    psi = phi_fn(th) / W
    dpsi, d2psi = _theta_derivs(psi_fn, th)
    sig2 = gf["sigma"] ** 2
    lap = (d2psi + dpsi * (gf["log_drho"] - gf["log_dsigma"])) / sig2
    Lpsi = (-lap + 2.0 * gf["X_theta"] * dpsi
            + (gf["Q"] - gf["X_norm2"] + gf["div_X"]) * psi)
    tplus = gf["theta_plus"]
    dtp, _ = _theta_derivs(tp(0.0), th)
    pred = (Lpsi + (gf["tau"] * tplus - 0.5 * tplus**2) * psi
            + phi_fn(th) * fp / sig2 * dtp)

    fds = [(tp(h)(th) - tp(-h)(th)) / (2.0 * h) for h in steps]
    scale = float(np.max(np.abs(pred)))
    scale = scale if scale > 1e-12 else 1.0
    errs = tuple(float(np.max(np.abs(v - pred)) / scale) for v in fds)
    # Richardson on the h^2 error of central differences
    level = list(fds)
    ratios = [steps[i] / steps[i + 1] for i in range(len(steps) - 1)]
    k = 2
    while len(level) > 1:
        level = [(r**k * level[i + 1] - level[i]) / (r**k - 1)
                 for i, r in enumerate(ratios[: len(level) - 1])]
        k += 2
    extrap = level[0]
    ext_err = float(np.max(np.abs(extrap - pred)) / scale)
    monotone = all(errs[i + 1] <= errs[i] * 1.000001 + 1e-15 for i in range(len(errs) - 1))
    return FirstVariationReport(th, pred, tuple(steps), errs, extrap, ext_err, monotone)
