"""Axisymmetric initial data around a slice and its graph deformations.

The data live on ``R x S^2`` with

    g = dt^2 + exp(2 w(t, theta)) g_Sigma,
    K = alpha(t) dt^2 + beta(theta) (dt dphi + dphi dt),

where ``g_Sigma`` is a :class:`~axismots.geomcore.MetricProfile`.  With
``w = 0`` this is the product family used for the graph-deformation argument
on ``omega``; a ``t``-dependent ``w`` supplies non-trivial foliations.

Surfaces are graphs ``t = f(theta)`` with outward normal pointing toward
increasing ``t``.  Everything below is evaluated pointwise from ``f, f', f''``
and works on complex arrays, so it can be differentiated by complex step.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, fields
from typing import Callable

import numpy as np
from scipy.optimize import minimize

from .errors import DomainError
from .geomcore import GraphSurface, MetricProfile

__all__ = [
    "TimePolynomial",
    "TrigTerms",
    "Warp",
    "ProductData",
    "SurfaceQuantities",
    "OmegaReport",
    "DeformationReport",
    "OmegaMinimum",
    "graph_fields",
    "induced_metric",
    "surface_quantities",
    "omega_of_surface",
    "beta_deformation_check",
    "minimize_omega",
]


# ---------------------------------------------------------------------------
# coefficient fields


@dataclass(frozen=True)
class TimePolynomial:
    """``alpha(t) = sum_i c_i t^i``."""

    coeffs: tuple = (0.0,)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs) or (0.0,))

    @property
    def _poly(self):
        return np.polynomial.Polynomial(self.coeffs)

    def __call__(self, t):
        return self._poly(t)

    def deriv(self, t):
        return self._poly.deriv()(t)

    @property
    def is_zero(self):
        return all(c == 0.0 for c in self.coeffs)


@dataclass(frozen=True)
class TrigTerms:
    """``beta(theta) = sum c sin(theta)^i cos(theta)^j`` from ``(c, i, j)`` terms."""

    terms: tuple = ()

    def __post_init__(self):
        clean = tuple((float(c), int(i), int(j)) for c, i, j in self.terms)
        if any(i < 0 or j < 0 for _, i, j in clean):
            raise DomainError("trig term powers must be non-negative")
        object.__setattr__(self, "terms", clean)

    def __call__(self, theta):
        theta = np.asarray(theta)
        out = np.zeros(theta.shape, dtype=np.result_type(theta, float))
        s, c = np.sin(theta), np.cos(theta)
        for coef, i, j in self.terms:
            out = out + coef * s**i * c**j
        return out

    def scaled(self, factor):
        return TrigTerms(tuple((factor * c, i, j) for c, i, j in self.terms))

    @property
    def is_zero(self):
        return all(c == 0.0 for c, _, _ in self.terms)


def _tpow(t, k):
    if k < 0:
        return np.zeros_like(t)
    return t**k


@dataclass(frozen=True)
class Warp:
    """Conformal exponent ``w(t, theta) = sum c t^i cos(theta)^j``.

    Terms are ``(c, i, j)``.  ``partials`` returns ``w`` and its first and
    second derivatives in ``t`` and ``theta``.
    """

    terms: tuple = ()

    def __post_init__(self):
        clean = tuple((float(c), int(i), int(j)) for c, i, j in self.terms)
        if any(i < 0 or j < 0 for _, i, j in clean):
            raise DomainError("warp powers must be non-negative")
        object.__setattr__(self, "terms", clean)

    @property
    def is_zero(self):
        return all(c == 0.0 for c, _, _ in self.terms)

    def partials(self, t, theta):
        t = np.asarray(t)
        theta = np.asarray(theta)
        shape = np.broadcast(t, theta).shape
        dtype = np.result_type(t, theta, float)
        w, wt, wth, wtt, wtth, wthth = (np.zeros(shape, dtype) for _ in range(6))
        s, c = np.sin(theta), np.cos(theta)
        for coef, i, j in self.terms:
            T, Tp, Tpp = _tpow(t, i), i * _tpow(t, i - 1), i * (i - 1) * _tpow(t, i - 2)
            C = _tpow(c, j)
            Cp = -j * _tpow(c, j - 1) * s
            Cpp = j * (j - 1) * _tpow(c, j - 2) * s**2 - j * C
            w = w + coef * T * C
            wt = wt + coef * Tp * C
            wth = wth + coef * T * Cp
            wtt = wtt + coef * Tpp * C
            wtth = wtth + coef * Tp * Cp
            wthth = wthth + coef * T * Cpp
        return w, wt, wth, wtt, wtth, wthth


@dataclass(frozen=True)
class ProductData:
    """Axisymmetric initial data ``(g, K)`` on ``R x S^2``.

    ``beta`` may be any vectorized callable of theta; only its values enter.
    ``alpha`` needs ``__call__`` and ``deriv``.
    """

    metric: MetricProfile
    alpha: TimePolynomial = field(default_factory=TimePolynomial)
    beta: Callable = field(default_factory=TrigTerms)
    warp: Warp = field(default_factory=Warp)

    def __post_init__(self):
        ends = np.asarray(self.beta(np.array([0.0, np.pi])), dtype=float)
        if not np.all(np.isfinite(ends)) or np.any(np.abs(ends) > self.metric.pole_tol):
            raise DomainError(f"beta must vanish at the poles, got {ends}")
        probe = np.linspace(0.0, 1.0, 5)
        if not np.all(np.isfinite(np.asarray(self.alpha(probe), dtype=float))):
            raise DomainError("alpha is not finite")

    @property
    def is_product(self):
        return self.warp.is_zero

    def with_beta(self, beta):
        return ProductData(self.metric, self.alpha, beta, self.warp)


# ---------------------------------------------------------------------------
# pointwise graph geometry


def induced_metric(d, theta, f, fp):
    """``(sigma, rho)`` of the graph's induced metric ``sigma^2 dth^2 + rho^2 dphi^2``."""
    w = d.warp.partials(f, theta)[0]
    e2w = np.exp(2.0 * w)
    sigma = np.sqrt(d.metric.sigma**2 * e2w + fp**2)
    rho = d.metric.rho(theta) * np.exp(w)
    return sigma, rho


def graph_fields(d, theta, f, fp, fpp):
    """All geometric fields of the graph ``t = f(theta)`` at the points ``theta``.

    Returns a dict of arrays.  Derivations, with ``A = h^2 e^{2w}``,
    ``B = rho^2 e^{2w}``, ``W^2 = 1 + f'^2/A`` and ``sigma^2 = A + f'^2``:

    * unit normal ``N = (d_t - (f'/A) d_theta) / W``;
    * ``H = div N`` of the level sets of ``t - f``;
    * ``K|_Sigma``: only ``K(e_th, e_th) = alpha f'^2`` and
      ``K(e_th, e_phi) = beta f'`` survive;
    * ``X = K(N, .)``: ``X^th = alpha f' / (W sigma^2)``, ``X^phi = beta/(W B)``;
    * ``R = 2 kappa_slice e^{-2w} - 2 (w_thth + w_th rho'/rho)/A
      - 4 w_tt - 6 w_t^2`` (Gauss plus Riccati along ``d_t``);
    * ``mu = R/2 - beta^2/B`` because ``|K|^2 = alpha^2 + 2 beta^2/B`` and
      ``tr K = alpha``;
    * ``J = div K - d tr K`` has ``J_t = 2 alpha w_t`` and ``J_theta = 0``.
    """
    m = d.metric
    h = m.sigma
    rho = m.rho(theta)
    lr = m.drho(theta) / rho                       # rho'/rho
    kap0 = m.curvature(theta)                      # = -rho''/(h^2 rho)
    w, wt, wth, wtt, wtth, wthth = d.warp.partials(f, theta)
    alpha = d.alpha(f)
    dalpha = d.alpha.deriv(f)
    beta = d.beta(theta)

    e2w = np.exp(2.0 * w)
    A = h**2 * e2w
    B = rho**2 * e2w
    E = 1.0 / A
    W2 = 1.0 + fp**2 * E
    W = np.sqrt(W2)
    sig2 = A + fp**2

    a_t, b_t = wt, wt
    a_th = wth
    b_th = wth + lr

    H = ((a_t + b_t) / W + a_t * fp**2 * E / W**3
         - E * ((b_th - a_th) * fp / W + fpp / W
                - fp**2 * E * (fpp - a_th * fp) / W**3))
    trK = alpha * fp**2 / sig2

    # second fundamental form, mixed components
    k_phi = (b_t - fp * E * b_th) / W
    k_th = H - k_phi
    K_th = alpha * fp**2 / sig2
    K_off2 = 2.0 * beta**2 * fp**2 / (sig2 * B)
    chi_plus2 = (K_th + k_th) ** 2 + k_phi**2 + K_off2
    chi_minus2 = (K_th - k_th) ** 2 + k_phi**2 + K_off2

    X_th = alpha * fp / (W * sig2)
    X_phi = beta / (W * B)
    X_eta2 = beta**2 / (W2 * B)
    X2 = sig2 * X_th**2 + X_eta2

    R = (2.0 * kap0 / e2w - 2.0 * E * (wthth + wth * lr)
         - 4.0 * wtt - 6.0 * wt**2)
    mu = 0.5 * R - beta**2 / B
    J_nu = 2.0 * alpha * wt / W

    # Gaussian curvature of sigma^2 dth^2 + rhot^2 dphi^2
    D = wth + wt * fp
    L1 = lr + D                                    # rhot'/rhot
    rr = (-h**2 * kap0 + 2.0 * lr * D + D**2
          + wthth + 2.0 * wtth * fp + wtt * fp**2 + wt * fpp)   # rhot''/rhot
    dsig2 = 2.0 * A * D + 2.0 * fp * fpp
    ls = dsig2 / (2.0 * sig2)                      # sigma'/sigma
    kappa = (-rr + ls * L1) / sig2

    # div X = (X^th)' + X^th (sigma'/sigma + rhot'/rhot)
    ew = np.exp(w)
    dX_th = h * ew / (sig2 * np.sqrt(sig2)) * (
        dalpha * fp**2 + alpha * fpp + alpha * fp * D - 3.0 * alpha * fp * ls)
    div_X = dX_th + X_th * (ls + L1)

    Q = kappa - (mu + J_nu) - 0.5 * chi_plus2
    sigma = np.sqrt(sig2)
    rhot = rho * ew
    return {
        "H": H,
        "tr_sigma_K": trK,
        "theta_plus": trK + H,
        "theta_minus": trK - H,
        "chi_plus_norm2": chi_plus2,
        "chi_minus_norm2": chi_minus2,
        "X_theta": X_th,
        "X_phi": X_phi,
        "X_norm2": X2,
        "X_eta_norm2": X_eta2,
        "komar_density": beta / W,
        "mu": mu,
        "J_nu": J_nu,
        "R": R,
        "mu_plus_J_nu": mu + J_nu,
        "tau": alpha,
        "kappa": kappa,
        "Q": Q,
        "div_X": div_X,
        "sigma": sigma,
        "rho": rhot,
        "log_drho": L1,
        "log_dsigma": ls,
        "area_density": sigma * rhot,
        "normal_t": 1.0 / W,
    }


# ---------------------------------------------------------------------------
# surface quantities


@dataclass(frozen=True)
class SurfaceQuantities:
    """Fields of one axisymmetric surface sampled at grid nodes.

    The first block mirrors the quantities of the null-expansion and
    ``X``-projection definitions; the second holds what the stability
    operator and the quadratures need.  Users with general surfaces can build
    this directly.
    """

    theta: np.ndarray
    theta_plus: np.ndarray
    theta_minus: np.ndarray
    tr_sigma_K: np.ndarray
    H: np.ndarray
    chi_plus_norm2: np.ndarray
    chi_minus_norm2: np.ndarray
    X_theta: np.ndarray
    X_phi: np.ndarray
    X_eta_norm2: np.ndarray
    mu_plus_J_nu: np.ndarray
    tau: np.ndarray
    area_density: np.ndarray
    kappa: np.ndarray = None
    Q: np.ndarray = None
    div_X: np.ndarray = None
    sigma: np.ndarray = None
    rho: np.ndarray = None

    @property
    def X_norm2(self):
        return self.sigma**2 * self.X_theta**2 + self.X_eta_norm2

    @property
    def komar_density(self):
        """``<X, d_phi> = rho^2 X^phi``."""
        return self.rho**2 * self.X_phi

    def to_csv(self):
        """CSV text with a ``theta`` column and one column per stored field."""
        names = [f.name for f in fields(self) if getattr(self, f.name) is not None]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(names)
        cols = [np.real(np.asarray(getattr(self, n), dtype=complex)) for n in names]
        for row in zip(*cols):
            writer.writerow([f"{v:.12g}" for v in row])
        return buf.getvalue()


def _check_surface(d, s):
    a, b = s.base, d.metric
    if (a.name, a.scale, a.params) != (b.name, b.scale, b.params):
        raise DomainError("graph surface and data use different base metrics")


def surface_quantities(d, s, grid):
    """Evaluate every field of the graph ``s`` in the data ``d`` on ``grid``."""
    _check_surface(d, s)
    f, fp, fpp = s.evaluate(grid)
    return _quantities_from(graph_fields(d, grid.nodes, f, fp, fpp), grid.nodes)


def _quantities_from(gf, theta):
    keep = {f.name for f in fields(SurfaceQuantities)} - {"theta"}
    return SurfaceQuantities(theta=theta, **{k: gf[k] for k in keep})


@dataclass(frozen=True)
class OmegaReport:
    omega: float
    area: float
    komar: float
    bound: float
    c: float

    def as_dict(self):
        return {"omega": self.omega, "area": self.area, "komar": self.komar,
                "bound": self.bound, "c": self.c}


def omega_of_surface(q, grid, c):
    """Area-averaged ``|X^eta|^2``, the Komar integral and ``4 pi/(c + omega)``.

    The pole points never enter: the grid excludes them and every integrand
    carries the area density, which vanishes there.
    """
    if not c > 0:
        raise DomainError(f"energy floor c must be positive, got {c}")
    dens = np.real(q.area_density)
    area = 2.0 * np.pi * grid.integrate(dens)
    x2 = 2.0 * np.pi * grid.integrate(np.real(q.X_eta_norm2) * dens)
    komar = 2.0 * np.pi * grid.integrate(np.real(q.komar_density) * dens)
    omega = x2 / area
    return OmegaReport(float(omega), float(area), float(komar),
                       float(4.0 * np.pi / (c + omega)), float(c))


# ---------------------------------------------------------------------------
# graph deformations of product slices


@dataclass(frozen=True)
class DeformationRow:
    max_slope: float
    area: float
    x_eta_integral: float
    omega: float
    integral_ok: bool
    omega_ok: bool


@dataclass(frozen=True)
class DeformationReport:
    base_area: float
    base_integral: float
    base_omega: float
    beta_vanishes: bool
    rows: list

    @property
    def ok(self):
        return all(r.integral_ok and r.omega_ok for r in self.rows)


def beta_deformation_check(d, f_family, grid, tol=1e-12):
    """Compare ``int |X^{d_phi}|^2`` and ``omega`` of graphs against the slice.

    For product data the integral can only drop under a graph deformation,
    with equality iff ``f'`` vanishes wherever ``beta`` does not; since the
    area can only grow, ``omega`` strictly drops whenever ``beta`` is not
    identically zero and the graph is not a slice.
    """
    if not d.is_product:
        raise DomainError("graph-deformation check needs product data (no warp)")
    base = omega_of_surface(
        surface_quantities(d, GraphSurface.constant(d.metric), grid), grid, 1.0)
    base_int = base.omega * base.area
    beta = np.asarray(d.beta(grid.nodes), dtype=float)
    beta_zero = bool(np.all(np.abs(beta) <= tol))
    scale = max(base_int, 1.0)
    rows = []
    for s in f_family:
        rep = omega_of_surface(surface_quantities(d, s, grid), grid, 1.0)
        _, fp, _ = s.evaluate(grid)
        integral = rep.omega * rep.area
        active = np.abs(beta) > tol
        slope_on_support = float(np.max(np.abs(fp[active]), initial=0.0))
        if slope_on_support <= tol:
            integral_ok = abs(integral - base_int) <= tol * scale * 1e3
        else:
            integral_ok = integral < base_int
        nonconstant = float(np.max(np.abs(fp))) > tol
        if beta_zero:
            omega_ok = abs(rep.omega) <= tol * 1e3 and abs(base.omega) <= tol * 1e3
        elif nonconstant:
            omega_ok = rep.omega < base.omega
        else:
            omega_ok = abs(rep.omega - base.omega) <= tol * max(base.omega, 1.0) * 1e3
        rows.append(DeformationRow(float(np.max(np.abs(fp))), rep.area, integral,
                                 rep.omega, bool(integral_ok), bool(omega_ok)))
    return DeformationReport(base.area, base_int, base.omega, beta_zero, rows)


@dataclass(frozen=True)
class OmegaMinimum:
    coeffs: np.ndarray
    omega: float
    omega_slice: float
    converged: bool
    iterations: int
    message: str = ""

    def surface(self, base):
        return GraphSurface.cosine_series(base, np.concatenate(([0.0], self.coeffs)))


def minimize_omega(d, grid, basis_size, max_iters=200, coef_bound=1.0, start=0.1):
    """Minimize ``omega`` over ``f = sum_{k=1}^{K} c_k cos(k theta)``.

    ``omega`` depends on ``f`` only through ``f'^2``, so ``f = 0`` is a
    stationary point; the search starts at ``c_k = start / k`` and keeps
    ``|c_k| <= coef_bound``.  Without the bound the infimum is approached
    only as ``|f'| -> infinity``.
    """
    if basis_size < 1 or basis_size > grid.n / 4:
        raise DomainError(f"basis_size must be in [1, n/4], got {basis_size}")
    if not d.is_product:
        raise DomainError("omega minimization is defined for product data")

    def omega(c):
        s = GraphSurface.cosine_series(d.metric, np.concatenate(([0.0], c)))
        return omega_of_surface(surface_quantities(d, s, grid), grid, 1.0).omega

    slice_omega = omega(np.zeros(basis_size))
    x0 = start / np.arange(1, basis_size + 1)
    res = minimize(omega, x0, method="L-BFGS-B",
                   bounds=[(-coef_bound, coef_bound)] * basis_size,
                   options={"maxiter": max_iters})
    best = np.asarray(res.x, dtype=float)
    value = float(res.fun)
    if omega(x0) < value:
        best, value = x0, omega(x0)
    return OmegaMinimum(best, value, float(slice_omega), bool(res.success),
                        int(res.nit), str(res.message))
