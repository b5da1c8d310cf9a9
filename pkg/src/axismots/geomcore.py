"""Rotationally symmetric geometry on the two-sphere.

A surface metric is written as

    g_Sigma = r^2 (dtheta^2 + rhohat(theta)^2 dphi^2),   theta in [0, pi],

so ``rho = r * rhohat`` is the circumferential radius and ``sigma = r`` the
length scale of the theta direction.  With ``r = 1`` this is the familiar
orthogonal-gauge form ``dtheta^2 + rho^2 dphi^2``.

Everything is sampled on a midpoint grid that never touches the poles.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.special import roots_legendre

from .errors import DomainError, NumericalError

DEFAULT_POLE_TOL = 1e-6

__all__ = [
    "ThetaGrid",
    "MetricProfile",
    "GraphSurface",
    "PRESETS",
    "preset",
    "register_polynomial_preset",
    "load_profile_table",
    "fejer_weights",
    "gauss_legendre",
    "grid_derivatives",
    "gaussian_curvature",
    "area",
    "gauss_bonnet_defect",
    "graph_area_element",
]


# ---------------------------------------------------------------------------
# quadrature


def fejer_weights(n):
    r"""Weights of Fejer's first rule on the nodes ``cos(theta_j)``.

    ``sum_j w_j G(cos theta_j)`` integrates ``G`` over [-1, 1] exactly for
    polynomials of degree < n.
    """
    theta = (np.arange(1, n + 1) - 0.5) * np.pi / n
    k = np.arange(1, n // 2 + 1)
    terms = np.cos(2.0 * np.outer(theta, k)) / (4.0 * k**2 - 1.0)
    return (2.0 / n) * (1.0 - 2.0 * terms.sum(axis=1))


@lru_cache(maxsize=32)
def _legendre_rule(n):
    x, w = roots_legendre(n)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def gauss_legendre(n, a=0.0, b=np.pi):
    """Gauss-Legendre nodes and weights mapped to [a, b]."""
    x, w = _legendre_rule(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


@dataclass(frozen=True)
class ThetaGrid:
    """Midpoint grid ``theta_j = (j - 1/2) pi / n`` with quadrature weights.

    Parameters
    ----------
    n : int
        Number of interior nodes.
    rule : {"fejer", "midpoint"}
        ``"fejer"`` integrates ``sin(theta) P(cos(theta))`` exactly for
        ``deg P < n``, which covers every integral against the area element
        of a smooth axisymmetric field.  ``"midpoint"`` is the composite
        midpoint rule (second order, weights sum to pi exactly).
    """

    n: int
    rule: str = "fejer"
    nodes: np.ndarray = field(init=False, repr=False, compare=False)
    half_nodes: np.ndarray = field(init=False, repr=False, compare=False)
    weights: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"grid needs at least 2 nodes, got n={self.n}")
        if self.rule not in ("fejer", "midpoint"):
            raise DomainError(f"unknown quadrature rule {self.rule!r}")
        n = int(self.n)
        nodes = (np.arange(1, n + 1) - 0.5) * np.pi / n
        if self.rule == "fejer":
            weights = fejer_weights(n) / np.sin(nodes)
        else:
            weights = np.full(n, np.pi / n)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "half_nodes", np.arange(n + 1) * np.pi / n)
        object.__setattr__(self, "weights", weights)

    @property
    def spacing(self):
        return np.pi / self.n

    @property
    def nominal_order(self):
        """Convergence order of the rule for smooth pole-vanishing integrands.

        ``None`` means spectral.
        """
        return 2 if self.rule == "midpoint" else None

    def integrate(self, values):
        """Quadrature of ``values`` sampled at the nodes over (0, pi)."""
        return np.dot(self.weights, values)

    def refined(self, factor=2):
        return ThetaGrid(self.n * factor, self.rule)


def grid_derivatives(values, spacing, parity=1):
    """Centered first and second differences on a midpoint grid.

    Ghost nodes across each pole are ``parity * values`` of the nearest node:
    ``parity=+1`` for fields even in theta at the poles (axisymmetric
    scalars), ``-1`` for odd ones.  Works on complex arrays.
    """
    v = np.asarray(values)
    padded = np.concatenate(([parity * v[0]], v, [parity * v[-1]]))
    d1 = (padded[2:] - padded[:-2]) / (2.0 * spacing)
    d2 = (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / spacing**2
    return d1, d2


# ---------------------------------------------------------------------------
# metric profiles


@dataclass(frozen=True)
class MetricProfile:
    """Profile of a rotationally symmetric metric on S^2.

    ``shape`` and its derivatives describe ``rhohat``; ``scale`` is ``r``.
    ``shape_curvature`` (optional) returns ``-rhohat''/rhohat`` with the pole
    cancellation carried out analytically.
    """

    name: str
    shape: Callable
    dshape: Callable
    d2shape: Callable
    scale: float = 1.0
    shape_curvature: Optional[Callable] = None
    analytic: bool = True
    pole_tol: float = DEFAULT_POLE_TOL
    strict: bool = True
    params: tuple = ()

    def __post_init__(self):
        if not self.scale > 0:
            raise DomainError(f"profile scale must be positive, got {self.scale}")
        probe = np.linspace(0.0, np.pi, 2049)[1:-1]
        vals = np.asarray(self.shape(probe), dtype=float)
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            bad = int(np.argmax(~(vals > 0)))
            raise DomainError(
                f"profile {self.name!r} is not positive on (0, pi): "
                f"rho({probe[bad]:.6g}) = {vals[bad]:.6g}"
            )
        if self.strict:
            report = self.regularity()
            if not report["regular"]:
                raise DomainError(
                    f"profile {self.name!r} violates pole regularity: {report}"
                )

    # physical quantities -------------------------------------------------
    @property
    def sigma(self):
        """Length scale of the theta direction (g_thetatheta = sigma^2)."""
        return self.scale

    def rho(self, theta):
        return self.scale * self.shape(theta)

    def drho(self, theta):
        return self.scale * self.dshape(theta)

    def d2rho(self, theta):
        return self.scale * self.d2shape(theta)

    def curvature(self, theta):
        """Gaussian curvature ``-rho''/(sigma^2 rho)``."""
        if self.shape_curvature is not None:
            kap = self.shape_curvature(theta)
        else:
            kap = -self.d2shape(theta) / self.shape(theta)
        return kap / self.scale**2

    def scaled(self, factor):
        """Same shape with ``r -> factor * r``."""
        return MetricProfile(
            self.name, self.shape, self.dshape, self.d2shape,
            self.scale * factor, self.shape_curvature, self.analytic,
            self.pole_tol, self.strict, self.params,
        )

    # invariants ----------------------------------------------------------
    def regularity(self):
        """Numerical pole-regularity diagnostics of ``rhohat``.

        Returns the defects ``rho(0)``, ``rho'(0) - 1``, ``rho'(pi) + 1`` and
        the second and fourth derivatives at both poles (the latter only for
        analytic profiles).
        """
        tol = self.pole_tol
        poles = np.array([0.0, np.pi])
        values = np.asarray(self.shape(poles), dtype=float)
        slopes = np.asarray(self.dshape(poles), dtype=float)
        second = np.asarray(self.d2shape(poles), dtype=float)
        out = {
            "rho_poles": values.tolist(),
            "slope_defect": [float(slopes[0] - 1.0), float(slopes[1] + 1.0)],
            "d2_poles": second.tolist(),
        }
        checks = [np.abs(values), np.abs(out["slope_defect"]), np.abs(second)]
        if self.analytic:
            h = 1e-2
            d4 = []
            for p in poles:
                d2p = self.d2shape(np.array([p - h, p, p + h]))
                d4.append(float((d2p[0] - 2 * d2p[1] + d2p[2]) / h**2))
            out["d4_poles"] = d4
            checks.append(np.abs(d4))
        out["regular"] = bool(all(np.all(c <= tol) for c in checks))
        return out

    @property
    def is_regular(self):
        return self.regularity()["regular"]


def _polynomial_profile(name, coeffs, scale=1.0, strict=True, params=()):
    """Profile ``rhohat = sin(theta) g(cos(theta))`` with polynomial ``g``.

    Any such profile is odd about both poles, so every even derivative
    vanishes there; the slope conditions reduce to ``g(1) = g(-1) = 1``.
    """
    g = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
    dg = g.deriv()
    d2g = dg.deriv()

    def shape(t):
        return np.sin(t) * g(np.cos(t))

    def dshape(t):
        s, c = np.sin(t), np.cos(t)
        return c * g(c) - s**2 * dg(c)

    def d2shape(t):
        s, c = np.sin(t), np.cos(t)
        return -s * g(c) - 3.0 * s * c * dg(c) + s**3 * d2g(c)

    def curvature(t):
        s, c = np.sin(t), np.cos(t)
        return (g(c) + 3.0 * c * dg(c) - s**2 * d2g(c)) / g(c)

    return MetricProfile(name, shape, dshape, d2shape, scale, curvature,
                         True, DEFAULT_POLE_TOL, strict, params)


def _round(r=1.0, strict=True):
    return _polynomial_profile("round", [1.0], scale=r, strict=strict,
                               params=(("r", r),))


def _round_r(r, strict=True):
    return _polynomial_profile("round_r", [1.0], scale=r, strict=strict,
                               params=(("r", r),))


def _poly(coeffs, scale=1.0, strict=True):
    return _polynomial_profile("poly", coeffs, scale, strict,
                               params=(("coeffs", tuple(coeffs)),))


def _sin3(eps, scale=1.0, strict=True):
    # sin + eps sin^3 = sin * (1 + eps (1 - cos^2))
    return _polynomial_profile("sin3", [1.0 + eps, 0.0, -eps], scale, strict,
                               params=(("eps", eps),))


PRESETS = {
    "round": _round,
    "round_r": _round_r,
    "poly": _poly,
    "sin3": _sin3,
}


def preset(name, **params):
    """Build a profile from the preset registry."""
    try:
        factory = PRESETS[name]
    except KeyError:
        raise DomainError(
            f"unknown profile preset {name!r}; known: {sorted(PRESETS)}"
        ) from None
    return factory(**params)


def register_polynomial_preset(name, coeffs):
    """Register ``sin(theta) g(cos(theta))`` under ``name``.

    The profile is validated once at registration.
    """
    _polynomial_profile(name, coeffs)

    def factory(scale=1.0, strict=True):
        return _polynomial_profile(name, coeffs, scale, strict,
                                   params=(("coeffs", tuple(coeffs)),))

    PRESETS[name] = factory
    return factory


def load_profile_table(path, scale=1.0, strict=True):
    """Load a two-column ``theta rho`` table as a cubic-spline profile.

    The data are reflected oddly across both poles (with ``rho = 0`` pinned
    there) before fitting, which is the smoothness condition of a regular
    rotationally symmetric sphere.
    """
    data = np.loadtxt(path, dtype=float, ndmin=2)
    if data.shape[1] != 2:
        raise DomainError(f"{path}: expected two columns (theta, rho)")
    theta, rho = data[:, 0], data[:, 1]
    if np.any(np.diff(theta) <= 0):
        raise DomainError(f"{path}: theta must be strictly increasing")
    if theta[0] < 0 or theta[-1] > np.pi:
        raise DomainError(f"{path}: theta must lie in [0, pi]")
    inside = (theta > 0) & (theta < np.pi)
    t_in, r_in = theta[inside], rho[inside]
    ext_t = np.concatenate((-t_in[::-1], [0.0], t_in, [np.pi],
                            2 * np.pi - t_in[::-1]))
    ext_r = np.concatenate((-r_in[::-1], [0.0], r_in, [0.0], -r_in[::-1]))
    spline = CubicSpline(ext_t, ext_r)
    return MetricProfile(
        f"table:{path}", spline, lambda t: spline(t, 1), lambda t: spline(t, 2),
        scale, None, False, DEFAULT_POLE_TOL, strict, (("path", str(path)),),
    )


# ---------------------------------------------------------------------------
# graph surfaces


@dataclass(frozen=True)
class GraphSurface:
    """Axisymmetric graph ``t = f(theta)`` over ``base``.

    Either analytic (``height``, ``dheight``, ``d2height`` callables) or
    sampled on a grid (``samples`` with ``grid_n`` nodes, differentiated by
    centered differences with even reflection at the poles).
    """

    base: MetricProfile
    height: Optional[Callable] = None
    dheight: Optional[Callable] = None
    d2height: Optional[Callable] = None
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    grid_n: Optional[int] = None

    def __post_init__(self):
        if self.samples is None:
            if self.height is None or self.dheight is None or self.d2height is None:
                raise DomainError("analytic graph needs f, f' and f''")
            ends = np.asarray(self.dheight(np.array([0.0, np.pi])), dtype=float)
            if not np.all(np.isfinite(ends)):
                raise DomainError("graph derivative is not finite at the poles")
            if np.any(np.abs(ends) > self.base.pole_tol):
                raise DomainError(
                    f"graph is not axisymmetric-regular: f'(0), f'(pi) = {ends}"
                )
        else:
            arr = np.asarray(self.samples)
            if arr.ndim != 1 or arr.size != self.grid_n:
                raise DomainError("sampled graph must be a 1-D array on its grid")
            if not np.all(np.isfinite(arr)):
                raise DomainError("sampled graph has non-finite heights")

    # constructors --------------------------------------------------------
    @classmethod
    def from_function(cls, base, f, df, d2f):
        return cls(base, f, df, d2f)

    @classmethod
    def constant(cls, base, value=0.0):
        return cls(
            base,
            lambda t: np.full_like(np.asarray(t, dtype=float), value),
            lambda t: np.zeros_like(np.asarray(t, dtype=float)),
            lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        )

    @classmethod
    def cosine_series(cls, base, coeffs):
        """``f = sum_k c_k cos(k theta)``, k = 0, 1, ..."""
        c = np.asarray(coeffs, dtype=float)
        k = np.arange(c.size)

        def f(t):
            return np.cos(np.multiply.outer(t, k)) @ c

        def df(t):
            return -np.sin(np.multiply.outer(t, k)) @ (k * c)

        def d2f(t):
            return -np.cos(np.multiply.outer(t, k)) @ (k**2 * c)

        return cls(base, f, df, d2f)

    @classmethod
    def cos_powers(cls, base, coeffs):
        """``f = sum_k c_k cos(theta)^k``."""
        p = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
        dp, d2p = p.deriv(), p.deriv(2)

        def f(t):
            return p(np.cos(t))

        def df(t):
            return -np.sin(t) * dp(np.cos(t))

        def d2f(t):
            s, c = np.sin(t), np.cos(t)
            return s**2 * d2p(c) - c * dp(c)

        return cls(base, f, df, d2f)

    @classmethod
    def from_samples(cls, base, grid, values):
        return cls(base, samples=np.asarray(values), grid_n=grid.n)

    @property
    def is_analytic(self):
        return self.samples is None

    def evaluate(self, grid):
        """Return ``(f, f', f'')`` at the grid nodes."""
        if self.samples is None:
            t = grid.nodes
            return (np.asarray(self.height(t)), np.asarray(self.dheight(t)),
                    np.asarray(self.d2height(t)))
        if grid.n != self.grid_n:
            raise DomainError(
                f"mismatched grids: surface sampled on n={self.grid_n}, "
                f"requested n={grid.n}"
            )
        d1, d2 = grid_derivatives(self.samples, grid.spacing, parity=1)
        return self.samples, d1, d2

    def evaluate_at(self, theta):
        if self.samples is not None:
            raise DomainError("pointwise evaluation needs an analytic graph")
        return self.height(theta), self.dheight(theta), self.d2height(theta)


# ---------------------------------------------------------------------------
# operations


def _check_n(grid, minimum=8):
    if grid.n < minimum:
        raise DomainError(f"grid resolution n={grid.n} below minimum {minimum}")


def gaussian_curvature(m, grid):
    """Gaussian curvature ``-rho''/rho`` at the grid nodes."""
    kappa = np.asarray(m.curvature(grid.nodes), dtype=float)
    bad = np.flatnonzero(~np.isfinite(kappa))
    if bad.size:
        j = int(bad[0])
        raise NumericalError(
            f"non-finite curvature at node {j} (theta={grid.nodes[j]:.6g}); "
            "use an analytic preset or a finer table"
        )
    return kappa


def area(m, grid):
    """Area ``2 pi int sigma rho dtheta`` of the profile's sphere."""
    _check_n(grid)
    return 2.0 * np.pi * grid.integrate(m.sigma * m.rho(grid.nodes))


def gauss_bonnet_defect(m, grid):
    """``int kappa dA - 4 pi``; zero for a smooth sphere."""
    kappa = gaussian_curvature(m, grid)
    density = m.sigma * m.rho(grid.nodes)
    return 2.0 * np.pi * grid.integrate(kappa * density) - 4.0 * np.pi


def graph_area_element(s, grid):
    """Area density of the graph per unit ``dtheta dphi``.

    In ``dt^2 + g_Sigma`` this is ``sqrt(sigma^2 + f'^2) rho``, i.e.
    ``sqrt(1 + |df|^2)`` times the base density.
    """
    _, fp, _ = s.evaluate(grid)
    sig = s.base.sigma
    return np.sqrt(sig**2 + fp**2) * s.base.rho(grid.nodes)
