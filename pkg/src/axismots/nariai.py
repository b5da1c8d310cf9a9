"""Horizon cross-section of the rotating Nariai slice.

With ``ell^2 = 3 / Lambda`` and rotation ``a``, the coalesced horizon radius
satisfies ``3 x^2 - (ell^2 - a^2) x + a^2 ell^2 = 0`` for ``x = r_c^2``; the
sphere has area element ``(r_c^2 + a^2)/(1 + a^2/ell^2) sin(theta)`` and the
azimuthal part of ``X`` has

    |X^{d_phi}|^2 = a^2 sin^2 / (r_c^2 + a^2 cos^2)^3 * (r_c^2 + a^2 r_c^2 cos^2 / ell^2).

Everything is reported in units where lengths scale with ``ell``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, asdict

import numpy as np

from .errors import DomainError, NumericalError
from .geomcore import gauss_legendre

__all__ = [
    "NariaiParams",
    "NariaiReport",
    "a_max",
    "rc_squared",
    "area_sigma",
    "x_phi_norm2",
    "omega_nariai",
    "omega_definitional",
    "nariai_point",
    "eps_expansion",
    "sweep",
    "loglog_slope",
]

ROUTE_TOL = 1e-10


def a_max(ell=1.0):
    """Largest rotation with a real double root: ``(2 - sqrt 3) ell``.

    ``eps^2 = 7 - 4 sqrt 3`` is the smaller root of ``eps^4 - 14 eps^2 + 1``.
    """
    return (2.0 - np.sqrt(3.0)) * ell


def _discriminant(a, ell):
    return (ell**2 - a**2) ** 2 - 12.0 * a**2 * ell**2


@dataclass(frozen=True)
class NariaiParams:
    a: float
    ell: float = 1.0

    def __post_init__(self):
        if not self.ell > 0:
            raise DomainError(f"ell must be positive, got {self.ell}")
        if not self.a >= 0:
            raise DomainError(f"rotation a must be non-negative, got {self.a}")
        if self.a >= a_max(self.ell):
            raise DomainError(
                f"a = {self.a:.6g} >= a_max = {a_max(self.ell):.6f} ell: the "
                f"discriminant (ell^2 - a^2)^2 - 12 a^2 ell^2 = "
                f"{_discriminant(self.a, self.ell):.3e} has no positive double root"
            )

    @property
    def eps(self):
        return self.a / self.ell

    @property
    def Lambda(self):
        return 3.0 / self.ell**2

    @property
    def rc2(self):
        return rc_squared(self)


def rc_squared(p):
    """Double-root radius squared, ``(ell^2 - a^2 + sqrt(disc)) / 6``."""
    disc = _discriminant(p.a, p.ell)
    if disc < 0:
        raise DomainError(f"negative discriminant {disc:.3e}: a >= a_max")
    return (p.ell**2 - p.a**2 + np.sqrt(disc)) / 6.0


def area_sigma(p):
    """``4 pi (r_c^2 + a^2) / (1 + Lambda a^2 / 3)``."""
    return 4.0 * np.pi * (rc_squared(p) + p.a**2) / (1.0 + p.a**2 / p.ell**2)


def x_phi_norm2(p, theta):
    """``|X^{d_phi}|^2`` on the horizon sphere."""
    rc2 = rc_squared(p)
    c2 = np.cos(theta) ** 2
    return (p.a**2 * np.sin(theta) ** 2 / (rc2 + p.a**2 * c2) ** 3
            * (rc2 + p.a**2 * rc2 * c2 / p.ell**2))


def omega_definitional(p, quad_n=512):
    """``(1/|Sigma|) int |X^{d_phi}|^2 dA`` with the explicit area element."""
    th, w = gauss_legendre(quad_n)
    dens = (rc_squared(p) + p.a**2) / (1.0 + p.a**2 / p.ell**2) * np.sin(th)
    total = 2.0 * np.pi * np.dot(w, x_phi_norm2(p, th) * dens)
    return total / (2.0 * np.pi * np.dot(w, dens))


def omega_nariai(p, quad_n=512, check=True):
    """``omega`` from the reduced one-dimensional integral.

    With ``check`` the definitional route is evaluated as well and the two
    must agree to ``1e-10`` relative.
    """
    if quad_n < 32:
        raise DomainError(f"quad_n must be at least 32, got {quad_n}")
    rc2 = rc_squared(p)
    th, w = gauss_legendre(quad_n)
    c2 = np.cos(th) ** 2
    integrand = (1.0 + p.a**2 / p.ell**2 * c2) * np.sin(th) ** 3 / (1.0 + p.a**2 / rc2 * c2) ** 3
    omega = p.a**2 / (2.0 * rc2**2) * np.dot(w, integrand)
    if check:
        other = omega_definitional(p, quad_n)
        scale = max(abs(omega), abs(other))
        if scale > 0 and abs(omega - other) > ROUTE_TOL * scale:
            raise NumericalError(
                f"omega routes disagree: {omega!r} vs {other!r}"
            )
    return float(omega)


@dataclass(frozen=True)
class NariaiReport:
    a_over_ell: float
    ell: float
    rc2: float
    area: float
    omega: float
    bound: float
    gap: float
    omega_definitional: float
    refinement_delta: float

    @property
    def gap_over_eps4(self):
        return self.gap / self.a_over_ell**4 if self.a_over_ell > 0 else None

    def as_dict(self):
        return asdict(self)

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2)


def nariai_point(p, quad_n=512):
    """Area, ``omega``, bound ``4 pi/(Lambda + omega)`` and gap at one ``a``."""
    omega = omega_nariai(p, quad_n)
    fine = omega_nariai(p, 2 * quad_n, check=False)
    area = area_sigma(p)
    bound = 4.0 * np.pi / (p.Lambda + omega)
    return NariaiReport(float(p.eps), float(p.ell), float(rc_squared(p)),
                        float(area), omega, float(bound), float(bound - area),
                        float(omega_definitional(p, quad_n)), float(abs(fine - omega)))


def eps_expansion(p, quad_n=512):
    """Exact values next to their ``eps^2`` truncations.

    Returns a dict of ``(exact, truncated)`` pairs plus the extracted
    ``eps^4`` coefficient of ``r_c^2 / (ell^2 / 3)`` and an ``in_window``
    flag (``eps <= 0.15``).
    """
    e2 = p.eps**2
    rc2 = rc_squared(p)
    omega = omega_nariai(p, quad_n)
    two_terms = 4.0 * np.pi * rc2 * (1.0 + 2.0 * e2)
    out = {
        "eps": p.eps,
        "in_window": p.eps <= 0.15,
        "rc2": (rc2, p.ell**2 / 3.0 * (1.0 - 4.0 * e2)),
        "a2_over_rc2": (p.a**2 / rc2, 3.0 * e2),
        "omega": (omega, 2.0 / 3.0 * p.a**2 / rc2**2 * (1.0 - 1.6 * e2)),
        "area": (area_sigma(p), two_terms),
        "bound": (4.0 * np.pi / (p.Lambda + omega), two_terms),
    }
    out["rc2_eps4_coefficient"] = (
        (rc2 / (p.ell**2 / 3.0) - 1.0 + 4.0 * e2) / e2**2 if p.eps > 0 else None
    )
    return out


@dataclass(frozen=True)
class SweepTable:
    rows: list

    CSV_HEADER = ("a_over_ell", "rc2", "area", "omega", "bound", "gap")

    def column(self, name):
        if name == "gap_over_eps4":
            return np.array([np.nan if r.gap_over_eps4 is None else r.gap_over_eps4
                             for r in self.rows])
        return np.array([getattr(r, name) for r in self.rows])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for r in self.rows:
            w.writerow([f"{getattr(r, k):.12g}" for k in self.CSV_HEADER])
        return buf.getvalue()


def sweep(a_values, ell=1.0, quad_n=512):
    """Reports for each ``a`` (sorted); the gap must be positive for ``a > 0``."""
    rows = []
    for a in sorted(a_values):
        rep = nariai_point(NariaiParams(float(a), ell), quad_n)
        if a > 0 and not rep.gap > 0:
            raise NumericalError(f"non-positive gap {rep.gap:.3e} at a = {a}")
        rows.append(rep)
    return SweepTable(rows)


def loglog_slope(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x)), np.log(np.asarray(y)), 1)[0])
