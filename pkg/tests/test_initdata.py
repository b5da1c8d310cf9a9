import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from axismots.errors import DomainError
from axismots.geomcore import GraphSurface, ThetaGrid, preset
from axismots.initdata import (ProductData, TimePolynomial, TrigTerms, Warp,
                               graph_fields, beta_deformation_check, minimize_omega,
                               omega_of_surface, surface_quantities)

from _oracle import build, th as TH, t as T

GRID = ThetaGrid(256)
ROUND = preset("round")


def beta_data(b, metric=ROUND):
    return ProductData(metric, beta=TrigTerms([(b, 2, 0)]))


# ---------------------------------------------------------------------------
# symbolic oracle on warped data


@pytest.fixture(scope="module")
def warped_case():
    eps, h = 0.1, 1.3
    metric = preset("sin3", eps=eps, scale=h)
    d = ProductData(metric, TimePolynomial([0.3, 0.2]),
                    TrigTerms([(0.4, 2, 1), (0.2, 2, 0)]),
                    Warp([(0.2, 2, 1), (0.1, 1, 2), (0.05, 3, 0)]))
    s = GraphSurface.cos_powers(metric, [0.1, 0.2, 0.1])
    w = 0.2 * T**2 * sp.cos(TH) + 0.1 * T * sp.cos(TH) ** 2 + 0.05 * T**3
    oracle = build(sp.Rational(13, 10), sp.sin(TH) + sp.Rational(1, 10) * sp.sin(TH) ** 3,
                   w, sp.Rational(3, 10) + sp.Rational(1, 5) * T,
                   sp.Rational(2, 5) * sp.sin(TH) ** 2 * sp.cos(TH) + sp.Rational(1, 5) * sp.sin(TH) ** 2,
                   sp.Rational(1, 10) + sp.Rational(1, 5) * sp.cos(TH) + sp.Rational(1, 10) * sp.cos(TH) ** 2)
    return d, s, oracle


@pytest.mark.parametrize("name", ["R", "mu", "J_nu", "H", "kappa", "tr_sigma_K", "X_eta_norm2"])
def test_fields_match_symbolic_oracle(warped_case, name):
    d, s, oracle = warped_case
    theta = np.linspace(0.05, np.pi - 0.05, 37)
    f, fp, fpp = s.evaluate_at(theta)
    got = graph_fields(d, theta, f, fp, fpp)[name]
    want = oracle[name](theta)
    scale = max(1.0, np.max(np.abs(want)))
    assert np.max(np.abs(got - want)) <= 1e-10 * scale


def test_product_slice_scalar_curvature_is_twice_gauss():
    m = preset("sin3", eps=0.2)
    d = ProductData(m, TimePolynomial([0.4]), TrigTerms([(0.3, 2, 0)]))
    z = np.zeros(GRID.n)
    gf = graph_fields(d, GRID.nodes, z, z, z)
    assert np.allclose(gf["R"], 2 * m.curvature(GRID.nodes), rtol=0, atol=1e-12)
    # mu = (R - |K|^2 + tau^2)/2 with |K|^2 = alpha^2 + 2 beta^2/rho^2
    beta = d.beta(GRID.nodes)
    mu = 0.5 * (gf["R"] - (0.16 + 2 * beta**2 / m.rho(GRID.nodes) ** 2) + 0.16)
    assert np.allclose(gf["mu"], mu, rtol=0, atol=1e-10)


# ---------------------------------------------------------------------------
# surface quantities


def test_slice_of_product_data_is_mots_and_mits():
    d = ProductData(preset("sin3", eps=0.1), TimePolynomial([0.5, 1.0]),
                    TrigTerms([(0.7, 2, 1)]))
    q = surface_quantities(d, GraphSurface.constant(d.metric), GRID)
    for arr in (q.H, q.tr_sigma_K, q.theta_plus, q.theta_minus):
        assert np.max(np.abs(arr)) == 0.0
    rho = d.metric.rho(GRID.nodes)
    assert np.allclose(q.X_eta_norm2, d.beta(GRID.nodes) ** 2 / rho**2, rtol=1e-13, atol=0)


def test_x_eta_on_tilted_graph_closed_form():
    b, delta = 0.7, 0.4
    s = GraphSurface.cosine_series(ROUND, [0.0, delta])
    q = surface_quantities(beta_data(b), s, GRID)
    th = GRID.nodes
    want = b**2 * np.sin(th) ** 2 / (1 + delta**2 * np.sin(th) ** 2)
    assert np.max(np.abs(q.X_eta_norm2 - want)) <= 1e-12


def test_expansion_identities_and_projection_bound():
    d = ProductData(preset("sin3", eps=0.1), TimePolynomial([0.2, 0.3]),
                    TrigTerms([(0.5, 2, 0)]), Warp([(0.2, 2, 1)]))
    s = GraphSurface.cos_powers(d.metric, [0.05, 0.3, -0.1])
    q = surface_quantities(d, s, GRID)
    assert np.allclose(q.theta_plus, q.tr_sigma_K + q.H, rtol=0, atol=1e-12)
    assert np.allclose(q.theta_minus, q.tr_sigma_K - q.H, rtol=0, atol=1e-12)
    assert np.allclose(q.theta_plus * q.theta_minus, q.tr_sigma_K**2 - q.H**2,
                       rtol=0, atol=1e-12)
    assert np.all(q.X_eta_norm2 >= 0)
    assert np.all(q.X_eta_norm2 <= q.X_norm2 + 1e-15)
    assert np.allclose(q.X_eta_norm2, q.rho**2 * q.X_phi**2, rtol=1e-13, atol=0)


def test_mismatched_grid_rejected():
    s = GraphSurface.from_samples(ROUND, ThetaGrid(32), np.zeros(32))
    with pytest.raises(DomainError, match="mismatched grids"):
        surface_quantities(ProductData(ROUND), s, ThetaGrid(64))


def test_mismatched_base_rejected():
    s = GraphSurface.constant(preset("sin3", eps=0.1))
    with pytest.raises(DomainError):
        surface_quantities(ProductData(ROUND), s, GRID)


def test_beta_must_vanish_at_poles():
    with pytest.raises(DomainError):
        ProductData(ROUND, beta=TrigTerms([(0.3, 0, 1)]))


def test_csv_export_has_theta_and_fields():
    q = surface_quantities(beta_data(0.2), GraphSurface.constant(ROUND), ThetaGrid(16))
    lines = q.to_csv().splitlines()
    header = lines[0].split(",")
    assert header[0] == "theta" and "X_eta_norm2" in header
    assert len(lines) == 17


# ---------------------------------------------------------------------------
# omega and Komar


def test_omega_zero_without_beta():
    rep = omega_of_surface(surface_quantities(ProductData(ROUND), GraphSurface.constant(ROUND),
                                              GRID), GRID, 2.0)
    assert rep.omega == 0.0 and rep.komar == 0.0
    assert rep.bound == pytest.approx(2 * np.pi, rel=1e-15)


def test_omega_and_komar_closed_forms():
    b = 0.3
    grid = ThetaGrid(4096)
    q = surface_quantities(beta_data(b), GraphSurface.constant(ROUND), grid)
    rep = omega_of_surface(q, grid, 1.0)
    assert rep.omega == pytest.approx(2 / 3 * b**2, rel=1e-12)
    assert rep.komar == pytest.approx(8 * np.pi / 3 * b, rel=1e-12)


def test_printed_integral_four_fifteenths():
    th = GRID.nodes
    assert GRID.integrate(np.cos(th) ** 2 * np.sin(th) ** 3) == pytest.approx(4 / 15, abs=1e-12)


def test_nonpositive_c_rejected():
    q = surface_quantities(ProductData(ROUND), GraphSurface.constant(ROUND), GRID)
    for c in (0.0, -1.0):
        with pytest.raises(DomainError):
            omega_of_surface(q, GRID, c)


@settings(max_examples=25, deadline=None)
@given(shift=st.floats(-2, 2), delta=st.floats(-0.8, 0.8), b=st.floats(0.05, 1.0))
def test_omega_invariant_under_vertical_shift(shift, delta, b):
    grid = ThetaGrid(64)
    d = beta_data(b)
    s0 = GraphSurface.cosine_series(ROUND, [0.0, delta])
    s1 = GraphSurface.cosine_series(ROUND, [shift, delta])
    o0 = omega_of_surface(surface_quantities(d, s0, grid), grid, 1.0).omega
    o1 = omega_of_surface(surface_quantities(d, s1, grid), grid, 1.0).omega
    assert abs(o0 - o1) <= 1e-12 * max(1.0, o0)


@settings(max_examples=25, deadline=None)
@given(a=st.floats(-2, 2), b=st.floats(-2, 2), delta=st.floats(-0.5, 0.5))
def test_komar_linear_in_beta(a, b, delta):
    grid = ThetaGrid(64)
    s = GraphSurface.cosine_series(ROUND, [0.0, delta])
    b1, b2 = TrigTerms([(1.0, 2, 0)]), TrigTerms([(1.0, 2, 1), (0.5, 4, 0)])
    both = TrigTerms(b1.scaled(a).terms + b2.scaled(b).terms)

    def komar(beta):
        return omega_of_surface(surface_quantities(ProductData(ROUND, beta=beta), s, grid),
                                grid, 1.0).komar

    assert abs(komar(both) - a * komar(b1) - b * komar(b2)) <= 1e-12 * max(1, abs(a) + abs(b))


def test_nonzero_komar_forces_positive_omega():
    q = surface_quantities(ProductData(ROUND, beta=TrigTerms([(0.2, 2, 0)])),
                           GraphSurface.constant(ROUND), GRID)
    rep = omega_of_surface(q, GRID, 1.0)
    assert rep.komar != 0 and rep.omega > 0


# ---------------------------------------------------------------------------
# graph deformations


def test_beta_deformation_zero_beta():
    family = [GraphSurface.cosine_series(ROUND, [0.0, d]) for d in (0.2, 0.9)]
    rep = beta_deformation_check(ProductData(ROUND), family, GRID)
    assert rep.ok and rep.beta_vanishes
    assert all(r.omega == 0.0 for r in rep.rows)


def test_beta_deformation_constant_graph_keeps_omega():
    rep = beta_deformation_check(beta_data(0.4), [GraphSurface.constant(ROUND, 0.7)], GRID)
    assert rep.ok
    assert rep.rows[0].omega == pytest.approx(rep.base_omega, rel=1e-13)


def test_beta_deformation_strict_gap():
    b = 0.5
    rep = beta_deformation_check(beta_data(b), [GraphSurface.cosine_series(ROUND, [0.0, 0.5])], GRID)
    assert rep.ok
    assert rep.base_omega - rep.rows[0].omega >= 1e-3 * b**2
    assert rep.rows[0].x_eta_integral < rep.base_integral


def test_beta_deformation_needs_product_data():
    d = ProductData(ROUND, warp=Warp([(0.1, 1, 0)]))
    with pytest.raises(DomainError):
        beta_deformation_check(d, [], GRID)


def test_minimize_omega_leaves_slice():
    b = 0.4
    grid = ThetaGrid(64)
    res = minimize_omega(beta_data(b), grid, 4)
    assert res.omega_slice == pytest.approx(2 / 3 * b**2, rel=1e-12)
    assert res.omega < res.omega_slice - 1e-3 * b**2
    # a coarse sweep of the first coefficient is already below the slice
    sweep = [omega_of_surface(surface_quantities(beta_data(b),
                                                 GraphSurface.cosine_series(ROUND, [0, c1]), grid),
                              grid, 1.0).omega for c1 in np.linspace(0, 1, 6)]
    assert np.all(np.diff(sweep) < 0)
    assert res.omega <= sweep[-1] + 1e-12


def test_minimize_omega_zero_beta():
    res = minimize_omega(ProductData(ROUND), ThetaGrid(32), 2)
    assert res.omega == 0.0 and res.omega_slice == 0.0


def test_minimize_omega_basis_bound():
    with pytest.raises(DomainError):
        minimize_omega(beta_data(0.3), ThetaGrid(16), 5)
