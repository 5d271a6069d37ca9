import numpy as np
import pytest

from worldsheet.data import straight_string
from worldsheet.errors import NotTimelike, PolarSingularity
from worldsheet.geometry import MetricField, evaluate_metric
from worldsheet.solvers import CartesianChart, chart_speeds
from worldsheet.spherical import (SphericalChart, assemble_spherical, cross_chart_study,
                                  delta_expanded, extremal_residual_spherical, from_riemann,
                                  induced_metric_spherical, random_spherical_states,
                                  riemann_sources, spherical_eigenstructure,
                                  spherical_linear_degeneracy_residual, to_riemann,
                                  to_spherical_data)

M = 1.0
SPH = MetricField.schwarzschild(M, spherical=True)


@pytest.fixture(scope="module")
def states():
    return random_spherical_states(np.random.default_rng(0), M, 500)


def test_equatorial_example_determinant():
    U = np.zeros(10)
    U[0], U[1] = 4.0, np.pi / 2
    U[2] = 1.0  # t_tau
    U[8] = 1.0  # alpha_theta
    g = induced_metric_spherical(U, M)
    assert np.isclose(g.g00, -0.5) and np.isclose(g.g11, 16.0) and g.g01 == 0
    assert np.isclose(g.delta, -8.0)
    assert np.isclose(delta_expanded(U, M), -8.0)


def test_expanded_determinant(states):
    d = induced_metric_spherical(states, M).delta
    assert np.allclose(delta_expanded(states, M), d, rtol=1e-10, atol=1e-12)


def test_eigenstructure(states):
    A, _ = assemble_spherical(states, M)
    lm, lp, R, L = spherical_eigenstructure(states, M)
    lam = np.concatenate([np.repeat(lm[:, None], 4, 1), np.repeat(lp[:, None], 4, 1),
                          np.zeros((len(states), 2))], axis=1)
    AR = np.einsum("nij,nkj->nki", A, R)
    assert np.allclose(AR, lam[..., None] * R, atol=1e-10)
    LA = np.einsum("nki,nij->nkj", L, A)
    assert np.allclose(LA, lam[..., None] * L, atol=1e-10)
    LR = np.einsum("nij,nkj->nik", L, R)
    off = LR - np.einsum("nii->ni", LR)[..., None] * np.eye(10)
    assert np.abs(off).max() < 1e-12


def test_riemann_round_trip(states):
    lm, lp, _, _ = spherical_eigenstructure(states, M)
    R = to_riemann(states, lm, lp)
    assert np.allclose(from_riemann(R, lm, lp), states, atol=1e-12)


def test_riemann_sources_match_assembled_and_christoffel(states):
    lm, lp, _, _ = spherical_eigenstructure(states, M)
    _, B = assemble_spherical(states, M)
    R = to_riemann(states, lm, lp)
    S = riemann_sources(R, lm, lp, M)
    assert np.allclose(S, B[:, :6], rtol=1e-10, atol=1e-12)
    P, Q = R[:, 2:6], R[:, 6:10]
    pos = np.column_stack([np.zeros(len(states)), states[:, 0], states[:, 1],
                           np.zeros(len(states))])
    gam = evaluate_metric(SPH, pos).christoffel
    direct = np.einsum("ncab,na,nb->nc", gam, P, Q)
    assert np.allclose(S[:, 2:], direct, rtol=1e-10, atol=1e-12)
    assert np.allclose(S[:, 0], -states[:, 3]) and np.allclose(S[:, 1], -states[:, 4])


def test_first_order_system_matches_second_order(states):
    rng = np.random.default_rng(1)
    n = len(states)
    res = extremal_residual_spherical(states, rng.normal(size=(n, 4)),
                                      rng.normal(size=(n, 4)), rng.normal(size=(n, 4)), M)
    assert res.max() < 1e-9


def test_linear_degeneracy(states):
    assert spherical_linear_degeneracy_residual(states, M).max() < 1e-7


def test_guards():
    U = np.zeros(10)
    U[0], U[1], U[2], U[8] = 4.0, 1e-4, 1.0, 1.0
    with pytest.raises(PolarSingularity):
        induced_metric_spherical(U, M)
    U[1] = 1.0
    U[8] = 0.0
    U[3] = 2.0  # r_tau large: space-like sheet
    with pytest.raises(NotTimelike):
        assemble_spherical(U, M)


def test_spherical_data_describe_the_same_sheet():
    data = straight_string(10.0, window=(-20.0, 20.0))
    sph = to_spherical_data(data)
    th = np.linspace(-20, 20, 41)
    chart = SphericalChart(M)
    u = sph.evaluate(th)[0]
    assert np.allclose(chart.to_cartesian(u), data.evaluate(th)[0], atol=1e-12)
    lm_c, lp_c = chart_speeds(CartesianChart(M), data.state(th))
    lm_s, lp_s = chart_speeds(chart, sph.state(th))
    assert np.allclose(lm_c, lm_s, rtol=1e-12) and np.allclose(lp_c, lp_s, rtol=1e-12)
    assert np.allclose(chart.horizon_gap(u), np.hypot(10.0, th) - 2.0)
    with pytest.raises(ValueError):
        to_spherical_data(straight_string(-10.0, window=(-20.0, 20.0)))


def test_short_cross_chart_run_agrees():
    from worldsheet.suites import cross_chart_data
    out = cross_chart_study(cross_chart_data(), M, 4.0, nodes=801, region=(-10.0, 10.0))
    assert out["deviation"] < 1e-3
    assert out["passed"]
