import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from worldsheet.dynamics import (InducedMetric2, assemble_A_B, characteristic_rhs,
                                 christoffel_source, delta_from_characteristic,
                                 directional_derivative_fd, eigenvalues, eigenvectors,
                                 from_characteristic_state, induced_metric_cartesian,
                                 join_state, lambda_gradient, linear_degeneracy_residual,
                                 metric_form, random_admissible_states,
                                 riemann_invariant_residual, second_order_residual,
                                 source_vector, split_state, spq_rhs, state_eigenvalues,
                                 to_characteristic_state, transport_matrix)
from worldsheet.errors import (CoincidentCharacteristics, DegenerateG11, HorizonViolation,
                               NotTimelike)
from worldsheet.geometry import MetricField, evaluate_metric

M = 1.0
CART = MetricField.schwarzschild(M)


@pytest.fixture(scope="module")
def states():
    return random_admissible_states(np.random.default_rng(0), M, 500)


def test_metric_form_matches_metric_tensor(states):
    u, v, w = split_state(states)
    g = evaluate_metric(CART, u).g
    assert np.allclose(metric_form(u, v, w, M), np.einsum("na,nab,nb->n", v, g, w))


def test_speeds_are_ordered_null_roots(states):
    u, v, w = split_state(states)
    g = induced_metric_cartesian(states, M)
    lm, lp = eigenvalues(g)
    assert np.all(lm < lp)
    for lam in (lm, lp):
        N = v + lam[:, None] * w
        assert np.allclose(metric_form(u, N, N, M), 0, atol=1e-9 * (1 + np.abs(g.g11 * lam**2)))


def test_eigenvalues_are_ordered_by_value_for_negative_g11():
    g = InducedMetric2(np.array(1.0), np.array(0.0), np.array(-4.0))
    lm, lp = eigenvalues(g)
    assert lm < lp and np.isclose(lm, -0.5) and np.isclose(lp, 0.5)


def test_principal_matrix_and_eigenvectors(states):
    A, _ = assemble_A_B(states, M)
    g = induced_metric_cartesian(states, M)
    es = eigenvectors(g)
    assert np.allclose(A, transport_matrix(es.lambda_minus, es.lambda_plus), atol=1e-10)
    lam = np.concatenate([np.zeros((len(states), 4)),
                          np.repeat(es.lambda_minus[:, None], 4, 1),
                          np.repeat(es.lambda_plus[:, None], 4, 1)], axis=1)
    # rows of ``right`` are right eigenvectors: A r = lam r
    Ar = np.einsum("nij,nkj->nki", A, es.right)
    assert np.allclose(Ar, lam[..., None] * es.right, atol=1e-9)
    LR = np.einsum("nij,nkj->nik", es.left, es.right)
    off = LR - np.einsum("nii->ni", LR)[..., None] * np.eye(12)
    assert np.abs(off).max() < 1e-10


def test_source_equals_christoffel_form(states):
    u, v, w = split_state(states)
    g = induced_metric_cartesian(states, M)
    lm, lp = eigenvalues(g)
    P = v + lm[:, None] * w
    Q = v + lp[:, None] * w
    gam = evaluate_metric(CART, u).christoffel
    direct = 0.5 * (np.einsum("ncab,na,nb->nc", gam, P, Q) + np.einsum("ncab,na,nb->nc", gam, Q, P))
    assert np.allclose(christoffel_source(P, Q, u, M), direct, rtol=1e-10, atol=1e-12)
    assert np.allclose(source_vector(u, v, w, g, M), direct, rtol=1e-8, atol=1e-10)


def test_first_order_system_reproduces_extremal_equation(states):
    rng = np.random.default_rng(1)
    u, v, w = split_state(states)
    gam = evaluate_metric(CART, u).christoffel
    x_tt, x_tth, x_thth = (rng.normal(size=u.shape) for _ in range(3))
    res = second_order_residual(u, v, w, x_tt, x_tth, x_thth, M, gam)
    assert res.max() < 1e-9


def test_characteristic_round_trip_and_delta(states):
    S, P, Q, lm, lp = to_characteristic_state(states, M)
    assert np.allclose(from_characteristic_state(S, P, Q, lm, lp), states, atol=1e-10)
    delta = induced_metric_cartesian(states, M).delta
    assert np.allclose(delta_from_characteristic(S, P, Q, lm, lp, M), delta, rtol=1e-8)
    gpq = metric_form(S, P, Q, M)
    assert np.allclose(delta, -gpq**2 / (lp - lm) ** 2, rtol=1e-8)


def test_spq_and_characteristic_rhs_share_sources(states):
    S, P, Q, lm, lp = to_characteristic_state(states, M)
    dS, dP, dQ = spq_rhs(S, P, Q, lm, lp, M)
    _, v, _ = split_state(states)
    assert np.allclose(dS, v, atol=1e-10)
    cS, cP, cQ = characteristic_rhs(S, P, Q, M)
    assert np.allclose(cS, 0.5 * (P + Q))
    assert np.allclose(cP, dP) and np.allclose(dP, dQ)
    with pytest.raises(CoincidentCharacteristics):
        spq_rhs(S, P, Q, lm, lm, M)


def test_lambda_gradient_matches_differences(states):
    U = states[:100]
    for which, idx in (("minus", 0), ("plus", 1)):
        grad = lambda_gradient(U, M, which)
        for k in range(12):
            e = np.zeros(12)
            e[k] = 1.0
            fd = directional_derivative_fd(lambda V: state_eigenvalues(V, M)[idx], U, e, 1e-6)
            assert np.allclose(grad[:, k], fd, rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("m", [0.0, 1.0])
def test_linear_degeneracy(m):
    U = random_admissible_states(np.random.default_rng(2), m, 1000)
    assert linear_degeneracy_residual(U, m).max() < 1e-7


def test_riemann_invariant_residual_constant_speeds():
    t = np.linspace(0, 1, 11)[:, None]
    th = np.linspace(-1, 1, 21)[None, :]
    lm = -1.0 + 0 * (t + th)
    lp = 2.0 + 0 * (t + th)
    a, b = riemann_invariant_residual(0.1, 0.1, lm, lp)
    assert a == 0 and b == 0


def test_error_paths():
    u = np.array([0.0, 10.0, 0.0, 0.0])
    with pytest.raises(DegenerateG11):
        eigenvalues(InducedMetric2(np.array(-1.0), np.array(0.5), np.array(0.0)))
    with pytest.raises(NotTimelike):
        eigenvalues(InducedMetric2(np.array(1.0), np.array(0.0), np.array(1.0)))
    with pytest.raises(HorizonViolation):
        induced_metric_cartesian(join_state(np.array([0, 1.5, 0, 0.0]), np.eye(4)[0], np.eye(4)[2]), M)
    with pytest.raises(NotTimelike):
        assemble_A_B(join_state(u, np.eye(4)[1], np.eye(4)[2]), M)


@settings(max_examples=100, deadline=None)
@given(st.floats(4.0, 20.0), st.floats(-0.6, 0.6), st.floats(-0.6, 0.6), st.floats(0.5, 2.0))
def test_speeds_bounded_by_light_cone_in_flat_gauge(r, vx, vy, stretch):
    # flat space: speeds of a sheet with unit time velocity are bounded by
    # |w|-scaled light-cone values
    u = np.array([0.0, r, 0.0, 0.0])
    v = np.array([1.0, vx, vy, 0.0])
    w = np.array([0.0, 0.0, 0.0, stretch])
    lm, lp = state_eigenvalues(join_state(u, v, w), 0.0)
    c = np.sqrt(1 - vx**2 - vy**2) / stretch
    assert np.isclose(lm, -c) and np.isclose(lp, c)
