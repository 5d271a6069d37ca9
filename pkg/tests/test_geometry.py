import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from worldsheet.errors import HorizonViolation, PolarSingularity
from worldsheet.geometry import (MetricField, MetricKind, cartesian_to_spherical,
                                 christoffel_numeric_check, evaluate_metric,
                                 spherical_jacobian, spherical_to_cartesian)

CART = MetricField.schwarzschild(1.0)
SPH = MetricField.schwarzschild(1.0, spherical=True)

finite = st.floats(-1.0, 1.0, allow_nan=False)


def _cart_point(rng, n=1, r=(3.0, 12.0)):
    d = rng.normal(size=(n, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    x = np.zeros((n, 4))
    x[:, 0] = rng.uniform(-1, 1, n)
    x[:, 1:] = d * rng.uniform(*r, n)[:, None]
    return x


def test_cartesian_metric_is_pullback_of_spherical():
    rng = np.random.default_rng(0)
    x = _cart_point(rng, 200)
    y = cartesian_to_spherical(x)
    J = spherical_jacobian(x)
    gs = evaluate_metric(SPH, y).g
    pulled = np.einsum("nai,nab,nbj->nij", J, gs, J)
    assert np.allclose(evaluate_metric(CART, x).g, pulled, rtol=1e-12, atol=1e-12)


def test_schwarzschild_values_at_r4():
    mv = evaluate_metric(SPH, np.array([0.0, 4.0, np.pi / 2, 0.0]))
    assert np.allclose(np.diag(mv.g), [-0.5, 2.0, 16.0, 16.0])
    x = np.array([0.0, 4.0, 0.0, 0.0])
    g = evaluate_metric(CART, x).g
    assert np.isclose(g[0, 0], -0.5)
    assert np.isclose(g[1, 1], 2.0)  # radial direction
    assert np.isclose(g[2, 2], 1.0) and np.isclose(g[3, 3], 1.0)


@pytest.mark.parametrize("field", [CART, SPH, MetricField.minkowski(2)])
def test_inverse_metric(field):
    rng = np.random.default_rng(1)
    if field.kind is MetricKind.SCHWARZSCHILD_SPHERICAL:
        x = np.column_stack([rng.uniform(-1, 1, 50), rng.uniform(3, 12, 50),
                             rng.uniform(0.3, 2.8, 50), rng.uniform(-3, 3, 50)])
    elif field.kind is MetricKind.MINKOWSKI:
        x = rng.uniform(-5, 5, (50, field.dim))
    else:
        x = _cart_point(rng, 50)
    mv = evaluate_metric(field, x)
    eye = np.broadcast_to(np.eye(field.dim), mv.g.shape)
    assert np.allclose(mv.g @ mv.ginv, eye, atol=1e-12)


@pytest.mark.parametrize("field", [CART, SPH])
def test_christoffel_matches_metric_derivatives(field):
    rng = np.random.default_rng(2)
    if field is SPH:
        x = np.column_stack([rng.uniform(-1, 1, 30), rng.uniform(3, 12, 30),
                             rng.uniform(0.3, 2.8, 30), rng.uniform(-3, 3, 30)])
    else:
        x = _cart_point(rng, 30)
    assert christoffel_numeric_check(field, x, 1e-5) < 1e-8


def test_christoffel_symmetric_lower_indices():
    x = _cart_point(np.random.default_rng(3), 20)
    gam = evaluate_metric(CART, x).christoffel
    assert np.allclose(gam, np.swapaxes(gam, -1, -2))


def test_minkowski_flat_and_product():
    f = MetricField.minkowski(extra_flat_dims=2)
    mv = evaluate_metric(f, np.zeros(6))
    assert np.allclose(mv.g, np.diag([-1, 1, 1, 1, 1, 1]))
    assert np.all(mv.christoffel == 0)


def test_extra_flat_dims_keep_schwarzschild_block():
    f = MetricField.schwarzschild(1.0, extra_flat_dims=1)
    x = np.array([0.0, 5.0, 1.0, 0.0, 3.0])
    mv = evaluate_metric(f, x)
    base = evaluate_metric(CART, x[:4])
    assert np.allclose(mv.g[:4, :4], base.g)
    assert mv.g[4, 4] == 1.0
    assert np.allclose(mv.christoffel[:4, :4, :4], base.christoffel)
    assert np.all(mv.christoffel[4] == 0)


def test_horizon_and_polar_guards():
    with pytest.raises(HorizonViolation):
        evaluate_metric(CART, np.array([0.0, 1.5, 0.0, 0.0]))
    with pytest.raises(HorizonViolation):
        evaluate_metric(SPH, np.array([0.0, 2.0, 1.0, 0.0]))
    with pytest.raises(PolarSingularity):
        evaluate_metric(SPH, np.array([0.0, 5.0, 1e-5, 0.0]))


def test_metric_field_validation():
    with pytest.raises(ValueError):
        MetricField(MetricKind.MINKOWSKI, 1.0)
    with pytest.raises(ValueError):
        MetricField(MetricKind.SCHWARZSCHILD_CARTESIAN, 0.0)
    with pytest.raises(ValueError):
        MetricField(MetricKind.SCHWARZSCHILD_CARTESIAN, -1.0)
    with pytest.raises(ValueError):
        evaluate_metric(CART, np.zeros(3))


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite, finite)
def test_coordinate_round_trip(t, a, b, c):
    x = np.array([t, 3 + 5 * a, 4 * b, 4 * c])
    if np.linalg.norm(x[1:3]) < 1e-3:
        return
    assert np.allclose(spherical_to_cartesian(cartesian_to_spherical(x)), x, atol=1e-12)


def test_jacobian_matches_differences():
    x = _cart_point(np.random.default_rng(4), 10)
    J = spherical_jacobian(x)
    h = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fd = (cartesian_to_spherical(x + e) - cartesian_to_spherical(x - e)) / (2 * h)
        assert np.allclose(J[..., j], fd, atol=1e-8)
