import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from worldsheet.errors import NotTimelike
from worldsheet.extremal import (ImmersionJet, annihilation_check, compute_E,
                                 expected_spectrum, extremal_operator_fd,
                                 field_for_dimensions, framework_matrices, induced_metric,
                                 m_matrix_spectrum, manufactured_jets, random_timelike_jets,
                                 theorem21_residual)
from worldsheet.geometry import MetricField, MetricKind, evaluate_metric

KINDS = [MetricKind.SCHWARZSCHILD_CARTESIAN, MetricKind.SCHWARZSCHILD_SPHERICAL,
         MetricKind.MINKOWSKI]
DIMS = [(3, 1), (3, 2), (4, 1)]


def collapsing_loop_jet(t, s, R=2.0):
    """2-jet of the flat collapsing loop ``(t, R cos(t/R) cos s, R cos(t/R) sin s, 0)``."""
    c, sn = np.cos(t / R), np.sin(t / R)
    pos = np.array([t, R * c * np.cos(s), R * c * np.sin(s), 0.0])
    xt = np.array([1.0, -sn * np.cos(s), -sn * np.sin(s), 0.0])
    xs = np.array([0.0, -R * c * np.sin(s), R * c * np.cos(s), 0.0])
    xtt = np.array([0.0, -c / R * np.cos(s), -c / R * np.sin(s), 0.0])
    xts = np.array([0.0, sn * np.sin(s), -sn * np.cos(s), 0.0])
    xss = np.array([0.0, -R * c * np.cos(s), -R * c * np.sin(s), 0.0])
    second = np.stack([np.stack([xtt, xts], -1), np.stack([xts, xss], -1)], -1)
    return ImmersionJet(pos, np.stack([xt, xs], -1), second)


def test_expected_spectrum():
    assert list(expected_spectrum(3, 1)) == [0, 0, 1, 1]
    assert list(expected_spectrum(4, 1)) == [0, 0, 1, 1, 1]


def test_flat_plane_is_extremal():
    jet = ImmersionJet(np.zeros(4), np.eye(4)[:, :2], np.zeros((4, 2, 2)))
    f = MetricField.minkowski()
    mv = evaluate_metric(f, jet.position)
    ind = induced_metric(jet, mv)
    assert np.allclose(compute_E(jet, mv, ind), 0)
    assert theorem21_residual(jet, f) < 1e-12


def test_collapsing_loop_is_extremal():
    f = MetricField.minkowski()
    for t, s in [(0.3, 0.1), (1.0, 2.0), (2.5, -1.0)]:
        jet = collapsing_loop_jet(t, s)
        mv = evaluate_metric(f, jet.position)
        ind = induced_metric(jet, mv)
        E = compute_E(jet, mv, ind)
        assert np.allclose(E, 0, atol=1e-12)
        assert np.allclose(extremal_operator_fd(jet, f, 1e-4), 0, atol=1e-8)


def test_non_extremal_jet_detected():
    f = MetricField.minkowski()
    jet = collapsing_loop_jet(0.4, 0.2)
    bent = ImmersionJet(jet.position, jet.tangent, jet.second + 0.1)
    mv = evaluate_metric(f, bent.position)
    fm = framework_matrices(bent, mv, induced_metric(bent, mv))
    assert np.max(np.abs(fm.M @ fm.E)) > 1e-3


@pytest.mark.parametrize("kind", KINDS)
@pytest.mark.parametrize("n,p", DIMS)
def test_spectrum_and_rank(kind, n, p):
    rng = np.random.default_rng(10 + n + 3 * p)
    f = field_for_dimensions(kind, n)
    jets = random_timelike_jets(rng, f, p, 300)
    mv = evaluate_metric(f, jets.position)
    ind = induced_metric(jets, mv)
    rank, ev = m_matrix_spectrum(jets, mv, ind)
    assert np.all(rank == n - p)
    assert np.max(np.abs(ev - expected_spectrum(n, p))) < 1e-9


@pytest.mark.parametrize("kind", KINDS)
def test_m_is_projector_annihilating_tangents(kind):
    rng = np.random.default_rng(20)
    f = field_for_dimensions(kind, 3)
    jets = random_timelike_jets(rng, f, 1, 200)
    mv = evaluate_metric(f, jets.position)
    ind = induced_metric(jets, mv)
    M = framework_matrices(jets, mv, ind).M
    assert np.allclose(M @ M, M, atol=1e-9)
    a, b = annihilation_check(jets, mv, ind)
    assert a.max() < 1e-10 and b.max() < 1e-10


@pytest.mark.parametrize("kind", KINDS[:2])
def test_identity_residual_second_order(kind):
    rng = np.random.default_rng(30)
    f = field_for_dimensions(kind, 3)
    jets = manufactured_jets(rng, f, 1, 100)
    r = [theorem21_residual(jets, f, h).max() for h in (4e-4, 2e-4, 1e-4)]
    assert r[2] < 1e-7
    assert 3.4 < r[0] / r[1] < 4.6
    assert 3.4 < r[1] / r[2] < 4.6


def test_spacelike_jet_rejected():
    f = MetricField.minkowski()
    jet = ImmersionJet(np.zeros(4), np.array([[0.0, 0], [1, 0], [0, 1], [0, 0]]),
                       np.zeros((4, 2, 2)))
    mv = evaluate_metric(f, jet.position)
    with pytest.raises(NotTimelike):
        m_matrix_spectrum(jet, mv, induced_metric(jet, mv))


def test_field_for_dimensions():
    assert field_for_dimensions("minkowski", 5).dim == 6
    assert field_for_dimensions(MetricKind.SCHWARZSCHILD_CARTESIAN, 4).dim == 5
    with pytest.raises(ValueError):
        field_for_dimensions("minkowski", 2)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_spectrum_invariant_under_random_seeds(seed):
    rng = np.random.default_rng(seed)
    f = field_for_dimensions(MetricKind.SCHWARZSCHILD_CARTESIAN, 3)
    jets = random_timelike_jets(rng, f, 1, 20)
    mv = evaluate_metric(f, jets.position)
    rank, ev = m_matrix_spectrum(jets, mv, induced_metric(jets, mv))
    assert np.all(rank == 2)
    assert np.max(np.abs(ev - expected_spectrum(3, 1))) < 1e-9
