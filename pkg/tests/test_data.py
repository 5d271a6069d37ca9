import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from worldsheet.data import (InitialData, boosted_pulse, check_assumptions,
                             check_horizon_margin, compact_patch, epsilon_line, epsilon_loop,
                             h3_sweep, h3_violating, lambda0_from_data, pq0_from_data, pq0_l1,
                             smallness_norms, smooth_bump, standing_wave, straight_string)
from worldsheet.dynamics import induced_metric_cartesian, metric_form, split_state
from worldsheet.errors import HorizonViolation, NotTimelike


def test_epsilon_loop_induced_metric():
    eps = 1e-2
    data = epsilon_loop(eps)
    th = np.linspace(0, 2 * np.pi, 9)
    g = induced_metric_cartesian(data.state(th), 1.0)
    # centre at r0 = 10, loop radius eps: g00 close to -(1 - 2/10)
    assert np.allclose(g.g00, -0.8, atol=1e-3)
    assert np.allclose(g.g01, 0)
    assert np.allclose(g.g11 / eps**2, 1 + 0.25 * np.cos(th) ** 2, rtol=1e-2)
    init = lambda0_from_data(data, 1.0)
    assert np.all(init.plus(th) > 0) and np.all(init.minus(th) < 0)
    assert np.allclose(init.plus(th), np.sqrt(0.8 / (1 + 0.25 * np.cos(th) ** 2)) / eps,
                       rtol=1e-2)


def test_epsilon_line_is_straight():
    data = epsilon_line(1e-3)
    p, dp, q = data.evaluate(np.array([-60.0, 0.0, 60.0]))
    assert np.allclose(dp[:, 2], 1e-3)
    assert np.allclose(p[:, 2], [-0.06, 0.0, 0.06])
    assert np.allclose(q, [1, 0, 0, 0])


def test_smallness_compact_patch_scales_with_epsilon():
    reps = [smallness_norms(compact_patch(eps)) for eps in (1e-2, 1e-3)]
    for eps, rep in zip((1e-2, 1e-3), reps):
        # int sech = pi
        assert np.isclose(rep.arc_bv, eps * np.pi, rtol=1e-6)
        assert np.isclose(rep.vel_l1, eps * np.pi, rtol=1e-6)
        assert not rep.discrepancy
    assert np.isclose(reps[0].vel_l1 / reps[1].vel_l1, 10.0, rtol=1e-8)


def test_smallness_loop_is_infinite_on_the_line():
    rep = smallness_norms(epsilon_loop(1e-2))
    assert np.isinf(rep.arc_bv) and np.isinf(rep.vel_l1)
    # one period: eps * int |cos| = 4 eps
    assert np.isclose(np.max(rep.arc_bv_window), 4e-2, rtol=1e-8)
    assert rep.vel_l1_background == 0.0
    assert rep.discrepancy
    assert set(rep.as_dict()) >= {"arc_bv", "vel_l1", "discrepancy"}


def test_smallness_gaussian_bump():
    eps = 1e-3
    data = InitialData(lambda th: np.outer(np.ones_like(th), [0, 10, 0, 0]),
                       lambda th: np.outer(eps * np.exp(-th**2), [0, 0, 1, 0]),
                       lambda th: np.outer(np.ones_like(th), [1, 0, 0, 0]),
                       window=(-10.0, 10.0))
    rep = smallness_norms(data)
    assert np.isclose(rep.arc_bv, eps * np.sqrt(np.pi), rtol=1e-8)
    assert np.isinf(rep.vel_l1)


def test_h3_violation_has_witness():
    rep = check_assumptions(h3_violating(1.5), 0.0)
    assert rep.h1 and rep.h2 and not rep.h3 and not rep.ok
    t1, t2 = rep.witness
    assert t1 <= t2
    init = lambda0_from_data(h3_violating(1.5), 0.0)
    assert init.plus(np.array([t2]))[0] <= init.minus(np.array([t1]))[0]
    assert "witness" in rep.summary()
    assert check_assumptions(h3_violating(0.5), 0.0).ok


def test_h3_sweep_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(50):
        lm = rng.normal(size=30)
        lp = lm + rng.uniform(0.1, 2.0, 30)
        ok, (i, j) = h3_sweep(np.arange(30), lm, lp)
        brute = all(lp[b] > lm[a] for a in range(30) for b in range(a, 30))
        assert ok == brute
        assert i <= j
        if not ok:
            assert lp[j] <= lm[i]


def test_horizon_margin():
    with pytest.raises(HorizonViolation):
        check_horizon_margin(straight_string(2.05), 1.0)
    assert np.isclose(check_horizon_margin(straight_string(10.0), 1.0), 8.0)
    assert check_horizon_margin(straight_string(2.05), 0.0) == np.inf
    with pytest.raises(ValueError):
        check_assumptions(straight_string())


def test_evaluate_is_shape_generic_and_extends():
    data = compact_patch(1e-2)
    th = np.linspace(-30, 30, 15).reshape(3, 5)
    p, dp, q = data.evaluate(th)
    assert p.shape == (3, 5, 4) and dp.shape == q.shape == p.shape
    # constant extension of dp and q, linear extension of p
    p2, dp2, _ = data.evaluate(np.array([20.0, 25.0]))
    assert np.allclose(dp2[0], dp2[1])
    assert np.allclose(p2[1], p2[0] + 5 * dp2[0])


def test_periodic_shift():
    data = standing_wave(0.5)
    th = np.array([0.2, 1.0])
    p, dp, q = data.evaluate(th)
    p2, dp2, q2 = data.evaluate(th + 4 * np.pi)
    assert np.allclose(p2, p + 2 * data.shift)
    assert np.allclose(dp2, dp) and np.allclose(q2, q)
    # orthonormal gauge
    assert np.allclose(np.sum(dp**2, -1), 1.0)


def test_from_samples_round_trip():
    ref = standing_wave(0.3)
    th = np.linspace(0, 2 * np.pi, 801)
    p, _, q = ref.evaluate(th)
    data = InitialData.from_samples(th, p, q, mode="periodic")
    x = np.linspace(-3, 9, 50)
    for a, b in zip(data.evaluate(x), ref.evaluate(x)):
        assert np.allclose(a, b, atol=1e-7)
    open_data = InitialData.from_samples(th, p, q)
    assert open_data.window == (0.0, 2 * np.pi)
    with pytest.raises(ValueError):
        InitialData.from_samples(th**2, p, q)


def test_pq0_are_null():
    data = boosted_pulse()
    init = lambda0_from_data(data, 0.0)
    th = np.linspace(-10, 10, 41)
    P, Q = pq0_from_data(data, init, th)
    u, _, _ = split_state(data.state(th))
    assert np.allclose(metric_form(u, P, P, 0.0), 0, atol=1e-12)
    assert np.allclose(metric_form(u, Q, Q, 0.0), 0, atol=1e-12)
    lp, lq = pq0_l1(data, init)
    assert lp > 0 and lq > 0


def test_smooth_bump():
    x = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    b = smooth_bump(x)
    assert b[1] == 1.0 and b[0] == b[3] == b[4] == 0.0 and 0 < b[2] < 1


def test_invalid_modes():
    f = straight_string().p
    with pytest.raises(ValueError):
        InitialData(f, f, f, mode="ring")
    with pytest.raises(ValueError):
        InitialData(f, f, f, mode="periodic")
    with pytest.raises(ValueError):
        standing_wave(1.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-4, 5e-2), st.floats(0.0, 0.85))
def test_compact_patch_is_timelike_with_symmetric_speeds(eps, b):
    # needs b^2 < 1 - 2m/r, about 0.8 at r = 10
    data = compact_patch(eps, b=b)
    init = lambda0_from_data(data, 1.0)
    th = np.linspace(-20, 20, 81)
    assert np.all(init.plus(th) - init.minus(th) > 0)
    assert check_assumptions(init).h2


def test_compact_patch_beyond_velocity_bound_is_refused():
    with pytest.raises(NotTimelike):
        lambda0_from_data(compact_patch(1e-2, b=0.95), 1.0).minus(np.zeros(3))
