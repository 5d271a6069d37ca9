import numpy as np
import pytest

from worldsheet.data import (InitialData, boosted_pulse, compact_patch, epsilon_loop,
                             h3_violating, standing_wave, straight_string)
from worldsheet.errors import (AssumptionViolated, CFLViolation, GaugeViolation,
                               HorizonViolation)
from worldsheet.solvers import (CartesianChart, GridParams, Termination, check_flat_gauge,
                                dalembert_oracle, solve_characteristic, solve_upwind_raw,
                                upwind_rhs)


def max_error(result, data):
    err = 0.0
    for s in result.snapshots:
        ref = dalembert_oracle(data, s.time, s.theta[s.valid])
        err = max(err, float(np.max(np.abs(s.x[s.valid] - ref))))
    return err


def test_grid_params_validation():
    with pytest.raises(ValueError):
        GridParams(nodes=4)
    with pytest.raises(ValueError):
        GridParams(interpolation="quintic")


def test_dalembert_oracle_at_time_zero_and_gauge():
    data = boosted_pulse()
    th = np.linspace(-5, 5, 11)
    assert np.allclose(dalembert_oracle(data, 0.0, th), data.evaluate(th)[0])
    assert check_flat_gauge(data) < 1e-12
    with pytest.raises(GaugeViolation):
        check_flat_gauge(compact_patch(1e-2))


def test_dalembert_oracle_standing_wave():
    th = np.linspace(0, 2 * np.pi, 17)
    x = dalembert_oracle(standing_wave(0.5), 1.3, th)
    assert np.allclose(x[:, 2], 0.5 * np.sin(th) * np.cos(1.3), atol=1e-12)
    assert np.allclose(x[:, 0], 1.3)


def test_flat_pulse_converges_at_second_order():
    data = boosted_pulse()
    errs = []
    for n in (401, 801):
        r = solve_characteristic(data, 0.0, 3.0, GridParams(nodes=n, interpolation="cubic"))
        assert r.ok
        errs.append(max_error(r, data))
    assert errs[1] < 1e-3
    assert np.log2(errs[0] / errs[1]) > 1.8


def test_upwind_matches_flat_oracle():
    data = boosted_pulse()
    errs = []
    for n in (401, 801):
        r = solve_upwind_raw(data, 0.0, 2.0, GridParams(nodes=n))
        assert r.ok and r.solver == "upwind"
        errs.append(max_error(r, data))
    assert errs[1] < 1e-2
    assert np.log2(errs[0] / errs[1]) > 1.5


def test_compact_patch_monitors():
    r = solve_characteristic(compact_patch(1e-2), 1.0, 10.0, GridParams(nodes=1024))
    d = r.diagnostics
    assert r.termination is Termination.REACHED_T and np.isclose(d.t_final, 10.0)
    assert d.max_delta < 0 and d.min_horizon_gap > 7.9
    assert all(d.verdicts.values())
    assert d.v_inf <= 2 * d.v_inf_0
    assert d.q_v > 0 and d.extra["k1"] == d.q_v / 1e-4
    assert set(d.as_dict()) >= {"termination", "q_v", "verdicts"}
    snap = r.snapshot_at(5.0)
    assert abs(snap.time - 5.0) <= 10.0 / 2
    assert snap.x.shape == (1024, 4) and snap.vartheta is not None


def test_static_string_stays_put():
    # straight string at rest in flat space is a static solution
    data = straight_string(10.0)
    r = solve_characteristic(data, 0.0, 5.0, GridParams(nodes=256))
    s = r.snapshots[-1]
    assert np.allclose(s.x[s.valid, 1:], data.evaluate(s.theta[s.valid])[0][:, 1:], atol=1e-12)
    assert np.allclose(s.x[s.valid, 0], 5.0)


def test_gap_collapse_on_h3_violating_data():
    r = solve_characteristic(h3_violating(), 0.0, 20.0, GridParams(nodes=801),
                             require_h3=False)
    assert r.termination is Termination.GAP_COLLAPSE
    assert r.diagnostics.t_final < 20.0
    with pytest.raises(AssumptionViolated) as err:
        solve_characteristic(h3_violating(), 0.0, 5.0)
    assert err.value.report.witness is not None
    with pytest.raises(AssumptionViolated):
        solve_upwind_raw(h3_violating(), 0.0, 5.0)


def test_horizon_refusal():
    for solver in (solve_characteristic, solve_upwind_raw):
        with pytest.raises(HorizonViolation):
            solver(straight_string(2.05), 1.0, 1.0)


def test_wall_time_budget():
    r = solve_characteristic(epsilon_loop(1e-2), 1.0, 100.0,
                             GridParams(nodes=512, wall_time=0.5))
    assert r.termination is Termination.NUMERICAL_FAILURE
    assert "wall-clock" in r.diagnostics.message
    assert r.diagnostics.extra["planned_steps"] > 10**5


def test_cfl_limits():
    with pytest.raises(CFLViolation):
        solve_characteristic(boosted_pulse(), 0.0, 1.0, GridParams(cfl=1.5))
    with pytest.raises(CFLViolation):
        solve_upwind_raw(boosted_pulse(), 0.0, 1.0, GridParams(cfl=0.9))
    with pytest.raises(ValueError):
        solve_characteristic(boosted_pulse(), 0.0, -1.0)


def test_backward_run_reverses_time():
    data = boosted_pulse()
    fwd = solve_characteristic(data, 0.0, 2.0, GridParams(nodes=401, interpolation="cubic"))
    back = solve_characteristic(data, 0.0, 2.0, GridParams(nodes=401, interpolation="cubic"),
                                backward=True)
    assert np.isclose(back.diagnostics.t_final, -2.0)
    s = back.snapshots[-1]
    assert np.isclose(s.time, -2.0)
    # pulse data are time-symmetric up to the sign of q
    ref = dalembert_oracle(InitialData(data.p, data.dp, lambda th: -data.q(th),
                                       window=data.window), 2.0, s.theta[s.valid])
    assert np.max(np.abs(s.x[s.valid, 1:] - ref[:, 1:])) < 1e-3
    assert fwd.ok and back.ok


def test_snapshot_times_are_recorded():
    r = solve_characteristic(boosted_pulse(), 0.0, 2.0,
                             GridParams(nodes=201, snapshot_times=(0.5, 1.0)))
    assert [round(s.time, 12) for s in r.snapshots] == [0.0, 0.5, 1.0, 2.0]


def test_upwind_rhs_vanishes_for_static_flat_string():
    data = straight_string(10.0)
    th = np.linspace(-5, 5, 51)
    rhs = upwind_rhs(CartesianChart(0.0), data.state(th), th[1] - th[0], False)
    assert np.allclose(rhs[:, 4:], 0) and np.allclose(rhs[:, :4], [1, 0, 0, 0])


def test_cross_solver_agreement_in_schwarzschild():
    data = compact_patch(1e-2)
    grid = GridParams(nodes=801, pad=0.0)
    rc = solve_characteristic(data, 1.0, 4.0, grid)
    ru = solve_upwind_raw(data, 1.0, 4.0, grid)
    sc, su = rc.snapshots[-1], ru.snapshot_at(4.0)
    inner = sc.valid & (np.abs(sc.theta) < 5)
    xs = np.stack([np.interp(sc.theta[inner], su.theta, su.x[:, k]) for k in range(4)], -1)
    assert np.max(np.abs(sc.x[inner] - xs)) < 1e-3
