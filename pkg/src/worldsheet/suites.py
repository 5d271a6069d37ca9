"""Property suites shared by ``worldsheet verify`` and the acceptance tests.

Every suite returns a :class:`SuiteResult` with the measured quantities,
the thresholds they were compared against and a pass flag.  Thresholds are
keyword arguments with the documented defaults.
"""

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .data import (boosted_pulse, compact_patch, epsilon_loop, h3_violating,
                   lambda0_from_data, standing_wave, straight_string)
from .dynamics import linear_degeneracy_residual, random_admissible_states
from .errors import AssumptionViolated, HorizonViolation
from .extremal import (annihilation_check, expected_spectrum, field_for_dimensions,
                       induced_metric, manufactured_jets, m_matrix_spectrum,
                       random_timelike_jets, theorem21_residual)
from .geometry import MetricKind, evaluate_metric
from .solvers import (CartesianChart, GridParams, Termination, dalembert_oracle,
                      solve_characteristic, solve_upwind_raw)
from .spherical import (cross_chart_study, random_spherical_states,
                        spherical_linear_degeneracy_residual)
from .transform import (LambdaInitial, bv_norm, build_map, conservation_identity_residual,
                        integrate_speed_transport, solve_lambda_exact)

__all__ = [
    "SuiteResult",
    "MutatedChart",
    "spectrum_suite",
    "identity_suite",
    "degeneracy_suite",
    "transport_suite",
    "diffeomorphism_suite",
    "flat_suite",
    "cross_chart_suite",
    "cross_solver_suite",
    "estimates_suite",
    "failure_suite",
    "SUITES",
    "run_suites",
    "fit_exponent",
    "orders",
]

DIMENSIONS = ((3, 1), (3, 2), (4, 1))
METRIC_KINDS = (MetricKind.SCHWARZSCHILD_CARTESIAN, MetricKind.SCHWARZSCHILD_SPHERICAL,
                MetricKind.MINKOWSKI)


@dataclass
class SuiteResult:
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    thresholds: dict = field(default_factory=dict)
    message: str = ""
    seconds: float = 0.0

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] {self.name}: {self.message}"

    def as_dict(self):
        return {"suite": self.name, "passed": bool(self.passed), "measured": self.measured,
                "thresholds": self.thresholds, "message": self.message,
                "seconds": self.seconds}


class MutatedChart(CartesianChart):
    """Cartesian chart with the Christoffel source sign flipped."""

    def source(self, u, P, Q):
        return -super().source(u, P, Q)


def orders(errors, ratio=2.0):
    """Observed convergence orders between successive refinements."""
    e = np.asarray(errors, dtype=float)
    return np.log(e[:-1] / e[1:]) / np.log(ratio)


def fit_exponent(x, y):
    """Least-squares slope of ``log y`` against ``log x``."""
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def _timed(fun):
    def wrapper(*args, **kw):
        t0 = time.perf_counter()
        res = fun(*args, **kw)
        res.seconds = time.perf_counter() - t0
        return res
    wrapper.__name__ = fun.__name__
    wrapper.__doc__ = fun.__doc__
    return wrapper


# ----------------------------------------------------------------------
@_timed
def spectrum_suite(count=10000, seed=0, tol=1e-9, time_limit=30.0, kinds=METRIC_KINDS):
    """Eigenvalues of ``M`` are ``{0^(p+1), 1^(n-p)}`` and ``rank M = n - p``."""
    rng = np.random.default_rng(seed)
    worst, bad_rank, total = 0.0, 0, 0
    t0 = time.perf_counter()
    for kind in kinds:
        for n, p in DIMENSIONS:
            f = field_for_dimensions(kind, n)
            jets = random_timelike_jets(rng, f, p, count)
            mv = evaluate_metric(f, jets.position)
            ind = induced_metric(jets, mv)
            rank, ev = m_matrix_spectrum(jets, mv, ind, tol=tol)
            worst = max(worst, float(np.max(np.abs(ev - expected_spectrum(n, p)))))
            bad_rank += int(np.sum(rank != n - p))
            total += len(rank)
    elapsed = time.perf_counter() - t0
    ok = worst <= tol and bad_rank == 0 and elapsed < time_limit
    return SuiteResult("spectrum", ok,
                       {"max_eigenvalue_error": worst, "rank_failures": bad_rank,
                        "jets": total, "seconds": elapsed},
                       {"tol": tol, "time_limit": time_limit},
                       f"{total} jets, max |ev - expected| = {worst:.2e}, "
                       f"rank failures {bad_rank}, {elapsed:.1f} s")


@_timed
def identity_suite(count=1000, seed=1, h=1e-4, tol=1e-7, annihilation_tol=1e-10,
                   ratio_band=(3.4, 4.6), kinds=METRIC_KINDS):
    """Extremal operator equals ``M E`` up to the differencing error.

    Richardson behaviour: in curved metrics the residual drops by ~4 from
    ``4h`` to ``2h``; flat metrics have no truncation error and must stay
    below ``tol`` at every step.
    """
    rng = np.random.default_rng(seed)
    worst, worst_ann = 0.0, 0.0
    ratios = {}
    for kind in kinds:
        for n, p in DIMENSIONS:
            f = field_for_dimensions(kind, n)
            jets = manufactured_jets(rng, f, p, count)
            res = theorem21_residual(jets, f, h)
            worst = max(worst, float(res.max()))
            mv = evaluate_metric(f, jets.position)
            a, b = annihilation_check(jets, mv, induced_metric(jets, mv))
            worst_ann = max(worst_ann, float(a.max()), float(b.max()))
            if kind is not MetricKind.MINKOWSKI:
                r4 = theorem21_residual(jets, f, 4 * h).max()
                r2 = theorem21_residual(jets, f, 2 * h).max()
                ratios[f"{kind.value}-n{n}-p{p}"] = float(r4 / r2)
    ratio_ok = all(ratio_band[0] <= r <= ratio_band[1] for r in ratios.values())
    ok = worst < tol and worst_ann < annihilation_tol and ratio_ok
    return SuiteResult("identities", ok,
                       {"max_residual": worst, "max_annihilation": worst_ann,
                        "richardson_ratios": ratios},
                       {"tol": tol, "annihilation_tol": annihilation_tol,
                        "ratio_band": ratio_band, "h": h},
                       f"residual {worst:.2e} at h={h:g}, annihilation {worst_ann:.2e}, "
                       f"Richardson ratios {min(ratios.values()):.3f}..{max(ratios.values()):.3f}")


@_timed
def degeneracy_suite(count=10000, seed=2, tol=1e-7, m=1.0):
    """``|grad lam_- . r_i|`` and ``|grad lam_+ . r_i|`` vanish on their groups."""
    rng = np.random.default_rng(seed)
    cart = float(linear_degeneracy_residual(random_admissible_states(rng, m, count), m).max())
    sph = float(spherical_linear_degeneracy_residual(random_spherical_states(rng, m, count),
                                                     m).max())
    ok = cart <= tol and sph <= tol
    return SuiteResult("degeneracy", ok, {"cartesian": cart, "spherical": sph, "states": count},
                       {"tol": tol},
                       f"{count} states per chart: cartesian {cart:.2e}, spherical {sph:.2e}")


def transport_test_speeds():
    """Smooth open-mode speeds with H3 satisfied and both fields varying."""
    return LambdaInitial(lambda th: -1.0 + 0.3 * np.exp(-th**2),
                         lambda th: 1.2 + 0.3 * np.exp(-(th - 1.0) ** 2),
                         window=(-12.0, 12.0), nodes=4001)


@_timed
def transport_suite(nodes=(400, 800, 1600), T=2.0, region=(-4.0, 4.0),
                    order_min=1.8, ratio=4.0, ratio_tol=0.15):
    """Exact transport against an upwind solve; conservation identity order.

    Both solutions are compared on ``region`` at ``T``.  The conservation
    residual of the exact speeds on a space-time grid of spacing ``h`` must
    drop by ``ratio`` (within ``ratio_tol`` relative) per halving.
    """
    init = transport_test_speeds()
    cmap = build_map(init)
    L = region[1] - region[0]
    errs, cons = [], []
    for n in nodes:
        h = L / n
        pad = 8.0 * T
        th = np.arange(region[0] - pad, region[1] + pad + 0.5 * h, h)
        lm_u, lp_u = integrate_speed_transport(th, init.minus(th), init.plus(th), T)
        inside = (th >= region[0]) & (th <= region[1])
        lm_e, lp_e = solve_lambda_exact(cmap, T, th[inside])
        errs.append(float(max(np.abs(lm_u[inside] - lm_e).max(),
                              np.abs(lp_u[inside] - lp_e).max())))
        tt = np.arange(0.5, 0.5 + 4 * h + 0.5 * h, h)[:5]
        tg, xg = np.meshgrid(tt, th[inside], indexing="ij")
        lm, lp = solve_lambda_exact(cmap, tg, xg)
        cons.append(conservation_identity_residual(h, h, lm, lp))
    ords = orders(errs)
    cratios = [cons[i] / cons[i + 1] for i in range(len(cons) - 1)]
    ok = (all(o >= order_min for o in ords)
          and all(abs(r / ratio - 1.0) <= ratio_tol for r in cratios))
    return SuiteResult("transport", ok,
                       {"errors": errs, "orders": list(map(float, ords)),
                        "conservation_residuals": cons, "conservation_ratios": cratios},
                       {"order_min": order_min, "ratio": ratio, "ratio_tol": ratio_tol},
                       f"upwind vs exact orders {np.round(ords, 3).tolist()}, "
                       f"conservation ratios {np.round(cratios, 3).tolist()}")


def epsilon_corpus():
    """Data of the small-amplitude family used for the diffeomorphism checks."""
    return [(epsilon_loop(1e-2), 1.0), (epsilon_loop(1e-3), 1.0),
            (compact_patch(1e-2), 1.0), (compact_patch(1e-3), 1.0),
            (epsilon_loop(1e-2, r0=2000.0, scale=1e5, name="large-loop(eps=0.01)"), 1.0)]


@_timed
def diffeomorphism_suite(samples=400, refine=10, times=(0.5, 2.0, 8.0), factor=5.0, bv_rtol=1e-3,
                         corpus=None):
    """Round trip ``Phi(t, Theta(t, theta)) = theta``, positive Jacobian, BV.

    ``theta`` samples have spacing ``h = length / samples`` over the data
    window (or period).  BV of ``lam_pm(t, .)`` sampled on a grid ``refine``
    times finer
    must match the BV of the initial speeds within ``bv_rtol``.
    """
    corpus = corpus or epsilon_corpus()
    worst_rt, worst_rt_bound, min_jac, worst_bv = 0.0, np.inf, np.inf, 0.0
    ok = True
    details = {}
    for data, m in corpus:
        init = lambda0_from_data(data, m)
        cmap = build_map(init)
        if data.mode == "periodic":
            hh = data.period / samples
            th = np.arange(samples) * hh
            fine = np.linspace(0.0, data.period, refine * samples + 1)
            speed = 0.0
        else:
            hh = (data.window[1] - data.window[0]) / samples
            th = np.linspace(*data.window, samples + 1)
            fine = np.linspace(*data.window, refine * samples + 1)
            speed = float(max(np.abs(init.minus(fine)).max(), np.abs(init.plus(fine)).max()))
        bv0 = bv_norm(init.minus(fine)) + bv_norm(init.plus(fine))
        rt, bvd, jmin = 0.0, 0.0, np.inf
        for t in times:
            vt = cmap.Theta(t, th)
            rt = max(rt, float(np.max(np.abs(cmap.Phi(t, vt) - th))))
            jmin = min(jmin, float(np.min(cmap.jacobian(t, th))))
            if data.mode == "periodic":
                grid = fine
            else:
                reach = speed * t
                grid = np.linspace(data.window[0] - reach, data.window[1] + reach,
                                   len(fine) + int(refine * reach / hh))
            lm, lp = solve_lambda_exact(cmap, t, grid)
            bvt = bv_norm(lm) + bv_norm(lp)
            bvd = max(bvd, abs(bvt - bv0) / max(bv0, 1e-300))
        bound = factor * hh**2
        ok &= rt <= bound and jmin > 0 and bvd <= bv_rtol
        details[data.name] = {"round_trip": rt, "bound": bound, "min_jacobian": jmin,
                              "bv_rel_change": bvd}
        worst_rt = max(worst_rt, rt)
        worst_rt_bound = min(worst_rt_bound, bound)
        min_jac = min(min_jac, jmin)
        worst_bv = max(worst_bv, bvd)
    return SuiteResult("diffeomorphism", bool(ok), details,
                       {"factor": factor, "samples": samples, "bv_rtol": bv_rtol},
                       f"round trip {worst_rt:.2e} (bound >= {worst_rt_bound:.2e}), "
                       f"min Jacobian {min_jac:.3g}, BV change {worst_bv:.2e}")


def _snapshot_error(snap, data):
    mask = snap.valid
    ref = dalembert_oracle(data, snap.time, snap.theta[mask])
    return float(np.max(np.abs(snap.x[mask] - ref)))


@_timed
def flat_suite(nodes=(401, 801, 1601), T=5.0, order_min=1.8, wave_tol=None,
               interpolation="cubic"):
    """Flat runs against the d'Alembert formula at three resolutions.

    Passes when the characteristic-solver errors follow ``C h^2`` (observed
    orders at least ``order_min``) for the boosted pulse and the standing
    wave also matches ``a sin(theta) cos(t)`` at the same order.
    """
    pulse = boosted_pulse()
    wave = standing_wave(0.5)
    e_pulse, e_wave, e_formula, hs = [], [], [], []
    for n in nodes:
        grid = GridParams(nodes=n, snapshot_times=(T / 2,), interpolation=interpolation)
        r = solve_characteristic(pulse, 0.0, T, grid)
        e_pulse.append(max(_snapshot_error(s, pulse) for s in r.snapshots))
        hs.append(r.diagnostics.extra.get("h", np.nan))
        rw = solve_characteristic(wave, 0.0, T, grid)
        e_wave.append(max(_snapshot_error(s, wave) for s in rw.snapshots))
        e_formula.append(max(float(np.max(np.abs(s.x[:, 2] - 0.5 * np.sin(s.theta) * np.cos(s.time))))
                             for s in rw.snapshots))
    op, ow, of = orders(e_pulse), orders(e_wave), orders(e_formula)
    hs = np.asarray(hs, dtype=float)
    consts = (np.asarray(e_pulse) / hs**2).tolist()
    ok = all(o >= order_min for o in np.concatenate([op, ow, of]))
    if wave_tol is not None:
        ok &= e_formula[-1] <= wave_tol
    return SuiteResult("flat", bool(ok),
                       {"pulse_errors": e_pulse, "wave_errors": e_wave,
                        "formula_errors": e_formula, "h": hs.tolist(), "C": consts,
                        "orders_pulse": op.tolist(), "orders_wave": ow.tolist(),
                        "orders_formula": of.tolist()},
                       {"order_min": order_min},
                       f"pulse orders {np.round(op, 3).tolist()}, wave orders "
                       f"{np.round(ow, 3).tolist()}, standing-wave formula error {e_formula[-1]:.2e}")


def cross_chart_data():
    """Equatorial straight string at ``r = 10`` with a transverse kick."""
    def kick(th):
        out = np.zeros((len(th), 3))
        out[:, 0] = 0.1 * np.exp(-th**2 / 4.0)
        return out
    return straight_string(10.0, velocity=kick, window=(-40.0, 40.0))


@_timed
def cross_chart_suite(nodes=1601, T=20.0, m=1.0, region=(-10.0, 10.0), mutate=False):
    """Cartesian and spherical runs agree within the sum of their scheme errors."""
    chart = MutatedChart(m) if mutate else None
    out = cross_chart_study(cross_chart_data(), m, T * m, nodes=nodes, region=region,
                            cartesian_chart=chart)
    return SuiteResult("cross-chart", bool(out["passed"]),
                       {k: out[k] for k in ("deviation", "error_cartesian", "error_spherical")},
                       {"T": T * m, "nodes": nodes},
                       f"deviation {out['deviation']:.3e} vs scheme errors "
                       f"{out['error_cartesian']:.3e} + {out['error_spherical']:.3e}")


@_timed
def cross_solver_suite(nodes=(801, 1601), T=10.0, m=1.0, region=(-5.0, 5.0), order_min=1.0,
                       mutate=False):
    """Characteristic and upwind solutions converge to each other.

    The upwind field is spline-interpolated to the characteristic nodes;
    the max deviation on ``region`` must refine at ``order_min`` or better.
    """
    data = cross_chart_data()
    chart = MutatedChart(m) if mutate else CartesianChart(m)
    devs = []
    for n in nodes:
        grid = GridParams(nodes=n, pad=0.0, snapshot_times=(T / 2,))
        rc = solve_characteristic(data, m, T, grid, require_h3=False)
        ru = solve_upwind_raw(data, m, T, grid, chart=chart, require_h3=False)
        dev = 0.0
        for sc in rc.snapshots[1:]:
            su = ru.snapshot_at(sc.time)
            mask = sc.valid & (sc.theta >= region[0]) & (sc.theta <= region[1])
            spline = CubicSpline(su.theta, su.x)
            dev = max(dev, float(np.max(np.abs(sc.x[mask] - spline(sc.theta[mask])))))
        devs.append(dev)
    ords = orders(devs, (nodes[1] - 1) / (nodes[0] - 1))
    ok = all(o >= order_min for o in ords)
    return SuiteResult("cross-solver", bool(ok), {"deviations": devs, "orders": ords.tolist()},
                       {"order_min": order_min},
                       f"deviations {['%.2e' % d for d in devs]}, orders {np.round(ords, 3).tolist()}")


def estimate_run(data, m, T, nodes, wall_time=None):
    """One characteristic run with its monitors; returns the result."""
    return solve_characteristic(data, m, T, GridParams(nodes=nodes, wall_time=wall_time))


def estimate_family(family, eps):
    """Members of the data families used by the estimates suite.

    ``epsilon-loop`` is the loop of radius ``eps`` at distance 10;
    ``large-loop`` the same family with ``r0 = 2000`` and scale ``1e5``;
    ``compact-patch`` has integrable velocity and finite length.
    """
    if family == "compact-patch":
        return compact_patch(eps)
    if family == "epsilon-loop":
        return epsilon_loop(eps)
    if family == "large-loop":
        return epsilon_loop(eps, r0=2000.0, scale=1e5)
    raise ValueError(f"unknown family {family!r}")


def estimates_verdict(result, delta_hat):
    d = result.diagnostics
    checks = {
        "reached_T": result.termination is Termination.REACHED_T,
        "timelike": d.max_delta < 0,
        "horizon_margin": d.min_horizon_gap >= 0.5 * delta_hat,
        "sup_norm_doubling": d.v_inf <= 2.0 * d.v_inf_0,
    }
    return checks


@_timed
def estimates_suite(family="compact-patch", epsilons=(1e-2, 1e-3), T=100.0, m=1.0,
                    nodes=4096, exponent=2.0, exponent_tol=0.2, time_limit=60.0):
    """Global-existence monitors over ``[0, T m]`` and the ``Q_V`` exponent.

    ``family`` is one of :func:`estimate_family`.  Each run gets
    ``time_limit`` seconds of wall clock; a run that exceeds it stops with
    NumericalFailure.
    """
    runs = {}
    ok = True
    qv = []
    for eps in epsilons:
        data = estimate_family(family, eps)
        t0 = time.perf_counter()
        r = estimate_run(data, m, T * m, nodes, wall_time=time_limit)
        secs = time.perf_counter() - t0
        checks = estimates_verdict(r, data.margin(m))
        checks["time_limit"] = secs < time_limit
        ok &= all(checks.values())
        d = r.diagnostics
        qv.append(d.q_v)
        runs[f"{eps:g}"] = {"checks": checks, "seconds": secs, "q_v": d.q_v,
                            "v_inf_0": d.v_inf_0, "v_inf": d.v_inf,
                            "max_delta": d.max_delta, "min_horizon_gap": d.min_horizon_gap,
                            "termination": r.termination.value, "message": d.message,
                            "t_final": d.t_final}
    reached = all(v["termination"] == Termination.REACHED_T.value for v in runs.values())
    slope = fit_exponent(epsilons, qv) if reached and all(q > 0 for q in qv) else float("nan")
    exp_ok = abs(slope - exponent) <= exponent_tol
    ok &= exp_ok
    return SuiteResult(f"estimates[{family}]", bool(ok), {"runs": runs, "exponent": slope},
                       {"exponent": exponent, "exponent_tol": exponent_tol,
                        "time_limit": time_limit},
                       f"Q_V exponent {slope:.3f}; " + "; ".join(
                           f"eps={k}: {v['termination']}, {v['seconds']:.1f} s, "
                           f"checks {'ok' if all(v['checks'].values()) else v['checks']}"
                           for k, v in runs.items()))


@_timed
def failure_suite(m=1.0):
    """H3-violating data collapse the gap; near-horizon data are refused."""
    out = {}
    r = solve_characteristic(h3_violating(), 0.0, 20.0, GridParams(nodes=801),
                             require_h3=False)
    out["gap_collapse"] = r.termination is Termination.GAP_COLLAPSE
    try:
        solve_characteristic(h3_violating(), 0.0, 5.0)
        out["h3_refused"] = False
    except AssumptionViolated as exc:
        out["h3_refused"] = exc.report is not None and exc.report.witness is not None
    for name, solver in (("horizon_refused_characteristic", solve_characteristic),
                         ("horizon_refused_upwind", solve_upwind_raw)):
        try:
            solver(straight_string(2.0 * m + 0.05), m, 5.0)
            out[name] = False
        except HorizonViolation:
            out[name] = True
    ok = all(out.values())
    return SuiteResult("failure-modes", ok, out, {},
                       ", ".join(f"{k}={v}" for k, v in out.items()))


SUITES = {
    "spectrum": spectrum_suite,
    "identities": identity_suite,
    "degeneracy": degeneracy_suite,
    "transport": transport_suite,
    "diffeomorphism": diffeomorphism_suite,
    "flat": flat_suite,
    "cross-chart": cross_chart_suite,
    "cross-solver": cross_solver_suite,
    "estimates": estimates_suite,
    "failure-modes": failure_suite,
}
MUTABLE = ("cross-chart", "cross-solver")


def run_suites(names, options=None, mutate=False):
    """Run the named suites; ``options[name]`` holds keyword overrides."""
    options = options or {}
    results = []
    for name in names:
        if name not in SUITES:
            raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
        kw = dict(options.get(name, {}))
        if name in MUTABLE:
            kw["mutate"] = mutate
        results.append(SUITES[name](**kw))
    return results
