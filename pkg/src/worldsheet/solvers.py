"""Solvers for the string Cauchy problem.

* :func:`solve_characteristic` integrates the semilinear (S, P, Q) system in
  the characteristic chart, where S is at rest and P, Q move with speeds
  +1 and -1.  With ``cfl = 1`` every foot point is a grid node and the
  transport is exact; sources are integrated with Heun's method along the
  characteristics.
* :func:`solve_upwind_raw` integrates ``U_t + A U_theta + B = 0`` in
  ``(t, theta)`` with second-order upwinding in the local characteristic
  fields and SSP-RK3.  It works in any chart that provides the ambient
  inner product and Christoffel form.
* :func:`dalembert_oracle` is the closed-form flat solution in the
  orthonormal gauge.
"""

import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .data import InitialData, check_speed_assumptions, lambda0_from_data
from .dynamics import (InducedMetric2, _dot3, christoffel_source, eigenvalues,
                       join_state, metric_form, split_state)
from .errors import (AssumptionViolated, CFLViolation, GaugeViolation,
                     HorizonViolation, NotTimelike, PolarSingularity,
                     WorldsheetError)
from .transform import CoordinateMap

GAP_FLOOR_FRACTION = 1e-3


class Termination(str, Enum):
    REACHED_T = "ReachedT"
    HORIZON = "HorizonViolation"
    TIMELIKE_LOST = "TimelikeLost"
    GAP_COLLAPSE = "GapCollapse"
    NUMERICAL_FAILURE = "NumericalFailure"


@dataclass
class GridParams:
    """Discretisation parameters.

    ``nodes`` grid points; ``cfl`` is ``dtau/h`` for the characteristic
    solver (at most 1) and ``dt max|lambda| / h`` for the upwind solver;
    ``interpolation`` ("linear" or "cubic") is used at feet that fall
    between nodes; ``pad`` widens open windows on each side (default: the
    distance travelled by the fastest characteristic); ``snapshot_times``
    lists output times (``0`` and ``T`` are always included);
    ``wall_time`` (seconds) ends a run with NumericalFailure once exceeded.
    """

    nodes: int = 1025
    cfl: Optional[float] = None
    interpolation: str = "linear"
    pad: Optional[float] = None
    snapshot_times: tuple = ()
    wall_time: Optional[float] = None

    def __post_init__(self):
        if self.nodes < 8:
            raise ValueError("need at least 8 nodes")
        if self.interpolation not in ("linear", "cubic"):
            raise ValueError("interpolation must be 'linear' or 'cubic'")


@dataclass
class Snapshot:
    """World-sheet fields at one time on the solver grid.

    ``theta`` holds the ``(t, theta)`` parameter of every node (for the
    characteristic solver, ``Phi(tau, vartheta)``); ``valid`` marks nodes
    inside the numerical domain of determinacy.
    """

    time: float
    theta: np.ndarray
    x: np.ndarray
    v: np.ndarray
    w: np.ndarray
    lam_minus: np.ndarray
    lam_plus: np.ndarray
    delta: np.ndarray
    horizon_gap: np.ndarray
    valid: np.ndarray
    vartheta: Optional[np.ndarray] = None
    chart: str = "cartesian"


@dataclass
class DiagnosticsReport:
    """Monitors, constraint extrema and the inequality verdicts.

    ``v_inf``: sup of all |P^mu|, |Q^mu|; ``v_one``: largest L1 norm in
    vartheta of one component; ``q_v``: space-time integral of
    ``sum |P^mu| sum |Q^nu|``; ``v_one_lines``: largest integral of |P|
    (|Q|) along a crossing straight characteristic; ``v_one_fixed``:
    largest time integral of |P| or |Q| at a fixed vartheta.
    """

    termination: Termination = Termination.REACHED_T
    message: str = ""
    t_final: float = 0.0
    steps: int = 0
    v_inf_0: float = 0.0
    v_inf: float = 0.0
    v_one_0: float = 0.0
    v_one: float = 0.0
    q_v: float = 0.0
    v_one_lines: float = 0.0
    v_one_fixed: float = 0.0
    s_drift: float = 0.0
    s_spread: float = 0.0
    max_delta: float = -np.inf
    min_horizon_gap: float = np.inf
    min_gap: float = np.inf
    kappa: float = np.nan
    null_drift: float = 0.0
    epsilon: Optional[float] = None
    verdicts: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def as_dict(self):
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["termination"] = self.termination.value
        return out


@dataclass
class SolveResult:
    snapshots: list
    diagnostics: DiagnosticsReport
    termination: Termination
    solver: str = "characteristic"
    chart: str = "cartesian"
    cmap: Optional[CoordinateMap] = None

    @property
    def ok(self):
        return self.termination is Termination.REACHED_T

    def snapshot_at(self, time):
        return min(self.snapshots, key=lambda s: abs(s.time - time))


# ----------------------------------------------------------------------
class CartesianChart:
    """Schwarzschild (or flat, m = 0) geometry in Cartesian coordinates."""

    name = "cartesian"

    def __init__(self, m, margin=1e-6):
        self.m = float(m)
        self.margin = margin

    def form(self, u, a, b):
        return metric_form(u, a, b, self.m, self.margin)

    def source(self, u, P, Q):
        return christoffel_source(P, Q, u, self.m, self.margin)

    def horizon_gap(self, u):
        if self.m == 0:
            return np.full(u.shape[:-1], np.inf)
        return np.linalg.norm(u[..., 1:4], axis=-1) - 2.0 * self.m

    def to_cartesian(self, u):
        return u

    def induced(self, u, v, w):
        """All three induced-metric components with one radial evaluation."""
        vv = -v[..., 0] * v[..., 0] + _dot3(v[..., 1:4], v[..., 1:4])
        vw = -v[..., 0] * w[..., 0] + _dot3(v[..., 1:4], w[..., 1:4])
        ww = -w[..., 0] * w[..., 0] + _dot3(w[..., 1:4], w[..., 1:4])
        m = self.m
        if m > 0:
            X = u[..., 1:4]
            r = np.sqrt(_dot3(X, X))
            if np.any(r <= 2.0 * m * (1.0 + self.margin)):
                raise HorizonViolation(f"|u| = {np.min(r):.6g} is not outside 2m")
            c = 2.0 * m / r
            f = 2.0 * m / (r * r * (r - 2.0 * m))
            Xv = _dot3(X, v[..., 1:4])
            Xw = _dot3(X, w[..., 1:4])
            vv = vv + c * v[..., 0] ** 2 + f * Xv * Xv
            vw = vw + c * v[..., 0] * w[..., 0] + f * Xv * Xw
            ww = ww + c * w[..., 0] ** 2 + f * Xw * Xw
        return InducedMetric2(vv, vw, ww)


def _reversed_data(data):
    """Time-reversed data ``q -> -q`` for backward runs."""
    q = data.q
    out = InitialData(data.p, data.dp, lambda th: -q(th), window=data.window,
                      mode=data.mode, period=data.period, shift=data.shift,
                      delta_hat=data.delta_hat, epsilon=data.epsilon,
                      q_background=-data.q_background, name=data.name + "(reversed)",
                      nodes=data.nodes)
    return out


def _shift(f, s, direction, periodic, order):
    """Values of ``f`` at ``x_j - direction * s h`` (``0 < s <= 1``).

    ``direction`` is +1 for right-moving fields.  Constant extension or
    periodic wrap outside the grid.
    """
    n = f.shape[0]
    ext = 2
    if periodic:
        idx = np.arange(-ext, n + ext) % n
        g = f[idx]
    else:
        g = np.concatenate([np.repeat(f[:1], ext, 0), f, np.repeat(f[-1:], ext, 0)])
    j = np.arange(ext, n + ext)
    d = direction
    if s == 1.0:
        return g[j - d]
    if order == "linear":
        return (1.0 - s) * g[j] + s * g[j - d]
    # four-point Lagrange at offset -d*s from nodes j+d, j, j-d, j-2d
    x = -s
    nodes = (1.0, 0.0, -1.0, -2.0)
    out = np.zeros_like(f)
    for a, xa in enumerate(nodes):
        wgt = 1.0
        for b, xb in enumerate(nodes):
            if a != b:
                wgt *= (x - xb) / (xa - xb)
        out = out + wgt * g[j + d * int(xa)]
    return out


def _stop_schedule(T, dt_nominal, stops):
    """Lazy ``(dt, is_stop)`` steps reaching every stop time exactly, and their count."""
    times = sorted({float(x) for x in stops if 0.0 < x < T} | {float(T)})
    segments = []
    t = 0.0
    for stop in times:
        span = stop - t
        n = int(np.floor(span / dt_nominal + 1e-9))
        rem = span - n * dt_nominal
        if rem > 1e-9 * dt_nominal:
            segments.append((n, rem))
        elif n:
            segments.append((n - 1, dt_nominal))
        else:
            continue
        t = stop

    def steps():
        for n, last in segments:
            for _ in range(n):
                yield dt_nominal, False
            yield last, True

    return steps(), sum(n + 1 for n, _ in segments)


class _CharacteristicMonitors:
    """Running monitors of the characteristic solver on valid nodes."""

    def __init__(self, n, h, n_lines, periodic, S0, p_origin):
        self.h = h
        self.n = n
        self.periodic = periodic
        self.S0 = S0.copy()
        self.p_origin = p_origin
        self.v_inf_0 = None
        self.v_one_0 = None
        self.v_inf = 0.0
        self.v_one = 0.0
        self.q_v = 0.0
        self.fixed = np.zeros((2, n, 4))
        size = n if periodic else n + n_lines + 1
        self.n_lines = n_lines
        self.lines = np.zeros((2, size, 4))
        self.s_drift = 0.0
        self.s_spread = 0.0
        self.max_delta = -np.inf
        self.min_horizon = np.inf
        self.min_gap = np.inf
        self.null_drift = 0.0
        self._level = None

    def level(self, tau, S, P, Q, valid, delta, hgap, gap, null):
        """Record the pointwise monitors of one time level."""
        aP = np.abs(P[valid])
        aQ = np.abs(Q[valid])
        if aP.size:
            vinf = float(max(aP.max(), aQ.max()))
            v1 = float(max(aP.sum(0).max(), aQ.sum(0).max()) * self.h)
            qv = float(np.sum(aP.sum(1) * aQ.sum(1)) * self.h)
            self.max_delta = max(self.max_delta, float(delta[valid].max()))
            self.min_horizon = min(self.min_horizon, float(hgap[valid].min()))
            self.min_gap = min(self.min_gap, float(gap[valid].min()))
            self.null_drift = max(self.null_drift, float(null[valid].max()))
            self.s_drift = max(self.s_drift, float(np.abs(S[valid] - self.S0[valid]).max()))
            self.s_spread = max(self.s_spread, float(np.linalg.norm(
                S[valid, 1:4] - self.p_origin[1:4], axis=1).max()))
        else:
            vinf = v1 = qv = 0.0
        if self.v_inf_0 is None:
            self.v_inf_0, self.v_one_0 = vinf, v1
        self.v_inf = max(self.v_inf, vinf)
        self.v_one = max(self.v_one, v1)
        j = np.nonzero(valid)[0]
        k = int(round(tau / self.h))
        if self.periodic:
            im, ip = (j + k) % self.n, (j - k) % self.n
        else:
            im, ip = j + k, j - k + self.n_lines
        self._level = (qv, j, im, ip, aP, aQ)

    def integrate(self, weight):
        """Add ``weight`` times the current level to the time integrals."""
        qv, j, im, ip, aP, aQ = self._level
        self.q_v += weight * qv
        self.fixed[0, j] += weight * aP
        self.fixed[1, j] += weight * aQ
        # |P| along slope -1 lines (key j + k), |Q| along slope +1 (key j - k)
        # keys are distinct within one level, so fancy-index addition is exact
        self.lines[0, im] += weight * aP
        self.lines[1, ip] += weight * aQ

    def fill(self, report, valid_final):
        report.v_inf_0 = self.v_inf_0 or 0.0
        report.v_inf = self.v_inf
        report.v_one_0 = self.v_one_0 or 0.0
        report.v_one = self.v_one
        report.q_v = self.q_v
        report.v_one_lines = float(self.lines.max())
        report.v_one_fixed = float(self.fixed[:, valid_final].max()) if np.any(valid_final) else 0.0
        report.s_drift = self.s_drift
        report.s_spread = self.s_spread
        report.max_delta = self.max_delta
        report.min_horizon_gap = self.min_horizon
        report.min_gap = self.min_gap
        report.null_drift = self.null_drift


class _SpeedTable:
    """Foot points and speeds of the characteristic chart on grid nodes.

    At times that are whole multiples of ``h`` the feet are grid nodes and
    are read from a table built once; otherwise the chart is queried.
    """

    def __init__(self, cmap, vt, h, n_steps, periodic):
        self.cmap = cmap
        self.vt = vt
        self.h = h
        self.n = len(vt)
        self.periodic = periodic
        init = cmap.init
        if periodic:
            self.offset = 0
            ext = vt
        else:
            self.offset = n_steps + 1
            ext = vt[0] + h * np.arange(-self.offset, self.n + self.offset)
        self.theta = cmap.Phi0(ext)
        self.lm = init.minus(self.theta)
        self.lp = init.plus(self.theta)
        self.period = init.period if periodic else None

    def _lookup(self, idx):
        if self.periodic:
            wraps = np.floor_divide(idx, self.n)
            r = idx - wraps * self.n
            return self.theta[r] + wraps * self.period, self.lm[r], self.lp[r]
        i = idx + self.offset
        return self.theta[i], self.lm[i], self.lp[i]

    def feet(self, tau):
        """``(theta_-, theta_+, lam~_-, lam~_+)`` at every node."""
        k = tau / self.h
        kr = int(round(k))
        if abs(k - kr) < 1e-9 and (self.periodic or kr <= self.offset - 1):
            j = np.arange(self.n)
            tm, lm, _ = self._lookup(j - kr)
            tp, _, lp = self._lookup(j + kr)
            return tm, tp, lm, lp
        tm, tp = self.cmap.feet(tau, self.vt)
        init = self.cmap.init
        return tm, tp, init.minus(tm), init.plus(tp)


def _reconstruct(P, Q, lm, lp):
    lm = lm[:, None]
    lp = lp[:, None]
    gap = lp - lm
    return (lp * P - lm * Q) / gap, (Q - P) / gap


def _level_diagnostics(chart, S, P, Q, lm, lp):
    v, w = _reconstruct(P, Q, lm, lp)
    g = chart.induced(S, v, w)
    null = np.maximum(np.abs(chart.form(S, P, P)), np.abs(chart.form(S, Q, Q)))
    return v, w, g.delta, chart.horizon_gap(S), lp - lm, null


def solve_characteristic(data, m, T, grid=None, delta_hat=None, quad_tol=1e-10,
                         require_h3=True, backward=False):
    """Integrate the (S, P, Q) system in the characteristic chart up to ``T``.

    Raises HorizonViolation or NotTimelike for inadmissible data and
    AssumptionViolated when H1-H3 fail (unless ``require_h3`` is False).
    Run-time breakdowns end the run with the matching Termination.
    """
    grid = grid or GridParams()
    cfl = 1.0 if grid.cfl is None else float(grid.cfl)
    if not 0.0 < cfl <= 1.0:
        raise CFLViolation(f"characteristic solver needs 0 < cfl <= 1, got {cfl}")
    if T < 0:
        raise ValueError("T must be nonnegative; use backward=True")
    if backward:
        data = _reversed_data(data)
    if delta_hat is not None:
        data.delta_hat = delta_hat
    dh = data.margin(m)
    init = lambda0_from_data(data, m)
    report = check_speed_assumptions(init)
    if require_h3 and not report.ok:
        raise AssumptionViolated(report.summary(), report)
    cmap = CoordinateMap(init, quad_tol)
    chart = CartesianChart(m)
    periodic = data.mode == "periodic"
    N = grid.nodes
    if periodic:
        h = cmap.vartheta_period / N
        vt = np.arange(N) * h
    else:
        a, b = data.window
        va, vb = cmap.Theta0(np.array([a, b]))
        pad = float(T) * 1.02 if grid.pad is None else grid.pad
        vt = np.linspace(va - pad, vb + pad, N)
        h = vt[1] - vt[0]
    steps, n_steps = _stop_schedule(T, cfl * h, grid.snapshot_times)
    n_lines = int(np.ceil(T / h)) + 2
    table = _SpeedTable(cmap, vt, h, n_lines, periodic)

    tm, tp, lm, lp = table.feet(0.0)
    p, dp, q = data.evaluate(tm)
    S = p.copy()
    P = q + lm[:, None] * dp
    Q = q + lp[:, None] * dp
    p_origin = data.evaluate(np.array([0.0]))[0][0]
    mon = _CharacteristicMonitors(N, h, n_lines, periodic, S, p_origin)
    diag = DiagnosticsReport(kappa=init.kappa, epsilon=data.epsilon)
    kappa = init.kappa
    order = grid.interpolation
    snapshots = []

    def valid_mask(tau):
        if periodic:
            return np.ones(N, dtype=bool)
        tol = 1e-9 * h
        return (vt - tau >= vt[0] - tol) & (vt + tau <= vt[-1] + tol)

    def snapshot(tau, S, P, Q, feet, levels):
        tm, tp, lm, lp = feet
        v, w, delta, hgap, _, _ = levels
        theta = 0.5 * (tp + tm) + 0.5 * (cmap.H(tp) - cmap.H(tm))
        sgn = -1.0 if backward else 1.0
        snapshots.append(Snapshot(sgn * tau, theta, S.copy(), sgn * v, w.copy(),
                                  lm.copy(), lp.copy(), delta, hgap, valid_mask(tau),
                                  vartheta=vt.copy()))

    def sources(S, P, Q):
        return -chart.source(S, P, Q)

    tau = 0.0
    feet = (tm, tp, lm, lp)
    levels = _level_diagnostics(chart, S, P, Q, lm, lp)
    mon.level(tau, S, P, Q, valid_mask(tau), levels[2], levels[3], levels[4], levels[5])
    snapshot(tau, S, P, Q, feet, levels)
    termination = Termination.REACHED_T
    message = ""
    n_done = 0
    try:
        src = sources(S, P, Q)
    except HorizonViolation as exc:
        src = None
        termination, message = Termination.HORIZON, str(exc)
    deadline = None if grid.wall_time is None else time.perf_counter() + grid.wall_time
    for dtau, stop in steps if src is not None else ():
        if deadline is not None and time.perf_counter() > deadline:
            termination = Termination.NUMERICAL_FAILURE
            message = (f"wall-clock budget {grid.wall_time:g} s exceeded at tau={tau:.6g} "
                       f"after {n_done} of {n_steps} steps")
            break
        s = dtau / h
        try:
            Pf = _shift(P, s, 1, periodic, order)
            Qf = _shift(Q, s, -1, periodic, order)
            sP = _shift(src, s, 1, periodic, order)
            sQ = _shift(src, s, -1, periodic, order)
            S1 = S + dtau * 0.5 * (P + Q)
            P1 = Pf + dtau * sP
            Q1 = Qf + dtau * sQ
            src1 = sources(S1, P1, Q1)
            S = S + 0.5 * dtau * (0.5 * (P + Q) + 0.5 * (P1 + Q1))
            P = Pf + 0.5 * dtau * (sP + src1)
            Q = Qf + 0.5 * dtau * (sQ + src1)
        except HorizonViolation as exc:
            termination, message = Termination.HORIZON, str(exc)
            break
        mon.integrate(0.5 * dtau)
        tau += dtau
        n_done += 1
        valid = valid_mask(tau)
        if not (np.all(np.isfinite(S[valid])) and np.all(np.isfinite(P[valid]))
                and np.all(np.isfinite(Q[valid]))):
            termination, message = Termination.NUMERICAL_FAILURE, f"non-finite values at tau={tau:.6g}"
            break
        feet = table.feet(tau)
        lm, lp = feet[2], feet[3]
        gap = lp - lm
        if np.min(gap[valid]) < GAP_FLOOR_FRACTION * kappa:
            j = int(np.nonzero(valid)[0][np.argmin(gap[valid])])
            termination = Termination.GAP_COLLAPSE
            message = (f"gap {gap[j]:.3g} below {GAP_FLOOR_FRACTION:g} kappa at "
                       f"tau={tau:.6g}, vartheta={vt[j]:.6g}")
            break
        try:
            levels = _level_diagnostics(chart, S, P, Q, lm, lp)
            src = sources(S, P, Q)
        except HorizonViolation as exc:
            termination, message = Termination.HORIZON, str(exc)
            break
        v, w, delta, hgap, gap, null = levels
        mon.level(tau, S, P, Q, valid, delta, hgap, gap, null)
        mon.integrate(0.5 * dtau)
        if m > 0 and np.min(hgap[valid]) <= 0.5 * dh:
            termination = Termination.HORIZON
            message = f"|S| - 2m = {np.min(hgap[valid]):.6g} <= delta_hat/2 at tau={tau:.6g}"
            break
        if np.max(delta[valid]) >= 0:
            termination = Termination.TIMELIKE_LOST
            message = f"delta = {np.max(delta[valid]):.3g} >= 0 at tau={tau:.6g}"
            break
        if stop:
            snapshot(tau, S, P, Q, feet, levels)
    if termination is not Termination.REACHED_T and n_done and snapshots[-1].time != tau:
        try:
            snapshot(tau, S, P, Q, feet, _level_diagnostics(chart, S, P, Q, feet[2], feet[3]))
        except WorldsheetError:
            pass
    diag.termination = termination
    diag.message = message
    diag.t_final = -tau if backward else tau
    diag.steps = n_done
    mon.fill(diag, valid_mask(tau))
    diag.extra.update({"h": h, "nodes": N, "quadrature_error": cmap.quadrature_error,
                       "planned_steps": n_steps,
                       "delta_hat": dh, "assumptions": report.summary()})
    result = SolveResult(snapshots, diag, termination, "characteristic", "cartesian", cmap)
    estimate_monitors(result)
    return result


def estimate_monitors(result, epsilon=None):
    """Fill the inequality verdicts of ``result.diagnostics`` and return it.

    Verdicts: the sup norm of P, Q at most doubles; the L1 norm at most
    doubles; the drift of S at a fixed node is bounded by the time
    integrals of |P| and |Q| there; the run stays time-like, outside the
    horizon margin and away from gap collapse.  With ``epsilon`` the
    measured constants ``V1(0)/eps``, ``QV/eps^2``, line and fixed-node
    integrals over ``eps`` are reported.
    """
    d = result.diagnostics
    eps = d.epsilon if epsilon is None else epsilon
    dh = d.extra.get("delta_hat", 0.0)
    v = {}
    v["timelike"] = bool(d.max_delta < 0)
    v["horizon_margin"] = bool(d.min_horizon_gap >= 0.5 * dh)
    v["gap"] = bool(d.min_gap >= GAP_FLOOR_FRACTION * d.kappa) if np.isfinite(d.kappa) else True
    v["sup_norm_doubling"] = bool(d.v_inf <= 2.0 * d.v_inf_0 + 1e-300)
    if result.solver == "characteristic":
        v["l1_doubling"] = bool(d.v_one <= 2.0 * d.v_one_0 + 1e-300)
        v["position_drift"] = bool(d.s_drift <= 1.01 * d.v_one_fixed + 1e-14)
    d.verdicts = v
    if eps:
        d.extra["k0"] = d.v_one_0 / eps
        d.extra["k1"] = d.q_v / eps**2
        d.extra["k2"] = d.v_one_lines / eps
        d.extra["k3"] = d.v_one_fixed / eps
    return d


# ----------------------------------------------------------------------
def _one_sided(f, h, periodic):
    """Second-order backward and forward differences along axis 0."""
    if periodic:
        back = (3.0 * f - 4.0 * np.roll(f, 1, 0) + np.roll(f, 2, 0)) / (2.0 * h)
        fwd = (-3.0 * f + 4.0 * np.roll(f, -1, 0) - np.roll(f, -2, 0)) / (2.0 * h)
        return back, fwd
    g = np.concatenate([f[:1], f[:1], f, f[-1:], f[-1:]])
    back = (3.0 * g[2:-2] - 4.0 * g[1:-3] + g[:-4]) / (2.0 * h)
    fwd = (-3.0 * g[2:-2] + 4.0 * g[3:-1] - g[4:]) / (2.0 * h)
    return back, fwd


def chart_speeds(chart, U):
    u, v, w = split_state(U)
    return eigenvalues(chart.induced(u, v, w))


def upwind_rhs(chart, U, h, periodic):
    """``-(A U_theta + B)`` with derivatives upwinded per characteristic field.

    The lambda_+ field ``P = v + lambda_- w`` and the lambda_- field
    ``Q = v + lambda_+ w`` are differenced (with frozen speeds) from the
    upwind side of their own speed, then mapped back.
    """
    u, v, w = split_state(U)
    lm, lp = eigenvalues(chart.induced(u, v, w))
    vb, vf = _one_sided(v, h, periodic)
    wb, wf = _one_sided(w, h, periodic)
    right_p = (lp > 0)[:, None]
    right_m = (lm > 0)[:, None]
    lmc = lm[:, None]
    lpc = lp[:, None]
    dP = np.where(right_p, vb, vf) + lmc * np.where(right_p, wb, wf)
    dQ = np.where(right_m, vb, vf) + lpc * np.where(right_m, wb, wf)
    gap = lpc - lmc
    Av = (lpc**2 * dP - lmc**2 * dQ) / gap
    Aw = (lmc * dQ - lpc * dP) / gap
    P = v + lmc * w
    Q = v + lpc * w
    Bv = chart.source(u, P, Q)
    return join_state(v, -Av - Bv, -Aw)


def _chart_speed_init(data, chart, nodes=None):
    from .transform import LambdaInitial

    def both(th):
        U = data.state(th)
        return chart_speeds(chart, U)

    return LambdaInitial(lambda th: both(th)[0], lambda th: both(th)[1],
                         window=data.window, mode=data.mode, period=data.period,
                         nodes=nodes or data.nodes)


UPWIND_CFL_MAX = 0.8


def solve_upwind_raw(data, m, T, grid=None, chart=None, delta_hat=None,
                     require_h3=True, backward=False):
    """Integrate ``U_t + A U_theta + B = 0`` directly in ``(t, theta)``.

    ``data`` must be expressed in the coordinates of ``chart`` (default the
    Cartesian Schwarzschild chart of mass ``m``).  The time step is
    ``cfl h / max|lambda|`` with SSP-RK3; ``cfl`` above
    ``UPWIND_CFL_MAX`` raises CFLViolation.
    """
    grid = grid or GridParams()
    cfl = 0.4 if grid.cfl is None else float(grid.cfl)
    if not 0.0 < cfl <= UPWIND_CFL_MAX:
        raise CFLViolation(f"upwind solver needs 0 < cfl <= {UPWIND_CFL_MAX}, got {cfl}")
    chart = chart or CartesianChart(m)
    if backward:
        data = _reversed_data(data)
    if delta_hat is not None:
        data.delta_hat = delta_hat
    dh = data.margin(m)
    th0 = data.grid()
    if m > 0:
        hg = chart.horizon_gap(data.evaluate(th0)[0])
        if np.min(hg) < dh:
            raise HorizonViolation(f"initial r - 2m = {np.min(hg):.6g} below delta_hat = {dh:g}")
    init = _chart_speed_init(data, chart)
    report = check_speed_assumptions(init)
    if require_h3 and not report.ok:
        raise AssumptionViolated(report.summary(), report)
    kappa = init.kappa
    periodic = data.mode == "periodic"
    N = grid.nodes
    g0 = init.grid()
    speed0 = float(max(np.max(np.abs(init.minus(g0))), np.max(np.abs(init.plus(g0)))))
    if periodic:
        h = data.period / N
        theta = np.arange(N) * h
    else:
        a, b = data.window
        pad = 1.1 * T * speed0 if grid.pad is None else grid.pad
        theta = np.linspace(a - pad, b + pad, N)
        h = theta[1] - theta[0]
    U = data.state(theta)
    diag = DiagnosticsReport(kappa=kappa, epsilon=data.epsilon)
    snapshots = []
    reach = 0.0
    sgn = -1.0 if backward else 1.0

    def valid_mask():
        if periodic:
            return np.ones(N, dtype=bool)
        return (theta - theta[0] >= reach) & (theta[-1] - theta >= reach)

    def levels(U):
        u, v, w = split_state(U)
        g = chart.induced(u, v, w)
        lm, lp = eigenvalues(g)
        return u, v, w, g.delta, chart.horizon_gap(u), lm, lp

    def record(t, lv, store):
        u, v, w, delta, hgap, lm, lp = lv
        valid = valid_mask()
        P = v + lm[:, None] * w
        Q = v + lp[:, None] * w
        if np.any(valid):
            vinf = float(max(np.abs(P[valid]).max(), np.abs(Q[valid]).max()))
            if diag.steps == 0 and t == 0.0:
                diag.v_inf_0 = vinf
            diag.v_inf = max(diag.v_inf, vinf)
            diag.max_delta = max(diag.max_delta, float(delta[valid].max()))
            diag.min_horizon_gap = min(diag.min_horizon_gap, float(hgap[valid].min()))
            diag.min_gap = min(diag.min_gap, float((lp - lm)[valid].min()))
        if store:
            snapshots.append(Snapshot(sgn * t, theta.copy(), u.copy(), sgn * v, w.copy(),
                                      lm, lp, delta, hgap, valid, chart=chart.name))
        return lm, lp, delta, hgap, valid

    t = 0.0
    termination = Termination.REACHED_T
    message = ""
    try:
        lv = levels(U)
    except NotTimelike as exc:
        raise NotTimelike(f"initial data: {exc}")
    lm, lp, *_ = record(t, lv, True)
    stops = sorted({float(x) for x in grid.snapshot_times if 0.0 < x < T} | {float(T)})
    deadline = None if grid.wall_time is None else time.perf_counter() + grid.wall_time
    while t < T - 1e-12 * max(T, 1.0):
        if deadline is not None and time.perf_counter() > deadline:
            termination = Termination.NUMERICAL_FAILURE
            message = f"wall-clock budget {grid.wall_time:g} s exceeded at t={t:.6g}"
            break
        speed = float(max(np.max(np.abs(lm)), np.max(np.abs(lp))))
        dt = cfl * h / speed
        nxt = min(s for s in stops if s > t + 1e-12 * max(T, 1.0))
        stop = t + dt >= nxt - 1e-12 * max(T, 1.0)
        if stop:
            dt = nxt - t
        try:
            U1 = U + dt * upwind_rhs(chart, U, h, periodic)
            U2 = 0.75 * U + 0.25 * (U1 + dt * upwind_rhs(chart, U1, h, periodic))
            U = U / 3.0 + 2.0 / 3.0 * (U2 + dt * upwind_rhs(chart, U2, h, periodic))
        except HorizonViolation as exc:
            termination, message = Termination.HORIZON, str(exc)
            break
        except PolarSingularity as exc:
            termination, message = Termination.NUMERICAL_FAILURE, f"polar axis: {exc}"
            break
        except NotTimelike as exc:
            termination, message = Termination.TIMELIKE_LOST, str(exc)
            break
        except WorldsheetError as exc:
            termination, message = Termination.NUMERICAL_FAILURE, str(exc)
            break
        t = nxt if stop else t + dt
        reach += dt * speed
        diag.steps += 1
        valid = valid_mask()
        if not np.all(np.isfinite(U[valid])):
            termination, message = Termination.NUMERICAL_FAILURE, f"non-finite values at t={t:.6g}"
            break
        try:
            lv = levels(U)
        except NotTimelike as exc:
            termination, message = Termination.TIMELIKE_LOST, str(exc)
            break
        except HorizonViolation as exc:
            termination, message = Termination.HORIZON, str(exc)
            break
        except WorldsheetError as exc:
            termination, message = Termination.NUMERICAL_FAILURE, str(exc)
            break
        lm, lp, delta, hgap, valid = record(t, lv, stop)
        if m > 0 and np.min(hgap[valid]) <= 0.5 * dh:
            termination = Termination.HORIZON
            message = f"r - 2m = {np.min(hgap[valid]):.6g} <= delta_hat/2 at t={t:.6g}"
            break
        gap = lp - lm
        if np.min(gap[valid]) < GAP_FLOOR_FRACTION * kappa:
            termination = Termination.GAP_COLLAPSE
            message = f"gap {np.min(gap[valid]):.3g} below {GAP_FLOOR_FRACTION:g} kappa at t={t:.6g}"
            break
        if np.max(delta[valid]) >= 0:
            termination = Termination.TIMELIKE_LOST
            message = f"delta >= 0 at t={t:.6g}"
            break
    diag.termination = termination
    diag.message = message
    diag.t_final = sgn * t
    diag.extra.update({"h": h, "nodes": N, "delta_hat": dh, "assumptions": report.summary()})
    result = SolveResult(snapshots, diag, termination, "upwind", chart.name)
    estimate_monitors(result)
    return result


# ----------------------------------------------------------------------
def check_flat_gauge(data, tol=1e-10, nodes=None):
    """Raise GaugeViolation unless ``<q, p'> = 0`` and ``<q,q> = -<p',p'>``."""
    th = data.grid(nodes)
    _, dp, q = data.evaluate(th)
    eta = np.array([-1.0, 1.0, 1.0, 1.0])
    g01 = np.sum(eta * q * dp, axis=1)
    g00 = np.sum(eta * q * q, axis=1)
    g11 = np.sum(eta * dp * dp, axis=1)
    err = float(max(np.max(np.abs(g01)), np.max(np.abs(g00 + g11))))
    if err > tol:
        raise GaugeViolation(f"orthonormal gauge violated by {err:.3g}")
    return err


_GLX, _GLW = np.polynomial.legendre.leggauss(16)


def dalembert_oracle(data, t, theta, cells=64, gauge_tol=1e-10):
    """Flat orthonormal-gauge solution
    ``x(t, theta) = (p(theta+t) + p(theta-t))/2 + (1/2) int_{theta-t}^{theta+t} q``.
    """
    check_flat_gauge(data, gauge_tol)
    t, theta = np.broadcast_arrays(np.asarray(t, dtype=float),
                                   np.atleast_1d(np.asarray(theta, dtype=float)))
    shape = theta.shape
    t = t.ravel()
    theta = theta.ravel()
    lo = theta - t
    hi = theta + t
    pl = data.evaluate(lo)[0]
    ph = data.evaluate(hi)[0]
    edges = lo[:, None] + (hi - lo)[:, None] * np.linspace(0.0, 1.0, cells + 1)
    half = 0.5 * (edges[:, 1:] - edges[:, :-1])
    mid = 0.5 * (edges[:, 1:] + edges[:, :-1])
    pts = mid[..., None] + half[..., None] * _GLX
    qv = data.evaluate(pts.ravel())[2].reshape(pts.shape + (4,))
    integral = np.einsum("nckd,k,nc->nd", qv, _GLW, half)
    out = 0.5 * (pl + ph) + 0.5 * integral
    return out.reshape(shape + (4,))
