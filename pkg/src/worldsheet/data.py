"""Initial data for the string Cauchy problem and its admissibility checks.

Data are ``x(0, theta) = p(theta)`` and ``x_t(0, theta) = q(theta)`` with
values in R^4.  Two extension modes cover the real line:

* ``open``: data live on a window ``[a, b]``; outside it ``q`` and
  ``p_theta`` are frozen at their edge values (so ``p`` is affine).
* ``periodic``: ``p(theta + period) = p(theta) + shift`` and ``q`` is
  periodic, which describes closed loops (``shift = 0``) and quasi-periodic
  flat waves.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from .dynamics import eigenvalues, induced_metric_cartesian, join_state
from .errors import HorizonViolation, NotTimelike
from .transform import LambdaInitial


@dataclass
class InitialData:
    """Position ``p``, its derivative ``dp`` and velocity ``q``.

    Callables map an array of ``theta`` of shape (n,) to (n, 4) inside the
    window; :meth:`evaluate` applies the extension mode.  ``q_background``
    is subtracted in the background-adjusted smallness norms.
    """

    p: Callable
    dp: Callable
    q: Callable
    window: tuple = (-1.0, 1.0)
    mode: str = "open"
    period: Optional[float] = None
    shift: np.ndarray = field(default_factory=lambda: np.zeros(4))
    delta_hat: Optional[float] = None
    epsilon: Optional[float] = None
    q_background: np.ndarray = field(default_factory=lambda: np.zeros(4))
    name: str = "custom"
    nodes: int = 2001

    def __post_init__(self):
        if self.mode not in ("open", "periodic"):
            raise ValueError("mode must be 'open' or 'periodic'")
        self.shift = np.asarray(self.shift, dtype=float)
        self.q_background = np.asarray(self.q_background, dtype=float)
        if self.mode == "periodic":
            if not self.period or self.period <= 0:
                raise ValueError("periodic data need a positive period")
            self.window = (0.0, float(self.period))

    def grid(self, nodes=None):
        return np.linspace(*self.window, nodes or self.nodes)

    def evaluate(self, theta):
        """``(p, dp, q)`` at arbitrary ``theta`` with the extension applied.

        Accepts any array shape; outputs carry a trailing axis of length 4.
        """
        theta = np.asarray(theta, dtype=float)
        shape = theta.shape
        theta = theta.ravel()
        if self.mode == "periodic":
            n = np.floor(theta / self.period)
            red = theta - n * self.period
            p, dp, q = self.p(red), self.dp(red), self.q(red)
            p = p + n[:, None] * self.shift
        else:
            a, b = self.window
            c = np.clip(theta, a, b)
            p, dp, q = self.p(c), self.dp(c), self.q(c)
            p = p + (theta - c)[:, None] * dp
        return tuple(np.reshape(x, shape + (4,)) for x in (p, dp, q))

    def state(self, theta):
        """World-sheet state ``U = (p, q, dp)`` at ``t = 0``."""
        p, dp, q = self.evaluate(theta)
        return join_state(p, q, dp)

    def margin(self, m):
        return 0.1 * m if self.delta_hat is None else self.delta_hat

    # ----------------------------------------------------------------
    @classmethod
    def from_samples(cls, theta, p, q, mode="open", **kw):
        """Cubic-spline data from samples on a uniform grid."""
        theta = np.asarray(theta, dtype=float)
        d = np.diff(theta)
        if not np.allclose(d, d[0], rtol=1e-9, atol=0):
            raise ValueError("samples must lie on a uniform grid")
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if mode == "periodic":
            period = kw.pop("period", theta[-1] - theta[0])
            shift = np.asarray(kw.pop("shift", p[-1] - p[0]), dtype=float)
            ps = CubicSpline(theta, p - np.outer(theta - theta[0], shift) / period,
                             bc_type="periodic")
            qs = CubicSpline(theta, q, bc_type="periodic")

            def pf(x):
                return ps(x) + np.outer(x - theta[0], shift) / period

            def dpf(x):
                return ps(x, 1) + shift / period

            return cls(pf, dpf, qs, mode="periodic", period=period, shift=shift,
                       nodes=len(theta), **kw)
        ps = CubicSpline(theta, p)
        qs = CubicSpline(theta, q)
        return cls(ps, lambda x: ps(x, 1), qs, (theta[0], theta[-1]),
                   nodes=len(theta), **kw)


def _stack(th, *cols):
    """Stack columns into (n, k), broadcasting scalars against ``th``."""
    th = np.asarray(th, dtype=float)
    return np.stack([np.broadcast_to(np.asarray(c, dtype=float), th.shape) for c in cols],
                    axis=-1)


def epsilon_family(p_bar, p_hat, dp_hat, q_hat, epsilon, **kw):
    """``p = p_bar + eps (0, p_hat)``, ``q = (1, eps q_hat)``.

    ``p_hat``, ``dp_hat`` and ``q_hat`` map theta (n,) to (n, 3);
    ``|dp_hat| = 1`` is the normalisation of the family.
    """
    p_bar = np.asarray(p_bar, dtype=float)

    def p(th):
        out = np.tile(p_bar, (len(th), 1))
        out[:, 1:] += epsilon * p_hat(th)
        return out

    def dp(th):
        out = np.zeros((len(th), 4))
        out[:, 1:] = epsilon * dp_hat(th)
        return out

    def q(th):
        out = np.zeros((len(th), 4))
        out[:, 0] = 1.0
        out[:, 1:] = epsilon * q_hat(th)
        return out

    kw.setdefault("q_background", np.array([1.0, 0.0, 0.0, 0.0]))
    return InitialData(p, dp, q, epsilon=epsilon, **kw)


def epsilon_loop(epsilon, r0=10.0, scale=1.0, **kw):
    """Closed circular loop of the epsilon family at rest.

    ``p_hat = scale (sin(theta/scale), cos(theta/scale), 0)`` has unit
    derivative; the loop has radius ``eps * scale`` and is centred at
    ``(r0, 0, 0)``.
    """
    s = float(scale)

    def p_hat(th):
        return _stack(th, s * np.sin(th / s), s * np.cos(th / s), 0.0 * th)

    def dp_hat(th):
        return _stack(th, np.cos(th / s), -np.sin(th / s), 0.0 * th)

    def q_hat(th):
        return np.zeros((len(th), 3))

    kw.setdefault("name", f"epsilon-loop(eps={epsilon:g})")
    return epsilon_family([0.0, r0, 0.0, 0.0], p_hat, dp_hat, q_hat, epsilon,
                          mode="periodic", period=2.0 * np.pi * s, **kw)


def epsilon_line(epsilon, r0=10.0, window=(-50.0, 50.0), **kw):
    """Straight infinite string of the epsilon family at rest, along x^2."""

    def p_hat(th):
        return _stack(th, 0.0 * th, th, 0.0 * th)

    def dp_hat(th):
        return _stack(th, 0.0 * th, 1.0 + 0.0 * th, 0.0 * th)

    def q_hat(th):
        return np.zeros((len(th), 3))

    kw.setdefault("name", f"epsilon-line(eps={epsilon:g})")
    return epsilon_family([0.0, r0, 0.0, 0.0], p_hat, dp_hat, q_hat, epsilon,
                          window=window, **kw)


def compact_patch(epsilon, r0=10.0, b=0.5, window=(-20.0, 20.0), **kw):
    """Small data with finite total length and integrable velocity.

    ``p = (0, r0 + eps gd(theta), 0, 0)`` and
    ``q = eps sech(theta) (1, 0, b cos(theta), 0)``, with ``gd`` the
    Gudermannian.  Both ``int |dp|`` and ``int |q|`` are O(eps) and the
    speeds ``+-sqrt(A (A - b^2 cos^2))`` are O(1); ``b^2 < A`` is required.
    """

    def p(th):
        return _stack(th, 0.0, r0 + epsilon * 2.0 * np.arctan(np.tanh(th / 2.0)), 0.0, 0.0)

    def dp(th):
        return _stack(th, 0.0, epsilon / np.cosh(th), 0.0, 0.0)

    def q(th):
        s = epsilon / np.cosh(th)
        return _stack(th, s, 0.0, b * np.cos(th) * s, 0.0)

    kw.setdefault("name", f"compact-patch(eps={epsilon:g})")
    return InitialData(p, dp, q, window=window, epsilon=epsilon, **kw)


def straight_string(r0=10.0, velocity=None, window=(-40.0, 40.0), **kw):
    """Straight string through ``(r0, 0, 0)`` along x^2.

    ``velocity(theta)`` returns (n, 3) spatial velocities (default: rest);
    the time component of ``q`` is 1.
    """

    def p(th):
        return _stack(th, 0.0, r0, th, 0.0)

    def dp(th):
        return _stack(th, 0.0, 0.0, 1.0, 0.0)

    def q(th):
        out = np.zeros((len(th), 4))
        out[:, 0] = 1.0
        if velocity is not None:
            out[:, 1:] = velocity(th)
        return out

    kw.setdefault("name", "straight-string")
    return InitialData(p, dp, q, window=window, **kw)


def standing_wave(a=0.5):
    """Flat orthonormal-gauge standing wave with ``x^2 = a sin(theta) cos(t)``.

    ``p = (0, E(theta + pi/2 | a^2) - E(pi/2 | a^2), a sin(theta), 0)`` with
    the incomplete elliptic integral E, ``q = (1, 0, 0, 0)``.  The data are
    periodic up to the shift ``4 E(a^2)`` in ``p^1``.
    """
    if not 0 <= a < 1:
        raise ValueError("need 0 <= a < 1")
    k = a * a
    e0 = special.ellipeinc(np.pi / 2, k)

    def p(th):
        return _stack(th, 0.0, special.ellipeinc(th + np.pi / 2, k) - e0,
                      a * np.sin(th), 0.0)

    def dp(th):
        return _stack(th, 0.0, np.sqrt(1.0 - k * np.cos(th) ** 2), a * np.cos(th), 0.0)

    def q(th):
        return _stack(th, 1.0, 0.0 * th, 0.0, 0.0)

    shift = np.array([0.0, 4.0 * special.ellipe(k), 0.0, 0.0])
    return InitialData(p, dp, q, mode="periodic", period=2.0 * np.pi, shift=shift,
                       name=f"standing-wave(a={a:g})")


def smooth_bump(x):
    """C-infinity bump supported on (-1, 1) with value 1 at 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - x[inside] ** 2))
    return out


def boosted_pulse(a=0.5, width=4.0, window=(-12.0, 12.0)):
    """Flat orthonormal-gauge data: ``p = (0, theta, 0, 0)``,
    ``q = (cosh chi, 0, 0, sinh chi)`` with ``chi = a bump(theta/width)``.
    """

    def chi(th):
        return a * smooth_bump(th / width)

    def p(th):
        return _stack(th, 0.0, th, 0.0, 0.0)

    def dp(th):
        return _stack(th, 0.0, 1.0, 0.0, 0.0)

    def q(th):
        c = chi(th)
        return _stack(th, np.cosh(c), 0.0, 0.0, np.sinh(c))

    return InitialData(p, dp, q, window=window, name=f"boosted-pulse(a={a:g})")


def h3_violating(amplitude=1.5, r0=None, window=(-10.0, 10.0)):
    """Data whose speeds ``-c +- 1`` (flat case) break H3.

    ``p = (0, theta, 0, 0)``, ``q = (1, c(theta), 0, 0)`` with
    ``c = amplitude tanh(theta)``; H3 fails once ``c`` rises by more than 2.
    With ``r0`` the string is displaced to ``x^2 = r0`` for use with m > 0.
    """

    def c(th):
        return amplitude * np.tanh(th)

    def p(th):
        return _stack(th, 0.0, th, 0.0 if r0 is None else r0, 0.0)

    def dp(th):
        return _stack(th, 0.0, 1.0, 0.0, 0.0)

    def q(th):
        return _stack(th, 1.0, c(th), 0.0, 0.0)

    return InitialData(p, dp, q, window=window, name="h3-violating")


# --------------------------------------------------------------------
def check_horizon_margin(data, m, nodes=None):
    """Hard check of ``|p_spatial| >= 2m + delta_hat`` on the sample grid."""
    if m <= 0:
        return np.inf
    th = data.grid(nodes)
    p, _, _ = data.evaluate(th)
    r = np.linalg.norm(p[:, 1:4], axis=1)
    dh = data.margin(m)
    gap = float(np.min(r) - 2.0 * m)
    if gap < dh:
        i = int(np.argmin(r))
        raise HorizonViolation(
            f"initial position at theta={th[i]:.6g} has r - 2m = {gap:.6g} "
            f"below delta_hat = {dh:g}")
    return gap


def lambda0_from_data(data, m, nodes=None):
    """Initial speeds ``lambda_pm^0(theta)`` of the data as callables."""
    check_horizon_margin(data, m, nodes)

    cache = {}

    def both(th):
        # minus and plus are usually requested at the same points in turn
        th = np.asarray(th, dtype=float)
        key = cache.get("key")
        if key is not None and key.shape == th.shape and np.array_equal(key, th):
            return cache["val"]
        g = induced_metric_cartesian(data.state(th), m)
        if np.any(g.delta >= 0):
            raise NotTimelike("initial data are not time-like")
        cache["key"] = th.copy()
        cache["val"] = eigenvalues(g)
        return cache["val"]

    return LambdaInitial(lambda th: both(th)[0], lambda th: both(th)[1],
                         window=data.window, mode=data.mode, period=data.period,
                         nodes=nodes or data.nodes)


@dataclass
class AssumptionReport:
    h1: bool
    h2: bool
    h3: bool
    kappa: float
    c1_norm: float
    witness: Optional[tuple] = None
    notes: list = field(default_factory=list)

    @property
    def ok(self):
        return self.h1 and self.h2 and self.h3

    def summary(self):
        parts = [f"H1={'pass' if self.h1 else 'FAIL'} (C1 norm {self.c1_norm:.4g})",
                 f"H2'={'pass' if self.h2 else 'FAIL'} (kappa {self.kappa:.4g})",
                 f"H3={'pass' if self.h3 else 'FAIL'}"]
        if self.witness is not None:
            t1, t2 = self.witness
            parts.append(f"witness theta1={t1:.6g} theta2={t2:.6g}")
        return "; ".join(parts + self.notes)


def h3_sweep(theta, lm, lp):
    """O(N) check of ``lp(theta2) > lm(theta1)`` for all ``theta1 <= theta2``.

    Returns ``(ok, (i1, i2))`` where the pair indexes the worst violation.
    """
    lm = np.asarray(lm)
    lp = np.asarray(lp)
    run = np.maximum.accumulate(lm)
    arg = np.zeros(len(lm), dtype=int)
    best = 0
    for i in range(len(lm)):
        if lm[i] >= lm[best]:
            best = i
        arg[i] = best
    margin = lp - run
    i2 = int(np.argmin(margin))
    return bool(margin[i2] > 0), (int(arg[i2]), i2)


def check_speed_assumptions(init, c1_bound=1e8):
    """H1 (bounded C1 norm), H2' (uniform gap) and H3 on the sample grid."""
    th = init.grid()
    lm = init.minus(th)
    lp = init.plus(th)
    finite = bool(np.all(np.isfinite(lm)) and np.all(np.isfinite(lp)))
    h = th[1] - th[0]
    if finite:
        c1 = float(max(np.max(np.abs(lm)), np.max(np.abs(lp)),
                       np.max(np.abs(np.gradient(lm, h))),
                       np.max(np.abs(np.gradient(lp, h)))))
    else:
        c1 = np.inf
    kappa = float(np.min(lp - lm)) if finite else -np.inf
    notes = []
    if init.mode == "periodic":
        # every pair recurs in both orders, so H3 needs min lp > max lm
        i2 = int(np.argmin(lp))
        i1 = int(np.argmax(lm))
        ok3 = bool(lp[i2] > lm[i1])
        pair = (i1, i2)
        wit = None if ok3 else (th[i1], th[i2] + (init.period if th[i2] <= th[i1] else 0.0))
    else:
        ok3, pair = h3_sweep(th, lm, lp)
        wit = None if ok3 else (th[pair[0]], th[pair[1]])
    return AssumptionReport(h1=finite and c1 <= c1_bound, h2=kappa > 0, h3=ok3,
                            kappa=kappa, c1_norm=c1, witness=wit, notes=notes)


def check_assumptions(init_or_data, m=None, **kw):
    """Assumption report for a LambdaInitial, or for data with mass ``m``."""
    if isinstance(init_or_data, InitialData):
        if m is None:
            raise ValueError("mass required for initial data")
        init_or_data = lambda0_from_data(init_or_data, m)
    return check_speed_assumptions(init_or_data, **kw)


TAIL_RTOL = 1e-8


def _window_l1(data, fun):
    """``int |f^C|`` over the window (or one period) for each component."""
    a, b = data.window
    pts = None if data.mode == "periodic" else list(np.linspace(a, b, 17)[1:-1])
    val, _ = integrate.quad_vec(lambda x: np.abs(fun(np.array([x]))[0]), a, b,
                                epsabs=1e-13, epsrel=1e-11, points=pts, limit=2000)
    return np.asarray(val)


def _line_l1(data, fun, window_val):
    """``int_R |f^C|``: infinite when the integrand persists outside the window.

    In open mode the tail is the constant edge value; it counts as vanishing
    below ``TAIL_RTOL`` times the window maximum.  A periodic integrand
    integrates to infinity unless it is zero.
    """
    a, b = data.window
    th = data.grid()
    peak = np.max(np.abs(fun(th)), axis=0)
    if data.mode == "periodic":
        return np.where(window_val > 1e-14, np.inf, 0.0)
    edge = np.max(np.abs(fun(np.array([a, b]))), axis=0)
    return np.where(edge > TAIL_RTOL * np.maximum(peak, 1e-300), np.inf, window_val)


@dataclass
class SmallnessReport:
    arc_bv: float
    vel_l1: float
    vel_l1_background: float
    arc_bv_window: np.ndarray
    vel_l1_window: np.ndarray
    vel_l1_background_window: np.ndarray
    discrepancy: bool

    def as_dict(self):
        return {"arc_bv": self.arc_bv, "vel_l1": self.vel_l1,
                "vel_l1_background": self.vel_l1_background,
                "arc_bv_window": self.arc_bv_window.tolist(),
                "vel_l1_window": self.vel_l1_window.tolist(),
                "vel_l1_background_window": self.vel_l1_background_window.tolist(),
                "discrepancy": self.discrepancy}


def smallness_norms(data):
    """Arc-length BV and velocity L1 norms, max over components.

    Whole-line values are infinite when the integrand persists outside the
    window (or is nonzero on a periodic loop).  Values over one window or
    period are also reported, with and without ``q_background`` removed.
    ``discrepancy`` flags when the raw and background-adjusted velocity
    norms differ by more than a factor 10 or one of them is infinite.
    """

    def dp(th):
        return data.evaluate(th)[1]

    def q(th):
        return data.evaluate(th)[2]

    def qb(th):
        return data.evaluate(th)[2] - data.q_background

    arc_w = _window_l1(data, dp)
    vel_w = _window_l1(data, q)
    velb_w = _window_l1(data, qb)
    arc = _line_l1(data, dp, arc_w)
    vel = _line_l1(data, q, vel_w)
    velb = _line_l1(data, qb, velb_w)
    raw, bg = float(np.max(vel)), float(np.max(velb))
    disc = (not np.isfinite(raw)) or (not np.isfinite(bg)) or raw > 10.0 * max(bg, 1e-300)
    return SmallnessReport(float(np.max(arc)), raw, bg, arc_w, vel_w, velb_w, bool(disc))


def pq0_from_data(data, init, theta):
    """``P0 = q + lam_-^0 p_theta`` and ``Q0 = q + lam_+^0 p_theta`` at ``theta``."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    _, dp, q = data.evaluate(theta)
    lm = init.minus(theta)[:, None]
    lp = init.plus(theta)[:, None]
    return q + lm * dp, q + lp * dp


def pq0_l1(data, init):
    """``(max_mu int |P0^mu|, max_mu int |Q0^mu|)`` over the window/period."""

    def P(th):
        return pq0_from_data(data, init, th)[0]

    def Q(th):
        return pq0_from_data(data, init, th)[1]

    return float(np.max(_window_l1(data, P))), float(np.max(_window_l1(data, Q)))
