"""Exact transport of the characteristic speeds and the characteristic chart.

The speeds obey ``lam_-_t + lam_+ lam_-_theta = 0`` and
``lam_+_t + lam_- lam_+_theta = 0``.  With ``gap = lam_+ - lam_-`` the chart

    tau = t,    theta = Phi(tau, vartheta)

straightens both characteristic families: ``vartheta - tau`` is constant
along ``dtheta/dt = lam_+`` and ``vartheta + tau`` along ``dtheta/dt = lam_-``.
At ``t = 0`` the chart is ``vartheta = Theta0(theta) = int_0^theta 2/gap``
and ``Phi0`` is its inverse.  With ``H(theta) = int_0^theta (lam_+ + lam_-)/gap``
and feet ``theta_pm = Phi0(vartheta +- tau)``,

    Phi(tau, vartheta) = (theta_+ + theta_-)/2 + (H(theta_+) - H(theta_-))/2,
    lam~_pm(tau, vartheta) = lam_pm^0(theta_pm),

and ``Theta(t, .)`` is the inverse of ``Phi(t, .)``.  The Jacobian
``dTheta/dtheta = 2/gap`` is positive whenever the gap is.
"""

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import AssumptionViolated, QuadratureFailure

_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL_X16, _GL_W16 = np.polynomial.legendre.leggauss(16)


@dataclass
class LambdaInitial:
    """Initial characteristic speeds on the real line.

    ``lam_minus``/``lam_plus`` are vectorised callables.  In ``open`` mode
    they are evaluated at ``clip(theta, *window)`` (constant extension); in
    ``periodic`` mode at ``theta`` reduced modulo ``period``.  ``grid`` is the
    sample grid used for assumption checks and tabulation.
    """

    lam_minus: Callable
    lam_plus: Callable
    window: tuple = (-1.0, 1.0)
    mode: str = "open"
    period: Optional[float] = None
    nodes: int = 2001
    kappa: float = field(init=False, default=np.nan)

    def __post_init__(self):
        if self.mode not in ("open", "periodic"):
            raise ValueError("mode must be 'open' or 'periodic'")
        if self.mode == "periodic":
            if not self.period or self.period <= 0:
                raise ValueError("periodic mode needs a positive period")
            self.window = (0.0, float(self.period))
        a, b = self.window
        if not b > a:
            raise ValueError("window must be increasing")
        g = self.grid()
        self.kappa = float(np.min(self.plus(g) - self.minus(g)))

    def grid(self, nodes=None):
        a, b = self.window
        return np.linspace(a, b, nodes or self.nodes)

    def _reduce(self, theta):
        theta = np.asarray(theta, dtype=float)
        if self.mode == "periodic":
            return np.mod(theta, self.period)
        return np.clip(theta, *self.window)

    def minus(self, theta):
        return np.asarray(self.lam_minus(self._reduce(theta)), dtype=float)

    def plus(self, theta):
        return np.asarray(self.lam_plus(self._reduce(theta)), dtype=float)

    @classmethod
    def constant(cls, lm, lp, window=(-1.0, 1.0)):
        return cls(lambda th: np.full(np.shape(th), float(lm)),
                   lambda th: np.full(np.shape(th), float(lp)), window)

    @classmethod
    def from_samples(cls, theta, lm, lp, mode="open", period=None):
        """Cubic-spline speeds from samples on a uniform grid."""
        theta = np.asarray(theta, dtype=float)
        d = np.diff(theta)
        if not np.allclose(d, d[0], rtol=1e-9, atol=0):
            raise ValueError("samples must lie on a uniform grid")
        bc = "periodic" if mode == "periodic" else "not-a-knot"
        sm = CubicSpline(theta, lm, bc_type=bc)
        sp = CubicSpline(theta, lp, bc_type=bc)
        if mode == "periodic":
            return cls(sm, sp, mode="periodic", period=period or theta[-1] - theta[0],
                       nodes=len(theta))
        return cls(sm, sp, (theta[0], theta[-1]), nodes=len(theta))


def _gl_integral(fun, a, b, x=_GL_X, w=_GL_W):
    """Gauss-Legendre integral of ``fun`` over each [a_i, b_i] (vectorised)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    pts = mid[..., None] + half[..., None] * x
    return half * np.sum(fun(pts) * w, axis=-1)


class _CumulativeIntegral:
    """``F(theta) = int_{anchor}^{theta} f`` for a speed-derived integrand.

    Tabulated on a uniform grid over one window by per-cell Gauss-Legendre,
    with the grid halved until the 8- and 16-point rules agree to ``tol``.
    Queries are exact to quadrature: table value plus a Gauss-Legendre
    integral over the partial cell.  Outside the window the integrand is
    constant (open mode) or periodic.
    """

    def __init__(self, integrand, init, tol=1e-10, max_refine=8):
        self.f = integrand
        self.init = init
        a, b = init.window
        n = max(init.nodes - 1, 16)
        for _ in range(max_refine):
            edges = np.linspace(a, b, n + 1)
            lo = _gl_integral(self.f, edges[:-1], edges[1:])
            hi = _gl_integral(self.f, edges[:-1], edges[1:], _GL_X16, _GL_W16)
            err = float(np.sum(np.abs(hi - lo)))
            if err <= tol:
                break
            n *= 2
        else:
            raise QuadratureFailure(f"cumulative quadrature error {err:.3g} > {tol:g}")
        self.error = err
        self.edges = edges
        self.h = (b - a) / n
        self.table = np.concatenate([[0.0], np.cumsum(hi)])
        self.total = self.table[-1]
        self.fa = float(self.f(np.array([a]))[0])
        self.fb = float(self.f(np.array([b]))[0])
        # shift so that F(0) = 0
        self.offset = 0.0
        self.offset = float(self(np.array([0.0]))[0])

    def _inside(self, theta):
        a = self.edges[0]
        k = np.clip(((theta - a) // self.h).astype(int), 0, len(self.edges) - 2)
        left = self.edges[k]
        return self.table[k] + _gl_integral(self.f, left, theta)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        a, b = self.edges[0], self.edges[-1]
        if self.init.mode == "periodic":
            period = b - a
            n = np.floor((theta - a) / period)
            red = theta - n * period
            out = n * self.total + self._inside(red)
        else:
            inner = self._inside(np.clip(theta, a, b))
            out = (inner + np.where(theta < a, (theta - a) * self.fa, 0.0)
                   + np.where(theta > b, (theta - b) * self.fb, 0.0))
        return out - self.offset


def _bracketed_newton(fun, dfun, target, x0, lo, hi, tol=1e-13, max_iter=100):
    """Solve the increasing equation ``fun(x) = target`` inside [lo, hi]."""
    x = np.clip(np.asarray(x0, dtype=float).copy(), lo, hi)
    lo = np.asarray(lo, dtype=float).copy()
    hi = np.asarray(hi, dtype=float).copy()
    for _ in range(max_iter):
        f = fun(x) - target
        lo = np.where(f < 0, x, lo)
        hi = np.where(f > 0, x, hi)
        step = f / dfun(x)
        xn = x - step
        bad = ~((xn > lo) & (xn < hi))
        xn = np.where(bad, 0.5 * (lo + hi), xn)
        scale = 1.0 + np.abs(xn)
        if np.all((np.abs(xn - x) <= tol * scale) | (hi - lo <= tol * scale)):
            return xn
        x = xn
    raise QuadratureFailure("monotone inversion did not converge")


def _bracket(fun, target, x0, width):
    """Expand [x0 - w, x0 + w] until it brackets ``fun = target``."""
    lo = x0 - width
    hi = x0 + width
    for _ in range(200):
        flo = fun(lo) - target
        fhi = fun(hi) - target
        bad_lo = flo > 0
        bad_hi = fhi < 0
        if not (bad_lo.any() or bad_hi.any()):
            return lo, hi
        width = 2.0 * width
        lo = np.where(bad_lo, lo - width, lo)
        hi = np.where(bad_hi, hi + width, hi)
    raise QuadratureFailure("could not bracket root of monotone map")


class CoordinateMap:
    """Tabulated chart between ``(t, theta)`` and ``(tau, vartheta)``."""

    def __init__(self, init, tol=1e-10):
        self.init = init
        if not init.kappa > 0:
            raise AssumptionViolated(f"gap lower bound {init.kappa:.3g} is not positive")

        def jac(th):
            return 2.0 / (init.plus(th) - init.minus(th))

        def drift(th):
            lp, lm = init.plus(th), init.minus(th)
            return (lp + lm) / (lp - lm)

        self._jac = jac
        self._drift = drift
        self._Theta0 = _CumulativeIntegral(jac, init, tol)
        self._H = _CumulativeIntegral(drift, init, tol)
        self.quadrature_error = self._Theta0.error + self._H.error
        # coarse table of Theta0 for seeding inversions
        g = init.grid()
        self._seed_theta = g
        self._seed_vartheta = self._Theta0(g)

    @property
    def vartheta_period(self):
        """Period of the chart in ``vartheta`` (periodic speeds only)."""
        if self.init.mode != "periodic":
            raise ValueError("open-mode chart has no period")
        return float(self._Theta0.total)

    def H(self, theta):
        """``int_0^theta (lam_+ + lam_-)/gap``."""
        return self._H(theta)

    # --- t = 0 ---------------------------------------------------------
    def Theta0(self, theta):
        return self._Theta0(theta)

    def Phi0(self, vartheta):
        v = np.asarray(vartheta, dtype=float)
        init = self.init
        if init.mode == "periodic":
            P = init.period
            VP = self._Theta0.total
            n = np.floor(v / VP)
            red = v - n * VP
            return n * P + self._phi0_window(red)
        return self._phi0_window(v)

    def _phi0_window(self, v):
        a, b = self.init.window
        va, vb = self._seed_vartheta[0], self._seed_vartheta[-1]
        out = np.empty_like(v)
        left = v < va
        right = v > vb
        mid = ~(left | right)
        out[left] = a + (v[left] - va) / self._jac(np.array([a]))[0]
        out[right] = b + (v[right] - vb) / self._jac(np.array([b]))[0]
        if np.any(mid):
            vm = v[mid]
            k = np.clip(np.searchsorted(self._seed_vartheta, vm) - 1, 0,
                        len(self._seed_theta) - 2)
            lo = self._seed_theta[k]
            hi = self._seed_theta[k + 1]
            x0 = np.interp(vm, self._seed_vartheta, self._seed_theta)
            out[mid] = _bracketed_newton(self._Theta0, self._jac, vm, x0, lo, hi)
        return out

    # --- general t ----------------------------------------------------
    def feet(self, tau, vartheta):
        """``(theta_-, theta_+) = (Phi0(vartheta - tau), Phi0(vartheta + tau))``."""
        tau = np.asarray(tau, dtype=float)
        v = np.asarray(vartheta, dtype=float)
        return self.Phi0(v - tau), self.Phi0(v + tau)

    def Phi(self, tau, vartheta):
        tm, tp = self.feet(tau, vartheta)
        return 0.5 * (tp + tm) + 0.5 * (self._H(tp) - self._H(tm))

    def dPhi_dvartheta(self, tau, vartheta):
        tm, tp = self.feet(tau, vartheta)
        return 0.5 * (self.init.plus(tp) - self.init.minus(tm))

    def dPhi_dtau(self, tau, vartheta):
        lm, lp = self.lambda_tilde(tau, vartheta)
        return 0.5 * (lp + lm)

    def lambda_tilde(self, tau, vartheta):
        """Speeds in characteristic coordinates, ``(lam~_-, lam~_+)``."""
        tm, tp = self.feet(tau, vartheta)
        return self.init.minus(tm), self.init.plus(tp)

    def Theta(self, t, theta):
        """``vartheta`` with ``Phi(t, vartheta) = theta`` (monotone inversion)."""
        t, theta = np.broadcast_arrays(np.asarray(t, dtype=float),
                                       np.asarray(theta, dtype=float))
        shape = theta.shape
        t = t.ravel()
        theta = theta.ravel()

        def fun(v):
            return self.Phi(t, v)

        def dfun(v):
            return self.dPhi_dvartheta(t, v)

        x0 = self.Theta0(theta)
        width = np.full_like(theta, 1e-3) + 1e-3 * np.abs(x0)
        lo, hi = _bracket(fun, theta, x0, width)
        return _bracketed_newton(fun, dfun, theta, x0, lo, hi).reshape(shape)

    def jacobian(self, t, theta):
        lm, lp = solve_lambda_exact(self, t, theta)
        return 2.0 / (lp - lm)


def build_map(init, tol=1e-10, require_h3=True):
    """Build the chart; optionally refuse speeds that violate H3."""
    if require_h3:
        from .data import check_speed_assumptions
        report = check_speed_assumptions(init)
        if not report.ok:
            raise AssumptionViolated(report.summary(), report)
    return CoordinateMap(init, tol)


def solve_lambda_exact(cmap, t, theta):
    """Exact ``(lam_-, lam_+)(t, theta)`` through the characteristic chart."""
    if isinstance(cmap, LambdaInitial):
        cmap = build_map(cmap)
    vt = cmap.Theta(t, theta)
    return cmap.lambda_tilde(t, vt)


def conservation_identity_residual(dt, dtheta, lam_minus, lam_plus):
    """Max of ``d_t(2/gap) + d_theta((lp + lm)/gap)`` on interior nodes.

    Arrays are ``(nt, ntheta)`` on a uniform grid; centred differences.
    """
    lm = np.asarray(lam_minus, dtype=float)
    lp = np.asarray(lam_plus, dtype=float)
    a = 2.0 / (lp - lm)
    b = (lp + lm) / (lp - lm)
    at = (a[2:, 1:-1] - a[:-2, 1:-1]) / (2.0 * dt)
    bth = (b[1:-1, 2:] - b[1:-1, :-2]) / (2.0 * dtheta)
    return float(np.max(np.abs(at + bth)))


def bv_norm(samples):
    """Total variation of the piecewise-linear interpolant of samples."""
    return float(np.sum(np.abs(np.diff(np.asarray(samples, dtype=float)))))


def _upwind_derivative(f, speed, h):
    """Second-order one-sided derivative along ``axis=-1`` chosen by sign."""
    n = f.shape[-1]
    ext = np.concatenate([f[..., :1], f[..., :1], f, f[..., -1:], f[..., -1:]], axis=-1)
    i = np.arange(2, n + 2)
    back = (3.0 * ext[..., i] - 4.0 * ext[..., i - 1] + ext[..., i - 2]) / (2.0 * h)
    fwd = (-3.0 * ext[..., i] + 4.0 * ext[..., i + 1] - ext[..., i + 2]) / (2.0 * h)
    return np.where(speed > 0, back, fwd)


def integrate_speed_transport(theta, lm0, lp0, T, cfl=0.4, periodic=False):
    """Upwind method-of-lines solution of the speed transport equations.

    Second-order one-sided differences and SSP-RK3 in time.  Boundaries use
    constant (or periodic) extension.  Returns ``(lam_-, lam_+)`` at ``T``.
    """
    theta = np.asarray(theta, dtype=float)
    h = theta[1] - theta[0]
    y = np.stack([np.asarray(lm0, dtype=float), np.asarray(lp0, dtype=float)])

    def deriv(f, speed):
        if periodic:
            back = (3.0 * f - 4.0 * np.roll(f, 1, -1) + np.roll(f, 2, -1)) / (2.0 * h)
            fwd = (-3.0 * f + 4.0 * np.roll(f, -1, -1) - np.roll(f, -2, -1)) / (2.0 * h)
            return np.where(speed > 0, back, fwd)
        return _upwind_derivative(f, speed, h)

    def rhs(y):
        lm, lp = y
        return np.stack([-lp * deriv(lm, lp), -lm * deriv(lp, lm)])

    t = 0.0
    while t < T - 1e-14 * max(T, 1.0):
        dt = min(cfl * h / np.max(np.abs(y)), T - t)
        y1 = y + dt * rhs(y)
        y2 = 0.75 * y + 0.25 * (y1 + dt * rhs(y1))
        y = y / 3.0 + 2.0 / 3.0 * (y2 + dt * rhs(y2))
        t += dt
    return y[0], y[1]
