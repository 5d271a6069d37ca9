"""String dynamics in the spherical Schwarzschild chart ``(t, r, alpha, beta)``.

This is a validation path.  The 10-vector ``U = (r, alpha, x_tau, x_theta)``
obeys ``U_tau + A U_theta + B = 0`` with ``A`` written through the inverse
induced metric.  With ``P = x_tau + lam_- x_theta`` and
``Q = x_tau + lam_+ x_theta`` the Riemann variables are
``R = (r, alpha, P, Q)`` and the sources take a closed form in ``R``.  The
``cot(alpha)`` term is singular on the polar axis; evaluations closer than
``polar_margin`` (in ``|sin alpha|``) raise PolarSingularity.
"""

import numpy as np

from .dynamics import InducedMetric2, eigenvalues
from .errors import HorizonViolation, NotTimelike, PolarSingularity
from .geometry import (DEFAULT_HORIZON_MARGIN, DEFAULT_POLAR_MARGIN,
                       cartesian_to_spherical, spherical_jacobian,
                       spherical_to_cartesian)

__all__ = [
    "induced_metric_spherical",
    "delta_expanded",
    "assemble_spherical",
    "spherical_eigenstructure",
    "to_riemann",
    "from_riemann",
    "riemann_sources",
    "extremal_residual_spherical",
    "spherical_linear_degeneracy_residual",
    "SphericalChart",
    "to_spherical_data",
    "cross_validate",
    "cross_chart_study",
    "random_spherical_states",
]


def _guards(r, alpha, m, horizon_margin, polar_margin):
    if m > 0 and np.any(r <= 2.0 * m * (1.0 + horizon_margin)):
        raise HorizonViolation(f"r = {np.min(r):.6g} is not outside 2m = {2 * m:g}")
    s = np.sin(alpha)
    if np.any(np.abs(s) < polar_margin):
        raise PolarSingularity(
            f"|sin alpha| = {np.min(np.abs(s)):.3g} below polar margin {polar_margin:g}")
    return s, np.cos(alpha)


def _split10(U):
    U = np.asarray(U, dtype=float)
    return U[..., 0], U[..., 1], U[..., 2:6], U[..., 6:10]


def _diag_metric(r, s, m):
    A = 1.0 - 2.0 * m / r
    return np.stack([-A, 1.0 / A, r**2, (r * s) ** 2], axis=-1)


def induced_metric_spherical(U, m, horizon_margin=DEFAULT_HORIZON_MARGIN,
                             polar_margin=DEFAULT_POLAR_MARGIN):
    """Induced metric of the 10-vector ``U = (r, alpha, x_tau, x_theta)``."""
    r, alpha, a, b = _split10(U)
    s, _ = _guards(r, alpha, m, horizon_margin, polar_margin)
    d = _diag_metric(r, s, m)
    return InducedMetric2(np.sum(d * a * a, -1), np.sum(d * a * b, -1), np.sum(d * b * b, -1))


def delta_expanded(U, m):
    """Determinant of the induced metric written as a sum of 2x2 minors."""
    r, alpha, a, b = _split10(U)
    A = 1.0 - 2.0 * m / r
    s2 = np.sin(alpha) ** 2

    def minor(i, j):
        return a[..., i] * b[..., j] - a[..., j] * b[..., i]

    return (-A * r**2 * s2 * minor(0, 3) ** 2
            - A * r**2 * minor(0, 2) ** 2
            - minor(0, 1) ** 2
            + r**2 * s2 / A * minor(1, 3) ** 2
            + r**2 / A * minor(1, 2) ** 2
            + r**4 * s2 * minor(2, 3) ** 2)


def _inverse_ratios(g):
    """``(g^01/g^00, g^11/g^00)`` from the covariant components."""
    return -g.g01 / g.g11, g.g00 / g.g11


def assemble_spherical(U, m, horizon_margin=DEFAULT_HORIZON_MARGIN,
                       polar_margin=DEFAULT_POLAR_MARGIN):
    """Principal matrix ``A`` (10x10) and source ``B`` (10) of the system.

    ``A`` carries ``2 g^01/g^00`` and ``g^11/g^00`` on the velocity rows and
    ``-1`` on the tangent rows; ``B`` is assembled term by term from the
    Christoffel symbols of the chart contracted with the inverse metric.
    """
    r, alpha, a, b = _split10(U)
    s, c = _guards(r, alpha, m, horizon_margin, polar_margin)
    g = induced_metric_spherical(U, m, horizon_margin, polar_margin)
    if np.any(g.delta >= 0):
        raise NotTimelike("delta >= 0")
    k1, k2 = _inverse_ratios(g)
    shape = np.shape(r)
    A = np.zeros(shape + (10, 10))
    for i in range(4):
        A[..., 2 + i, 2 + i] = 2.0 * k1
        A[..., 2 + i, 6 + i] = k2
        A[..., 6 + i, 2 + i] = -1.0
    t_t, r_t, al_t, be_t = (a[..., i] for i in range(4))
    t_h, r_h, al_h, be_h = (b[..., i] for i in range(4))

    def sym(x_t, y_t, x_h, y_h):
        # x_tau y_tau + k1 (x_tau y_theta + x_theta y_tau) + k2 x_theta y_theta
        return x_t * y_t + k1 * (x_t * y_h + x_h * y_t) + k2 * x_h * y_h

    Af = 1.0 - 2.0 * m / r
    B = np.zeros(shape + (10,))
    B[..., 0] = -r_t
    B[..., 1] = -al_t
    B[..., 2] = 2.0 * m / r**2 / Af * sym(t_t, r_t, t_h, r_h)
    B[..., 3] = (m / r**2 * Af * sym(t_t, t_t, t_h, t_h)
                 - m / r**2 / Af * sym(r_t, r_t, r_h, r_h)
                 - r * Af * sym(al_t, al_t, al_h, al_h)
                 - r * s**2 * Af * sym(be_t, be_t, be_h, be_h))
    B[..., 4] = 2.0 / r * sym(al_t, r_t, al_h, r_h) - s * c * sym(be_t, be_t, be_h, be_h)
    B[..., 5] = 2.0 / r * sym(be_t, r_t, be_h, r_h) + 2.0 * c / s * sym(al_t, be_t, al_h, be_h)
    return A, B


def spherical_eigenstructure(U, m, **kw):
    """Speeds with right and left eigenvectors of the 10x10 system.

    Rows are grouped ``lam_- x4, lam_+ x4, 0 x2``; ``left @ right.T`` is
    diagonal.
    """
    g = induced_metric_spherical(U, m, **kw)
    lm, lp = eigenvalues(g)
    shape = np.shape(lm)
    R = np.zeros(shape + (10, 10))
    L = np.zeros(shape + (10, 10))
    for i in range(4):
        R[..., i, 2 + i] = -lm
        R[..., i, 6 + i] = 1.0
        R[..., 4 + i, 2 + i] = -lp
        R[..., 4 + i, 6 + i] = 1.0
        L[..., i, 2 + i] = 1.0
        L[..., i, 6 + i] = lp
        L[..., 4 + i, 2 + i] = 1.0
        L[..., 4 + i, 6 + i] = lm
    R[..., 8, 0] = R[..., 9, 1] = 1.0
    L[..., 8, 0] = L[..., 9, 1] = 1.0
    return lm, lp, R, L


def to_riemann(U, lm, lp):
    """``R = (r, alpha, x_tau + lam_- x_theta, x_tau + lam_+ x_theta)``."""
    r, alpha, a, b = _split10(U)
    lm = np.asarray(lm)[..., None]
    lp = np.asarray(lp)[..., None]
    return np.concatenate([r[..., None], alpha[..., None], a + lm * b, a + lp * b], axis=-1)


def from_riemann(R, lm, lp):
    R = np.asarray(R, dtype=float)
    lm = np.asarray(lm)[..., None]
    lp = np.asarray(lp)[..., None]
    P, Q = R[..., 2:6], R[..., 6:10]
    gap = lp - lm
    return np.concatenate([R[..., :2], (lp * P - lm * Q) / gap, (Q - P) / gap], axis=-1)


def riemann_sources(R, lm, lp, m, polar_margin=DEFAULT_POLAR_MARGIN,
                    horizon_margin=DEFAULT_HORIZON_MARGIN):
    """``B_1 .. B_6`` written in the Riemann variables (shape (..., 6))."""
    R = np.asarray(R, dtype=float)
    R1, R2 = R[..., 0], R[..., 1]
    s, c = _guards(R1, R2, m, horizon_margin, polar_margin)
    R3, R4, R5, R6, R7, R8, R9, R10 = (R[..., i] for i in range(2, 10))
    lm = np.asarray(lm, dtype=float)
    lp = np.asarray(lp, dtype=float)
    out = np.empty(R.shape[:-1] + (6,))
    out[..., 0] = (lp * R4 - lm * R8) / (lm - lp)
    out[..., 1] = (lp * R5 - lm * R9) / (lm - lp)
    out[..., 2] = m * (R3 * R8 + R4 * R7) / (R1 * (R1 - 2.0 * m))
    out[..., 3] = (R1 - 2.0 * m) * (m * R3 * R7 / R1**3
                                    - m * R4 * R8 / (R1 * (R1 - 2.0 * m) ** 2)
                                    - R5 * R9 - s**2 * R6 * R10)
    out[..., 4] = (R4 * R9 + R5 * R8) / R1 - s * c * R6 * R10
    out[..., 5] = (R4 * R10 + R6 * R8) / R1 + c / s * (R5 * R10 + R6 * R9)
    return out


def extremal_residual_spherical(U, x_tt, x_th_t, x_thth, m):
    """Compare the first-order system with the second-order equations.

    ``U`` gives position and first derivatives; the second derivatives are
    ``x_tt``, ``x_th_t`` (mixed) and ``x_thth``.  The four second-order
    equations are evaluated with the inverse induced metric and the
    Christoffel symbols of the chart; the first-order system predicts
    ``x_tt = -(A U_theta + B)`` on the velocity rows.  Returns the max of
    ``|g^00 (x_tt + (A U_theta + B)_v) - E|``.
    """
    r, alpha, a, b = _split10(U)
    A, B = assemble_spherical(U, m)
    U_th = np.concatenate([b[..., 1:2], b[..., 2:3], x_th_t, x_thth], axis=-1)
    lhs = x_tt + (np.einsum("...ij,...j->...i", A, U_th) + B)[..., 2:6]
    g = induced_metric_spherical(U, m)
    det = g.delta
    G00, G01, G11 = g.g11 / det, -g.g01 / det, g.g00 / det
    s, c = np.sin(alpha), np.cos(alpha)
    Af = 1.0 - 2.0 * m / r

    def cross(x_t, y_t, x_h, y_h):
        return G00 * x_t * y_t + G01 * (x_t * y_h + x_h * y_t) + G11 * x_h * y_h

    second = (G00[..., None] * x_tt + 2.0 * G01[..., None] * x_th_t
              + G11[..., None] * x_thth)
    t_t, r_t, al_t, be_t = (a[..., i] for i in range(4))
    t_h, r_h, al_h, be_h = (b[..., i] for i in range(4))
    E = second.copy()
    E[..., 0] += 2.0 * m / r**2 / Af * cross(t_t, r_t, t_h, r_h)
    E[..., 1] += (m / r**2 * Af * (G00 * t_t**2 + 2 * G01 * t_t * t_h + G11 * t_h**2)
                  - m / r**2 / Af * (G00 * r_t**2 + 2 * G01 * r_t * r_h + G11 * r_h**2)
                  - r * Af * (G00 * al_t**2 + 2 * G01 * al_t * al_h + G11 * al_h**2)
                  - r * s**2 * Af * (G00 * be_t**2 + 2 * G01 * be_t * be_h + G11 * be_h**2))
    E[..., 2] += (2.0 / r * cross(al_t, r_t, al_h, r_h)
                  - s * c * (G00 * be_t**2 + 2 * G01 * be_t * be_h + G11 * be_h**2))
    E[..., 3] += 2.0 / r * cross(be_t, r_t, be_h, r_h) + 2.0 * c / s * cross(al_t, be_t, al_h, be_h)
    return np.max(np.abs(G00[..., None] * lhs - E), axis=-1)


def spherical_speeds(U, m):
    return eigenvalues(induced_metric_spherical(U, m))


def spherical_linear_degeneracy_residual(U, m, h=1e-4):
    """Max of ``|grad lam_- . r_i|`` and ``|grad lam_+ . r_i|`` on their groups."""
    U = np.asarray(U, dtype=float)
    _, _, R, _ = spherical_eigenstructure(U, m)
    out = np.zeros(U.shape[:-1])
    for k, which in ((0, 0), (4, 1)):
        for i in range(4):
            d = R[..., k + i, :]
            d = d / np.linalg.norm(d, axis=-1, keepdims=True)
            val = (spherical_speeds(U + h * d, m)[which]
                   - spherical_speeds(U - h * d, m)[which]) / (2.0 * h)
            out = np.maximum(out, np.abs(val))
    return out


def random_spherical_states(rng, m, count, r_range=(4.0, 12.0), g11_min=0.05):
    """Time-like 10-vectors away from the axis and the horizon."""
    keep, have = [], 0
    for _ in range(100):
        n = max(2 * (count - have), 64)
        r = rng.uniform(r_range[0] * m, r_range[1] * m, n)
        alpha = rng.uniform(0.3, np.pi - 0.3, n)
        a = rng.uniform(-1.0, 1.0, (n, 4))
        b = rng.uniform(-1.0, 1.0, (n, 4))
        a[:, 0] += 1.0
        a[:, 2:] /= r[:, None]
        b[:, 2:] /= r[:, None]
        U = np.concatenate([r[:, None], alpha[:, None], a, b], axis=1)
        g = induced_metric_spherical(U, m)
        ok = (g.delta < -1e-3) & (g.g11 > g11_min)
        keep.append(U[ok])
        have += int(ok.sum())
        if have >= count:
            return np.concatenate(keep)[:count]
    raise RuntimeError("rejection sampling did not produce enough states")


# ----------------------------------------------------------------------
class SphericalChart:
    """Chart object for the generic upwind solver.

    Positions are ``(t, r, alpha, beta)``; the Christoffel form is evaluated
    through :func:`riemann_sources` so the spherical path shares no source
    code with the Cartesian one.
    """

    name = "spherical"

    def __init__(self, m, horizon_margin=DEFAULT_HORIZON_MARGIN,
                 polar_margin=DEFAULT_POLAR_MARGIN):
        self.m = float(m)
        self.horizon_margin = horizon_margin
        self.polar_margin = polar_margin

    def _diag(self, u):
        s, _ = _guards(u[..., 1], u[..., 2], self.m, self.horizon_margin, self.polar_margin)
        return _diag_metric(u[..., 1], s, self.m)

    def form(self, u, a, b):
        return np.sum(self._diag(u) * a * b, -1)

    def induced(self, u, v, w):
        d = self._diag(u)
        return InducedMetric2(np.sum(d * v * v, -1), np.sum(d * v * w, -1), np.sum(d * w * w, -1))

    def source(self, u, P, Q):
        R = np.concatenate([u[..., 1:2], u[..., 2:3], P, Q], axis=-1)
        ones = np.ones(u.shape[:-1])
        B = riemann_sources(R, -ones, ones, self.m, self.polar_margin, self.horizon_margin)
        return B[..., 2:6]

    def horizon_gap(self, u):
        return u[..., 1] - 2.0 * self.m

    def to_cartesian(self, u):
        return spherical_to_cartesian(u)


def to_spherical_data(data):
    """The same initial world sheet expressed in spherical coordinates.

    ``p`` is mapped pointwise; ``p_theta`` and ``q`` are pushed forward by
    the Jacobian.  ``beta`` is taken from ``atan2`` and must not wrap inside
    the window.
    """
    from dataclasses import replace

    def p(th):
        return cartesian_to_spherical(data.p(th))

    def push(fun):
        def out(th):
            J = spherical_jacobian(data.p(th))
            return np.einsum("...ij,...j->...i", J, fun(th))
        return out

    beta = cartesian_to_spherical(data.p(data.grid()))[:, 3]
    if np.any(np.abs(np.diff(beta)) > np.pi):
        raise ValueError("azimuth wraps inside the data window")
    return replace(data, p=p, dp=push(data.dp), q=push(data.q),
                   q_background=np.zeros(4), name=data.name + "(spherical)")


def cross_validate(cartesian_result, spherical_result, region=None):
    """Largest Cartesian distance between the two world sheets.

    Both runs must share grid and snapshot times.  Nodes are compared where
    both are valid and, if given, ``region = (lo, hi)`` contains theta.
    Returns ``{time: deviation}``.
    """
    out = {}
    for sc in cartesian_result.snapshots:
        ss = spherical_result.snapshot_at(sc.time)
        if abs(ss.time - sc.time) > 1e-9 * max(1.0, abs(sc.time)):
            continue
        if sc.theta.shape != ss.theta.shape or not np.allclose(sc.theta, ss.theta):
            raise ValueError("runs must share the theta grid")
        mask = sc.valid & ss.valid
        if region is not None:
            mask &= (sc.theta >= region[0]) & (sc.theta <= region[1])
        if not np.any(mask):
            continue
        xs = spherical_to_cartesian(ss.x[mask])
        out[float(sc.time)] = float(np.max(np.abs(sc.x[mask] - xs)))
    return out


def cross_chart_study(data, m, T, nodes=1601, times=None, region=None, order=2,
                      cartesian_chart=None):
    """Solve in both charts at ``nodes`` and ``2 nodes - 1`` and compare.

    Scheme errors are Richardson estimates ``|x_N - x_2N| 2^p/(2^p - 1)``
    measured in Cartesian components on the shared nodes.  A replacement
    ``cartesian_chart`` can be supplied (mutation testing).  Returns the
    sup over snapshot times of the chart deviation and of each error.
    """
    from .solvers import GridParams, solve_upwind_raw

    times = list(times) if times is not None else list(np.linspace(0.0, T, 9)[1:])
    sdata = to_spherical_data(data)
    runs = {}
    for n in (nodes, 2 * nodes - 1):
        grid = GridParams(nodes=n, pad=0.0, snapshot_times=times)
        runs[n] = (solve_upwind_raw(data, m, T, grid, chart=cartesian_chart, require_h3=False),
                   solve_upwind_raw(sdata, m, T, grid, chart=SphericalChart(m), require_h3=False))
    (c, s), (cf, sf) = runs[nodes], runs[2 * nodes - 1]
    for r in (c, s, cf, sf):
        if not r.ok:
            raise RuntimeError(f"{r.chart} run stopped: {r.diagnostics.message}")
    fac = 2.0**order / (2.0**order - 1.0)
    dev = err_c = err_s = 0.0
    per_time = {}
    for t in times:
        a, b = c.snapshot_at(t), s.snapshot_at(t)
        af, bf = cf.snapshot_at(t), sf.snapshot_at(t)
        mask = a.valid & b.valid & af.valid[::2] & bf.valid[::2]
        if region is not None:
            mask &= (a.theta >= region[0]) & (a.theta <= region[1])
        xb = spherical_to_cartesian(b.x[mask])
        d = float(np.max(np.abs(a.x[mask] - xb)))
        ec = fac * float(np.max(np.abs(a.x[mask] - af.x[::2][mask])))
        es = fac * float(np.max(np.abs(xb - spherical_to_cartesian(bf.x[::2][mask]))))
        per_time[float(t)] = (d, ec, es)
        dev, err_c, err_s = max(dev, d), max(err_c, ec), max(err_s, es)
    return {"deviation": dev, "error_cartesian": err_c, "error_spherical": err_s,
            "per_time": per_time, "passed": dev <= err_c + err_s}
