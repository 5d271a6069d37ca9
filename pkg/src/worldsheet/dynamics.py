"""String dynamics in Schwarzschild space-time, Cartesian chart.

A world sheet ``x(t, theta)`` is carried as the 12-vector
``U = (u, v, w) = (x, x_t, x_theta)`` and satisfies the quasilinear system

    U_t + A(U) U_theta + B(U) = 0.

With the induced metric ``(g00, g01, g11)`` the characteristic speeds
``lambda_-(U) < lambda_+(U)`` are the roots of
``g11 lam^2 + 2 g01 lam + g00 = 0``.  The null combinations

    P = v + lambda_- w   (transported with speed lambda_+)
    Q = v + lambda_+ w   (transported with speed lambda_-)

turn the system into the semilinear form used by the solvers.  Every
function is batched over leading axes; 3-vectors use the Euclidean inner
product.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (CoincidentCharacteristics, DegenerateG11,
                     HorizonViolation, NotTimelike)
from .geometry import DEFAULT_HORIZON_MARGIN

G11_FLOOR = 1e-12
GAP_FLOOR = 1e-12


@dataclass(frozen=True)
class InducedMetric2:
    g00: np.ndarray
    g01: np.ndarray
    g11: np.ndarray

    @property
    def delta(self):
        return self.g00 * self.g11 - self.g01**2


@dataclass(frozen=True)
class EigenStructure:
    """Speeds and the 12 right/left eigenvectors of ``A``.

    Rows of ``right``/``left`` are ordered as the speed groups
    ``0 x4, lambda_- x4, lambda_+ x4``; ``left @ right`` is diagonal.
    """

    lambda_minus: np.ndarray
    lambda_plus: np.ndarray
    right: np.ndarray
    left: np.ndarray

    @property
    def speeds(self):
        lm = np.asarray(self.lambda_minus)
        lp = np.asarray(self.lambda_plus)
        z = np.zeros_like(lm)
        return np.stack([z] * 4 + [lm] * 4 + [lp] * 4, axis=-1)


def split_state(U):
    U = np.asarray(U, dtype=float)
    return U[..., 0:4], U[..., 4:8], U[..., 8:12]


def join_state(u, v, w):
    return np.concatenate([u, v, w], axis=-1)


def _dot3(a, b):
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def _radius(u, m, margin):
    r = np.sqrt(_dot3(u[..., 1:4], u[..., 1:4]))
    if m > 0 and np.any(r <= 2.0 * m * (1.0 + margin)):
        raise HorizonViolation(f"|u| = {np.min(r):.6g} is not outside 2m = {2 * m:g}")
    return r


def metric_form(u, a, b, m, margin=DEFAULT_HORIZON_MARGIN):
    """Ambient inner product ``g~(a, b)`` at position ``u``."""
    r = _radius(u, m, margin)
    X = u[..., 1:4]
    out = -a[..., 0] * b[..., 0] + _dot3(a[..., 1:4], b[..., 1:4])
    if m > 0:
        A = 1.0 - 2.0 * m / r
        f = 2.0 * m / (r**2 * (r - 2.0 * m))
        out = (out + (1.0 - A) * a[..., 0] * b[..., 0]
               + f * _dot3(X, a[..., 1:4]) * _dot3(X, b[..., 1:4]))
    return out


def induced_metric_cartesian(U, m, margin=DEFAULT_HORIZON_MARGIN):
    u, v, w = split_state(U)
    return InducedMetric2(metric_form(u, v, v, m, margin),
                          metric_form(u, v, w, m, margin),
                          metric_form(u, w, w, m, margin))


def eigenvalues(g, floor=G11_FLOOR):
    """``(lambda_-, lambda_+)`` ordered by value.

    Raises DegenerateG11 when ``|g11|`` is below
    ``floor * (|g00| + |g01| + |g11|)`` and NotTimelike when ``delta >= 0``.
    """
    g00, g01, g11 = (np.asarray(x, dtype=float) for x in (g.g00, g.g01, g.g11))
    if np.any(np.abs(g11) <= floor * (np.abs(g00) + np.abs(g01) + np.abs(g11))):
        raise DegenerateG11("g11 vanishes")
    delta = g00 * g11 - g01**2
    if np.any(delta >= 0):
        raise NotTimelike(f"delta = {np.max(delta):.3g} >= 0")
    root = np.sqrt(-delta)
    a = (-g01 - root) / g11
    b = (-g01 + root) / g11
    return np.minimum(a, b), np.maximum(a, b)


def state_eigenvalues(U, m, margin=DEFAULT_HORIZON_MARGIN):
    return eigenvalues(induced_metric_cartesian(U, m, margin))


def transport_matrix(lm, lp):
    """The 12x12 principal matrix ``A`` written with the speeds."""
    lm = np.asarray(lm, dtype=float)
    lp = np.asarray(lp, dtype=float)
    A = np.zeros(lm.shape + (12, 12))
    I4 = np.eye(4)
    # -2 g01/g11 = lambda_+ + lambda_-,  g00/g11 = lambda_+ lambda_-
    A[..., 4:8, 4:8] = (lp + lm)[..., None, None] * I4
    A[..., 4:8, 8:12] = (lp * lm)[..., None, None] * I4
    A[..., 8:12, 4:8] = -I4
    return A


def eigenvectors(g):
    lm, lp = eigenvalues(g)
    shape = np.shape(lm)
    R = np.zeros(shape + (12, 12))
    L = np.zeros(shape + (12, 12))
    I4 = np.eye(4)
    R[..., 0:4, 0:4] = I4
    L[..., 0:4, 0:4] = I4
    for k, lam, other in ((4, lm, lp), (8, lp, lm)):
        lam = np.asarray(lam)[..., None, None]
        other = np.asarray(other)[..., None, None]
        R[..., k:k + 4, 4:8] = -lam * I4
        R[..., k:k + 4, 8:12] = I4
        # left vector of one speed is the invariant of the other family
        L[..., k:k + 4, 4:8] = I4
        L[..., k:k + 4, 8:12] = other * I4
    return EigenStructure(lm, lp, R, L)


def quadratic_weights(g):
    """Coefficients ``(-2 g01/g11, g00/g11)`` of the source bilinear form."""
    return -2.0 * g.g01 / g.g11, g.g00 / g.g11


def source_vector(u, v, w, g, m, margin=DEFAULT_HORIZON_MARGIN):
    """Christoffel source of the velocity equation in closed form.

    Returns ``Gamma~^C_{AB}(v^A v^B - 2 g01/g11 v^A w^B + g00/g11 w^A w^B)``
    written out with the Euclidean products of ``u``, ``v`` and ``w``.
    """
    r = _radius(u, m, margin)
    out = np.zeros(np.broadcast_shapes(u.shape, v.shape, w.shape))
    if m == 0:
        return out
    c, d = quadratic_weights(g)
    X = u[..., 1:4]

    def weighted(av, aw, bv, bw):
        return av * bv + 0.5 * c * (av * bw + aw * bv) + d * aw * bw

    v0, w0 = v[..., 0], w[..., 0]
    Xv, Xw = _dot3(X, v[..., 1:4]), _dot3(X, w[..., 1:4])
    vv = _dot3(v[..., 1:4], v[..., 1:4])
    vw = _dot3(v[..., 1:4], w[..., 1:4])
    ww = _dot3(w[..., 1:4], w[..., 1:4])
    out[..., 0] = m / (r**2 * (r - 2.0 * m)) * 2.0 * weighted(v0, w0, Xv, Xw)
    coef = (m * (r - 2.0 * m) / r**4 * weighted(v0, w0, v0, w0)
            + 2.0 * m / r**3 * (vv + c * vw + d * ww)
            - m * (3.0 * r - 4.0 * m) / (r**5 * (r - 2.0 * m))
            * weighted(Xv, Xw, Xv, Xw))
    out[..., 1:4] = X * coef[..., None]
    return out


def assemble_A_B(U, m, margin=DEFAULT_HORIZON_MARGIN):
    """Principal matrix and source of ``U_t + A U_theta + B = 0``."""
    u, v, w = split_state(U)
    g = induced_metric_cartesian(U, m, margin)
    if np.any(g.delta >= 0):
        raise NotTimelike("delta >= 0")
    if np.any(np.abs(g.g11) <= G11_FLOOR * (np.abs(g.g00) + np.abs(g.g01) + np.abs(g.g11))):
        raise DegenerateG11("g11 vanishes")
    c, d = quadratic_weights(g)
    A = np.zeros(np.shape(g.g00) + (12, 12))
    I4 = np.eye(4)
    A[..., 4:8, 4:8] = c[..., None, None] * I4
    A[..., 4:8, 8:12] = d[..., None, None] * I4
    A[..., 8:12, 4:8] = -I4
    B = np.zeros(np.shape(U))
    B[..., 0:4] = -v
    B[..., 4:8] = source_vector(u, v, w, g, m, margin)
    return A, B


def christoffel_source(P, Q, S, m, margin=DEFAULT_HORIZON_MARGIN):
    """``Gamma~^C_{AB} P^A Q^B`` at position ``S`` (symmetric in P, Q).

    This is the bilinear form behind every source term; the velocity source
    equals it with ``P = v + lambda_- w`` and ``Q = v + lambda_+ w``.
    """
    r = _radius(S, m, margin)
    out = np.zeros(np.broadcast_shapes(P.shape, Q.shape))
    if m == 0:
        return out
    X = S[..., 1:4]
    SP = _dot3(X, P[..., 1:4])
    SQ = _dot3(X, Q[..., 1:4])
    out[..., 0] = m / (r**2 * (r - 2.0 * m)) * (P[..., 0] * SQ + Q[..., 0] * SP)
    coef = (m * (r - 2.0 * m) / r**4 * P[..., 0] * Q[..., 0]
            + 2.0 * m / r**3 * _dot3(P[..., 1:4], Q[..., 1:4])
            - m * (3.0 * r - 4.0 * m) / (r**5 * (r - 2.0 * m)) * SP * SQ)
    out[..., 1:4] = X * coef[..., None]
    return out


def pq_sources(S, P, Q, m, margin=DEFAULT_HORIZON_MARGIN):
    """Right-hand side shared by the P and Q transport equations."""
    return -christoffel_source(P, Q, S, m, margin)


def spq_rhs(S, P, Q, lm, lp, m, margin=DEFAULT_HORIZON_MARGIN):
    """Sources of the (S, P, Q) system in the (t, theta) plane.

    ``S_t = (lp P - lm Q)/(lp - lm)``, ``P_t + lp P_theta = src`` and
    ``Q_t + lm Q_theta = src``.  Returns ``(dS, dP, dQ)``.
    """
    lm = np.asarray(lm, dtype=float)[..., None]
    lp = np.asarray(lp, dtype=float)[..., None]
    gap = lp - lm
    if np.any(np.abs(gap) < GAP_FLOOR):
        raise CoincidentCharacteristics("lambda_+ == lambda_-")
    src = pq_sources(S, P, Q, m, margin)
    return (lp * P - lm * Q) / gap, src, src.copy()


def characteristic_rhs(S, P, Q, m, margin=DEFAULT_HORIZON_MARGIN):
    """Sources of the (S, P, Q) system in characteristic coordinates.

    There S moves with speed 0, P with +1 and Q with -1 and
    ``S_tau = (P + Q)/2``; no speed enters.
    """
    src = pq_sources(S, P, Q, m, margin)
    return 0.5 * (P + Q), src, src.copy()


def to_characteristic_state(U, m, margin=DEFAULT_HORIZON_MARGIN):
    """``(S, P, Q, lambda_-, lambda_+)`` from a world-sheet state."""
    u, v, w = split_state(U)
    lm, lp = state_eigenvalues(U, m, margin)
    P = v + lm[..., None] * w
    Q = v + lp[..., None] * w
    return u.copy(), P, Q, lm, lp


def from_characteristic_state(S, P, Q, lm, lp, floor=GAP_FLOOR):
    lm = np.asarray(lm, dtype=float)[..., None]
    lp = np.asarray(lp, dtype=float)[..., None]
    gap = lp - lm
    if np.any(np.abs(gap) < floor):
        raise CoincidentCharacteristics("lambda_+ == lambda_-")
    v = (lp * P - lm * Q) / gap
    w = (Q - P) / gap
    return join_state(S, v, w)


def delta_from_characteristic(S, P, Q, lm, lp, m, margin=DEFAULT_HORIZON_MARGIN):
    """Induced-metric determinant of the state encoded by (S, P, Q)."""
    U = from_characteristic_state(S, P, Q, lm, lp)
    return induced_metric_cartesian(U, m, margin).delta


def _metric_position_derivative(u, a, m):
    """``d/du^k g~(a, a)`` for k = 1..3 (the u^0 derivative vanishes)."""
    X = u[..., 1:4]
    r = np.sqrt(_dot3(X, X))
    f = 2.0 * m / (r**2 * (r - 2.0 * m))
    fp = -2.0 * m * (3.0 * r - 4.0 * m) / (r**3 * (r - 2.0 * m) ** 2)
    Xa = _dot3(X, a[..., 1:4])
    return ((-2.0 * m / r**3 * a[..., 0] ** 2)[..., None] * X
            + (fp / r * Xa**2)[..., None] * X
            + (2.0 * f * Xa)[..., None] * a[..., 1:4])


def lambda_gradient(U, m, which="minus"):
    """Analytic gradient of a characteristic speed with respect to U.

    Implicit differentiation of ``g~(v + lam w, v + lam w) = 0`` gives
    ``dlam/dv^A = -+ g~_AB N^B / sqrt(-delta)`` with ``N = v + lam w``,
    ``dlam/dw = lam dlam/dv`` and the position derivative from
    ``d g~``.  Valid for ``g11 > 0``.
    """
    u, v, w = split_state(U)
    g = induced_metric_cartesian(U, m)
    lm, lp = eigenvalues(g)
    lam = lm if which == "minus" else lp
    sign = 1.0 if which == "minus" else -1.0
    root = np.sqrt(-g.delta)
    N = v + lam[..., None] * w
    r = np.sqrt(_dot3(u[..., 1:4], u[..., 1:4]))
    lower = N.copy()
    if m > 0:
        A = 1.0 - 2.0 * m / r
        f = 2.0 * m / (r**2 * (r - 2.0 * m))
        lower[..., 0] = -A * N[..., 0]
        lower[..., 1:4] = N[..., 1:4] + (f * _dot3(u[..., 1:4], N[..., 1:4]))[..., None] * u[..., 1:4]
    else:
        lower[..., 0] = -N[..., 0]
    grad = np.zeros(np.shape(U))
    dv = sign * lower / root[..., None]
    grad[..., 4:8] = dv
    grad[..., 8:12] = lam[..., None] * dv
    if m > 0:
        grad[..., 1:4] = sign * _metric_position_derivative(u, N, m) / (2.0 * root[..., None])
    return grad


def directional_derivative_fd(fun, U, direction, h):
    return (fun(U + h * direction) - fun(U - h * direction)) / (2.0 * h)


def linear_degeneracy_residual(U, m, h=1e-4):
    """Max of ``|grad lambda_- . r_i|`` (i in the lambda_- group) and
    ``|grad lambda_+ . r_i|`` (lambda_+ group), by central differences.
    """
    U = np.asarray(U, dtype=float)
    es = eigenvectors(induced_metric_cartesian(U, m))
    out = np.zeros(U.shape[:-1])
    for k, which in ((4, 0), (8, 1)):
        for i in range(4):
            rvec = es.right[..., k + i, :]
            scale = np.linalg.norm(rvec, axis=-1, keepdims=True)
            d = directional_derivative_fd(
                lambda V: state_eigenvalues(V, m)[which], U, rvec / scale, h)
            out = np.maximum(out, np.abs(d))
    return out


def second_order_residual(position, x_t, x_th, x_tt, x_tth, x_thth, m, christoffel):
    """Compare the first-order system with the extremal equation.

    ``christoffel`` is the ambient ``Gamma~[..., C, A, B]`` at ``position``.
    Returns ``max |x_tt - (-(A U_theta + B))_v - (delta/g11) E|``, where E is
    assembled independently from the Christoffel symbols; the velocity row
    of the first-order system must reproduce ``E = 0`` up to the factor.
    """
    U = join_state(position, x_t, x_th)
    A, B = assemble_A_B(U, m)
    U_th = join_state(x_th, x_tth, x_thth)
    v_t = -(np.einsum("...ij,...j->...i", A, U_th) + B)[..., 4:8]
    g = induced_metric_cartesian(U, m)
    acc = (x_tt * g.g11[..., None] - 2.0 * x_tth * g.g01[..., None]
           + x_thth * g.g00[..., None])
    acc = acc + (np.einsum("...cab,...a,...b->...c", christoffel, x_t, x_t) * g.g11[..., None]
                 - 2.0 * np.einsum("...cab,...a,...b->...c", christoffel, x_t, x_th) * g.g01[..., None]
                 + np.einsum("...cab,...a,...b->...c", christoffel, x_th, x_th) * g.g00[..., None])
    # (delta/g11) E = acc / g11
    return np.max(np.abs((x_tt - v_t) - acc / g.g11[..., None]), axis=-1)


def riemann_invariant_residual(dt, dtheta, lam_minus, lam_plus):
    """Discrete residuals of the speed transport equations.

    ``lam_minus_t + lam_plus lam_minus_theta`` and
    ``lam_plus_t + lam_minus lam_plus_theta`` by centred differences on
    interior nodes of ``(nt, ntheta)`` arrays.  Returns the two max norms.
    """
    lm = np.asarray(lam_minus, dtype=float)
    lp = np.asarray(lam_plus, dtype=float)

    def resid(a, speed):
        at = (a[2:, 1:-1] - a[:-2, 1:-1]) / (2.0 * dt)
        ath = (a[1:-1, 2:] - a[1:-1, :-2]) / (2.0 * dtheta)
        return np.max(np.abs(at + speed[1:-1, 1:-1] * ath))

    return resid(lm, lp), resid(lp, lm)


def random_admissible_states(rng, m, count, r_range=(4.0, 12.0), g11_min=0.05,
                             max_rounds=100):
    """Rejection-sample time-like 12-vectors ``U`` outside the horizon.

    Positions have areal radius uniform in ``r_range`` (units of m, or plain
    lengths when m = 0); velocity and tangent components are uniform in
    [-1, 1] with the time velocity shifted by 1.  States are kept when
    ``delta < -1e-3`` and ``g11 > g11_min``.
    """
    keep = []
    have = 0
    scale = m if m > 0 else 1.0
    for _ in range(max_rounds):
        n = max(2 * (count - have), 64)
        d = rng.normal(size=(n, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        r = rng.uniform(r_range[0] * scale, r_range[1] * scale, size=n)
        u = np.zeros((n, 4))
        u[:, 0] = rng.uniform(-1.0, 1.0, size=n)
        u[:, 1:] = d * r[:, None]
        v = rng.uniform(-1.0, 1.0, size=(n, 4))
        v[:, 0] += 1.0
        w = rng.uniform(-1.0, 1.0, size=(n, 4))
        U = join_state(u, v, w)
        g = induced_metric_cartesian(U, m)
        ok = (g.delta < -1e-3) & (g.g11 > g11_min)
        keep.append(U[ok])
        have += int(ok.sum())
        if have >= count:
            return np.concatenate(keep)[:count]
    raise RuntimeError("rejection sampling did not produce enough states")
