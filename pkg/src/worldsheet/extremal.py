"""Extremal sub-manifolds of arbitrary dimension in a Lorentzian ambient space.

A (p+1)-dimensional world volume ``x^A(u^mu)`` is described locally by its
2-jet: the position, the tangent matrix ``Q[A, mu] = dx^A/du^mu`` and the
second derivatives ``x^A_{mu nu}``.  From these we build

* the induced metric ``g = Q^T g~ Q``,
* ``E^C = g^{mu nu}(x^C_{mu nu} + Gamma~^C_{AB} x^A_mu x^B_nu)``,
* ``G = Q g^{-1} Q^T`` and the projector ``M = I - G g~``.

The extremal equations are equivalent to ``M E = 0``; ``M`` has spectrum
``{0^(p+1), 1^(n-p)}`` and annihilates the tangent space.  Every function
here is batched over leading axes.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMetric, NotTimelike
from .geometry import MetricField, MetricKind, evaluate_metric

DET_FLOOR = 1e-14


@dataclass(frozen=True)
class ImmersionJet:
    """2-jet of an immersion.

    position: (..., D); tangent: (..., D, k); second: (..., D, k, k) with
    ``k = p + 1`` and ``D = n + 1``.
    """

    position: np.ndarray
    tangent: np.ndarray
    second: np.ndarray

    @property
    def ambient_dim(self):
        return self.tangent.shape[-2]

    @property
    def sheet_dim(self):
        return self.tangent.shape[-1]

    def shifted(self, delta):
        """2-jet data of the quadratic Taylor immersion at ``u0 + delta``.

        Returns (position, tangent) only; the second derivatives of a
        quadratic are constant.
        """
        d = np.asarray(delta, dtype=float)
        pos = (self.position + self.tangent @ d
               + 0.5 * np.einsum("...amn,m,n->...a", self.second, d, d))
        tan = self.tangent + np.einsum("...amn,n->...am", self.second, d)
        return pos, tan


@dataclass(frozen=True)
class InducedMetric:
    g: np.ndarray
    ginv: np.ndarray
    det: np.ndarray

    @property
    def timelike(self):
        return self.det < 0


@dataclass(frozen=True)
class FrameworkMatrices:
    G: np.ndarray
    M: np.ndarray
    E: np.ndarray


def pullback(gt, tangent):
    return np.einsum("...am,...ab,...bn->...mn", tangent, gt, tangent)


def induced_metric(jet, metric, floor=DET_FLOOR):
    """Pull back the ambient metric ``metric.g`` along ``jet.tangent``."""
    g = pullback(metric.g, jet.tangent)
    det = np.linalg.det(g)
    if np.any(np.abs(det) < floor):
        raise DegenerateMetric(f"|det g| = {np.min(np.abs(det)):.3g} below {floor:g}")
    return InducedMetric(g, np.linalg.inv(g), det)


def compute_E(jet, metric, induced):
    acc = jet.second + np.einsum("...cab,...am,...bn->...cmn",
                                 metric.christoffel, jet.tangent, jet.tangent)
    return np.einsum("...mn,...cmn->...c", induced.ginv, acc)


def framework_matrices(jet, metric, induced):
    Q = jet.tangent
    G = np.einsum("...am,...mn,...bn->...ab", Q, induced.ginv, Q)
    D = Q.shape[-2]
    M = np.eye(D) - G @ metric.g
    return FrameworkMatrices(G, M, compute_E(jet, metric, induced))


def _require_timelike(induced):
    if np.any(~induced.timelike):
        raise NotTimelike("induced metric has det >= 0")


def extremal_operator_fd(jet, field, h):
    """Extremal operator assembled with induced Christoffels from differences.

    Returns ``g^{mu nu}(x^C_{mu nu} - Gamma^rho_{mu nu} x^C_rho
    + Gamma~^C_{AB} x^A_mu x^B_nu)`` where ``Gamma^rho_{mu nu}`` comes from
    central differences (step ``h``) of the induced metric along the
    quadratic Taylor immersion of ``jet``.
    """
    k = jet.sheet_dim
    mv = evaluate_metric(field, jet.position)
    ind = induced_metric(jet, mv)
    dg = np.empty(ind.g.shape[:-2] + (k, k, k))
    for r in range(k):
        e = np.zeros(k)
        e[r] = h
        gs = []
        for sgn in (1.0, -1.0):
            pos, tan = jet.shifted(sgn * e)
            gs.append(pullback(evaluate_metric(field, pos).g, tan))
        dg[..., r, :, :] = (gs[0] - gs[1]) / (2.0 * h)
    # low[s, m, n] = (d_m g_sn + d_n g_sm - d_s g_mn) / 2
    low = 0.5 * (np.einsum("...msn->...smn", dg)
                 + np.einsum("...nsm->...smn", dg) - dg)
    gam = np.einsum("...rs,...smn->...rmn", ind.ginv, low)
    acc = (jet.second
           - np.einsum("...rmn,...cr->...cmn", gam, jet.tangent)
           + np.einsum("...cab,...am,...bn->...cmn",
                       mv.christoffel, jet.tangent, jet.tangent))
    return np.einsum("...mn,...cmn->...c", ind.ginv, acc)


def theorem21_residual(jet, field, h=1e-4):
    """``max |extremal operator - M E|`` with the operator from differences."""
    mv = evaluate_metric(field, jet.position)
    ind = induced_metric(jet, mv)
    fm = framework_matrices(jet, mv, ind)
    lhs = extremal_operator_fd(jet, field, h)
    rhs = np.einsum("...ab,...b->...a", fm.M, fm.E)
    return np.max(np.abs(lhs - rhs), axis=-1)


def m_matrix_spectrum(jet, metric, induced, tol=1e-9):
    """Rank of ``M`` and its eigenvalues sorted by real part.

    Raises NotTimelike when the induced metric is not Lorentzian-signed.
    """
    _require_timelike(induced)
    M = framework_matrices(jet, metric, induced).M
    ev = np.linalg.eigvals(M)
    ev = np.take_along_axis(ev, np.argsort(ev.real, axis=-1), axis=-1)
    sv = np.linalg.svd(M, compute_uv=False)
    rank = np.sum(sv > tol * np.maximum(sv[..., :1], 1.0), axis=-1)
    return rank, ev


def expected_spectrum(n, p):
    return np.array([0.0] * (p + 1) + [1.0] * (n - p))


def annihilation_check(jet, metric, induced):
    """``(max|M Q Q^T|, max|Q^T M Q|)`` relative to ``max|Q|^2``."""
    _require_timelike(induced)
    M = framework_matrices(jet, metric, induced).M
    Q = jet.tangent
    scale = np.max(np.abs(Q), axis=(-2, -1)) ** 2
    a = np.max(np.abs(M @ Q @ np.swapaxes(Q, -1, -2)), axis=(-2, -1)) / scale
    b = np.max(np.abs(np.swapaxes(Q, -1, -2) @ M @ Q), axis=(-2, -1)) / scale
    return a, b


def _sample_positions(rng, field, count, r_range=(3.0, 12.0)):
    D = field.dim
    pos = rng.uniform(-1.0, 1.0, size=(count, D))
    if field.kind is MetricKind.MINKOWSKI:
        return pos * 5.0
    m = field.mass
    r = rng.uniform(r_range[0] * m, r_range[1] * m, size=count)
    if field.kind is MetricKind.SCHWARZSCHILD_SPHERICAL:
        pos[:, 1] = r
        pos[:, 2] = rng.uniform(0.3, np.pi - 0.3, size=count)
        pos[:, 3] = rng.uniform(-np.pi, np.pi, size=count)
        return pos
    d = rng.normal(size=(count, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    pos[:, 1:4] = d * r[:, None]
    return pos


def random_timelike_jets(rng, field, p, count, det_max=-1e-3, cond_max=np.inf,
                         r_range=(3.0, 12.0), curvature=1.0, max_rounds=100):
    """Rejection-sample ``count`` time-like 2-jets of a (p+1)-sheet.

    Tangent components are uniform in [-1, 1] and second-derivative
    components uniform in [-curvature, curvature]; the
    time component of the first tangent column is shifted by 1 so that most
    draws are time-like.  Draws are kept when ``det g < det_max`` and the
    induced metric has exactly one negative eigenvalue; ``cond_max`` bounds
    the condition number of the induced metric when finite.  Areal radii
    are uniform in ``r_range`` (in units of the mass).
    """
    D = field.dim
    k = p + 1
    keep_pos, keep_tan, keep_sec = [], [], []
    have = 0
    for _ in range(max_rounds):
        batch = max(2 * (count - have), 64)
        pos = _sample_positions(rng, field, batch, r_range)
        tan = rng.uniform(-1.0, 1.0, size=(batch, D, k))
        tan[:, 0, 0] += 1.0
        sec = rng.uniform(-curvature, curvature, size=(batch, D, k, k))
        sec = 0.5 * (sec + np.swapaxes(sec, -1, -2))
        if field.kind is MetricKind.SCHWARZSCHILD_SPHERICAL:
            # angular rates divided by r so physical speeds stay O(1)
            tan[:, 2:4, :] /= pos[:, 1:2, None]
            sec[:, 2:4] /= pos[:, 1:2, None, None]
        g = pullback(evaluate_metric(field, pos).g, tan)
        det = np.linalg.det(g)
        nneg = np.sum(np.linalg.eigvalsh(g) < 0, axis=-1)
        ok = (det < det_max) & (nneg == 1)
        if np.isfinite(cond_max):
            ok &= np.linalg.cond(g) < cond_max
        keep_pos.append(pos[ok])
        keep_tan.append(tan[ok])
        keep_sec.append(sec[ok])
        have += int(ok.sum())
        if have >= count:
            break
    else:
        raise RuntimeError("rejection sampling did not produce enough jets")
    return ImmersionJet(np.concatenate(keep_pos)[:count],
                        np.concatenate(keep_tan)[:count],
                        np.concatenate(keep_sec)[:count])


def manufactured_jets(rng, field, p, count):
    """Well-conditioned jets for difference-based identity checks.

    Moderate curvature and a bounded condition number keep the O(h^2)
    truncation error of the induced-Christoffel differences small.
    """
    return random_timelike_jets(rng, field, p, count, det_max=-0.1,
                                cond_max=10.0, r_range=(4.0, 12.0),
                                curvature=0.5)


def field_for_dimensions(kind, n, mass=1.0):
    """Ambient field with ``n`` spatial dimensions built on a 4D chart."""
    if n < 3:
        raise ValueError("at least three spatial dimensions are required")
    if MetricKind(kind) is MetricKind.MINKOWSKI:
        return MetricField.minkowski(extra_flat_dims=n - 3)
    return MetricField(kind, mass, extra_flat_dims=n - 3)
