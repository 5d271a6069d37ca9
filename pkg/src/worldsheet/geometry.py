"""Ambient Lorentzian metrics and their Christoffel symbols.

Three charts are provided: Schwarzschild in Cartesian coordinates
``(x0, x1, x2, x3)``, Schwarzschild in spherical coordinates
``(t, r, alpha, beta)`` and flat Minkowski space.  Geometric units are used
throughout (G = c = 1), so the mass ``m`` is a length.

All evaluators accept a single point of shape ``(D,)`` or a batch of shape
``(..., D)``.  Christoffel symbols are indexed ``gamma[..., C, A, B]`` for
``Gamma^C_{AB}``.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import HorizonViolation, PolarSingularity

__all__ = [
    "MetricKind",
    "MetricField",
    "MetricValue",
    "evaluate_metric",
    "metric_derivative_fd",
    "christoffel_numeric_check",
    "cartesian_to_spherical",
    "spherical_to_cartesian",
    "spherical_jacobian",
]

DEFAULT_HORIZON_MARGIN = 1e-6
DEFAULT_POLAR_MARGIN = 1e-3


class MetricKind(str, Enum):
    SCHWARZSCHILD_CARTESIAN = "schwarzschild-cartesian"
    SCHWARZSCHILD_SPHERICAL = "schwarzschild-spherical"
    MINKOWSKI = "minkowski"


@dataclass(frozen=True)
class MetricField:
    """An ambient metric: its chart, its mass and its validity margins.

    ``extra_flat_dims`` appends flat spatial directions, giving the product
    metric ``g (+) I``.  This is how ambient spaces with more than three
    spatial dimensions are built.
    """

    kind: MetricKind
    mass: float = 0.0
    horizon_margin: float = DEFAULT_HORIZON_MARGIN
    polar_margin: float = DEFAULT_POLAR_MARGIN
    extra_flat_dims: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", MetricKind(self.kind))
        if self.mass < 0:
            raise ValueError("mass must be nonnegative")
        if self.kind is MetricKind.MINKOWSKI and self.mass != 0:
            raise ValueError("Minkowski metric carries no mass")
        if self.kind is not MetricKind.MINKOWSKI and self.mass <= 0:
            raise ValueError("Schwarzschild metrics need mass > 0")
        if self.extra_flat_dims < 0:
            raise ValueError("extra_flat_dims must be nonnegative")

    @property
    def dim(self):
        return 4 + self.extra_flat_dims

    @property
    def horizon_radius(self):
        """Smallest admissible areal radius, ``2m(1 + margin)``."""
        return 2.0 * self.mass * (1.0 + self.horizon_margin)

    @classmethod
    def minkowski(cls, extra_flat_dims=0):
        return cls(MetricKind.MINKOWSKI, 0.0, extra_flat_dims=extra_flat_dims)

    @classmethod
    def schwarzschild(cls, mass=1.0, spherical=False, **kw):
        kind = (MetricKind.SCHWARZSCHILD_SPHERICAL if spherical
                else MetricKind.SCHWARZSCHILD_CARTESIAN)
        return cls(kind, float(mass), **kw)


@dataclass(frozen=True)
class MetricValue:
    """Metric, inverse metric and Christoffel symbols at one or more points."""

    g: np.ndarray
    ginv: np.ndarray
    christoffel: np.ndarray


def _check_horizon(field, r):
    if field.mass > 0 and np.any(r <= field.horizon_radius):
        raise HorizonViolation(
            f"r = {np.min(r):.6g} is not outside 2m(1+margin) = "
            f"{field.horizon_radius:.6g}")


def _cartesian(field, x):
    m = field.mass
    X = x[..., 1:4]
    r2 = np.einsum("...i,...i->...", X, X)
    r = np.sqrt(r2)
    _check_horizon(field, r)
    shape = x.shape[:-1]
    g = np.zeros(shape + (4, 4))
    ginv = np.zeros(shape + (4, 4))
    gam = np.zeros(shape + (4, 4, 4))
    eye3 = np.eye(3)
    if m == 0:
        g[...] = np.diag([-1.0, 1.0, 1.0, 1.0])
        ginv[...] = g
        return g, ginv, gam

    A = 1.0 - 2.0 * m / r
    f = 2.0 * m / (r2 * (r - 2.0 * m))
    XX = X[..., :, None] * X[..., None, :]
    g[..., 0, 0] = -A
    g[..., 1:, 1:] = eye3 + f[..., None, None] * XX
    ginv[..., 0, 0] = -1.0 / A
    ginv[..., 1:, 1:] = eye3 - (2.0 * m / r**3)[..., None, None] * XX

    g0 = m / (r2 * (r - 2.0 * m))
    gam[..., 0, 0, 1:] = g0[..., None] * X
    gam[..., 0, 1:, 0] = g0[..., None] * X
    gam[..., 1:, 0, 0] = (m * (r - 2.0 * m) / r**4)[..., None] * X
    c1 = 2.0 * m / r**3
    c2 = m * (3.0 * r - 4.0 * m) / (r**5 * (r - 2.0 * m))
    inner = c1[..., None, None] * eye3 - c2[..., None, None] * XX
    gam[..., 1:, 1:, 1:] = X[..., :, None, None] * inner[..., None, :, :]
    return g, ginv, gam


def _spherical(field, x):
    m = field.mass
    r = x[..., 1]
    a = x[..., 2]
    _check_horizon(field, r)
    s = np.sin(a)
    c = np.cos(a)
    if np.any(np.abs(s) < field.polar_margin):
        raise PolarSingularity(
            f"|sin(alpha)| = {np.min(np.abs(s)):.3g} below polar margin "
            f"{field.polar_margin:g}")
    A = 1.0 - 2.0 * m / r
    shape = x.shape[:-1]
    g = np.zeros(shape + (4, 4))
    ginv = np.zeros(shape + (4, 4))
    gam = np.zeros(shape + (4, 4, 4))
    diag = np.stack([-A, 1.0 / A, r**2, (r * s) ** 2], axis=-1)
    idx = np.arange(4)
    g[..., idx, idx] = diag
    ginv[..., idx, idx] = 1.0 / diag

    gam[..., 0, 0, 1] = gam[..., 0, 1, 0] = m / (r * (r - 2.0 * m))
    gam[..., 1, 0, 0] = m * A / r**2
    gam[..., 1, 1, 1] = -m / (r * (r - 2.0 * m))
    gam[..., 1, 2, 2] = -r * A
    gam[..., 1, 3, 3] = -r * A * s**2
    gam[..., 2, 1, 2] = gam[..., 2, 2, 1] = 1.0 / r
    gam[..., 2, 3, 3] = -s * c
    gam[..., 3, 1, 3] = gam[..., 3, 3, 1] = 1.0 / r
    gam[..., 3, 2, 3] = gam[..., 3, 3, 2] = c / s
    return g, ginv, gam


def evaluate_metric(field, point):
    """Metric, inverse and Christoffel symbols of ``field`` at ``point``.

    Raises HorizonViolation if the areal radius is not beyond
    ``2m(1 + horizon_margin)`` and PolarSingularity if the spherical chart is
    evaluated with ``|sin alpha|`` below ``polar_margin``.
    """
    x = np.asarray(point, dtype=float)
    if x.shape[-1] != field.dim:
        raise ValueError(f"point must have {field.dim} components")
    if not np.all(np.isfinite(x)):
        raise ValueError("point has non-finite components")
    x4 = x[..., :4]
    if field.kind is MetricKind.SCHWARZSCHILD_SPHERICAL:
        g, ginv, gam = _spherical(field, x4)
    else:
        g, ginv, gam = _cartesian(field, x4)
    k = field.extra_flat_dims
    if k:
        D = field.dim
        shape = x.shape[:-1]
        G = np.zeros(shape + (D, D))
        Gi = np.zeros(shape + (D, D))
        Gm = np.zeros(shape + (D, D, D))
        G[..., :4, :4] = g
        Gi[..., :4, :4] = ginv
        Gm[..., :4, :4, :4] = gam
        G[..., np.arange(4, D), np.arange(4, D)] = 1.0
        Gi[..., np.arange(4, D), np.arange(4, D)] = 1.0
        g, ginv, gam = G, Gi, Gm
    return MetricValue(g, ginv, gam)


def metric_derivative_fd(field, point, h):
    """Central-difference ``dg[..., D, A, B] = d g_AB / d x^D``."""
    x = np.asarray(point, dtype=float)
    D = field.dim
    out = np.empty(x.shape[:-1] + (D, D, D))
    for d in range(D):
        e = np.zeros(D)
        e[d] = h
        gp = evaluate_metric(field, x + e).g
        gm = evaluate_metric(field, x - e).g
        out[..., d, :, :] = (gp - gm) / (2.0 * h)
    return out


def christoffel_numeric_check(field, point, h):
    """Max abs difference between analytic and finite-difference Christoffels."""
    mv = evaluate_metric(field, point)
    dg = metric_derivative_fd(field, point, h)
    # Gamma_{D,AB} = (d_A g_DB + d_B g_DA - d_D g_AB) / 2
    low = 0.5 * (np.einsum("...adb->...dab", dg)
                 + np.einsum("...bda->...dab", dg)
                 - dg)
    fd = np.einsum("...cd,...dab->...cab", mv.ginv, low)
    return float(np.max(np.abs(fd - mv.christoffel)))


def cartesian_to_spherical(x):
    """Map ``(x0, x1, x2, x3)`` to ``(t, r, alpha, beta)``."""
    x = np.asarray(x, dtype=float)
    X = x[..., 1:4]
    r = np.linalg.norm(X, axis=-1)
    alpha = np.arccos(np.clip(X[..., 2] / r, -1.0, 1.0))
    beta = np.arctan2(X[..., 1], X[..., 0])
    return np.stack([x[..., 0], r, alpha, beta], axis=-1)


def spherical_to_cartesian(y):
    y = np.asarray(y, dtype=float)
    t, r, a, b = (y[..., i] for i in range(4))
    return np.stack([t, r * np.sin(a) * np.cos(b), r * np.sin(a) * np.sin(b),
                     r * np.cos(a)], axis=-1)


def spherical_jacobian(x):
    """``J[..., i, j] = d(t, r, alpha, beta)_i / d(x0, x1, x2, x3)_j``."""
    x = np.asarray(x, dtype=float)
    X, Y, Z = x[..., 1], x[..., 2], x[..., 3]
    rho2 = X**2 + Y**2
    rho = np.sqrt(rho2)
    r2 = rho2 + Z**2
    r = np.sqrt(r2)
    J = np.zeros(x.shape[:-1] + (4, 4))
    J[..., 0, 0] = 1.0
    J[..., 1, 1:] = np.stack([X, Y, Z], axis=-1) / r[..., None]
    J[..., 2, 1] = X * Z / (r2 * rho)
    J[..., 2, 2] = Y * Z / (r2 * rho)
    J[..., 2, 3] = -rho / r2
    J[..., 3, 1] = -Y / rho2
    J[..., 3, 2] = X / rho2
    return J
