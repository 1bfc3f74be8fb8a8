"""Complex-plane and unit-sphere primitives.

The warp pipeline composes three maps: a gnomonic-style pixel-to-sphere
mapping, stereographic projection between the sphere and the complex
plane, and a Mobius transform with real coefficients acting on the
plane.  All scalar operations here have vectorized counterparts
(suffixed ``_grid``) that operate on whole numpy arrays; the scalar and
grid paths implement identical formulas and are cross-checked in tests.

Conventions (fixed here, used everywhere else):

* Stereographic projection uses the north pole: ``sigma(x, y, z) =
  (x + i y) / (1 - z)``.  The image footprint sits around the south
  pole ``(0, 0, -1)`` so the singularity stays off-image.
* Continuous image coordinates ``(u, v)`` run over ``[0, W] x [0, H]``
  with the pixel ``(i, j)`` centered at ``(i + 0.5, j + 0.5)``.
* Mobius coefficients are canonicalized to determinant one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateParams, OutOfBounds

# Determinants below this are treated as degenerate.
DET_EPSILON = 1e-6
# Denominators below this are treated as the point at infinity.
POLE_EPSILON = 1e-12


@dataclass(frozen=True)
class MobiusParams:
    """Real coefficients (a, b, c, d) of ``w -> (a w + b) / (c w + d)``."""

    a: float
    b: float
    c: float
    d: float

    @staticmethod
    def identity() -> "MobiusParams":
        return MobiusParams(1.0, 0.0, 0.0, 1.0)

    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d], dtype=np.float64)

    @staticmethod
    def from_array(values) -> "MobiusParams":
        a, b, c, d = (float(x) for x in values)
        return MobiusParams(a, b, c, d)


@dataclass(frozen=True)
class ComplexPoint:
    """A point on the extended complex plane.

    ``at_infinity`` marks the single point at infinity; ``re``/``im``
    are ignored (kept at zero) in that case.
    """

    re: float
    im: float
    at_infinity: bool = False

    @staticmethod
    def infinity() -> "ComplexPoint":
        return ComplexPoint(0.0, 0.0, True)

    @staticmethod
    def from_complex(z: complex) -> "ComplexPoint":
        return ComplexPoint(float(z.real), float(z.imag))

    def to_complex(self) -> complex:
        if self.at_infinity:
            raise ValueError("point at infinity has no finite value")
        return complex(self.re, self.im)


@dataclass(frozen=True)
class SpherePoint:
    """A direction on the unit sphere (unit norm within 1e-9)."""

    x: float
    y: float
    z: float

    @staticmethod
    def normalized(x: float, y: float, z: float) -> "SpherePoint":
        n = math.sqrt(x * x + y * y + z * z)
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return SpherePoint(x / n, y / n, z / n)


@dataclass(frozen=True)
class SphereGeom:
    """How the image rectangle sits on the sphere.

    ``fov_deg`` is the horizontal angular extent of the image; the
    vertical extent follows from the aspect ratio (square pixels).
    """

    width_px: int
    height_px: int
    fov_deg: float = 90.0

    def __post_init__(self):
        if self.width_px <= 0 or self.height_px <= 0:
            raise ValueError("image dimensions must be positive")
        if not (0.0 < self.fov_deg < 180.0):
            raise ValueError("fov_deg must lie strictly inside (0, 180)")

    @property
    def half_tangent(self) -> float:
        return math.tan(math.radians(self.fov_deg) / 2.0)


def normalize(params: MobiusParams) -> MobiusParams:
    """Scale coefficients to determinant one.

    Negative determinants are absorbed by negating (a, b) after
    scaling by 1/sqrt(|det|); positive determinants scale by
    1/sqrt(det) and leave the induced map untouched.

    Raises DegenerateParams when |det| < 1e-6.
    """
    det = params.det()
    if abs(det) < DET_EPSILON:
        raise DegenerateParams(f"|ad - bc| = {abs(det):.3e} below {DET_EPSILON:.0e}")
    # Already canonical: return unchanged so normalization is exactly idempotent.
    if abs(det - 1.0) < 1e-12:
        return params
    s = 1.0 / math.sqrt(abs(det))
    if det < 0.0:
        return MobiusParams(-params.a * s, -params.b * s, params.c * s, params.d * s)
    return MobiusParams(params.a * s, params.b * s, params.c * s, params.d * s)


def mobius_apply(params: MobiusParams, w: ComplexPoint) -> ComplexPoint:
    """Evaluate ``(a w + b) / (c w + d)`` on the extended plane.

    The pole ``w = -d/c`` maps to infinity and infinity maps to
    ``a/c`` (or stays at infinity when c = 0); both are carried
    in-band rather than raised.
    """
    a, b, c, d = params.a, params.b, params.c, params.d
    if w.at_infinity:
        if abs(c) < POLE_EPSILON:
            return ComplexPoint.infinity()
        return ComplexPoint(a / c, 0.0)
    z = w.to_complex()
    den = c * z + d
    if abs(den) < POLE_EPSILON:
        return ComplexPoint.infinity()
    return ComplexPoint.from_complex((a * z + b) / den)


def mobius_inverse_apply(params: MobiusParams, w: ComplexPoint) -> ComplexPoint:
    """Evaluate the inverse map ``(d w - b) / (-c w + a)``.

    For determinant-one coefficients this is the exact two-sided
    inverse of :func:`mobius_apply`.
    """
    return mobius_apply(mobius_adjugate(params), w)


def mobius_adjugate(params: MobiusParams) -> MobiusParams:
    """Coefficients (d, -b, -c, a) of the inverse map; same determinant."""
    return MobiusParams(params.d, -params.b, -params.c, params.a)


def mobius_compose(outer: MobiusParams, inner: MobiusParams) -> MobiusParams:
    """Matrix product outer @ inner, i.e. apply ``inner`` first."""
    return MobiusParams(
        outer.a * inner.a + outer.b * inner.c,
        outer.a * inner.b + outer.b * inner.d,
        outer.c * inner.a + outer.d * inner.c,
        outer.c * inner.b + outer.d * inner.d,
    )


def stereo_project(s: SpherePoint) -> ComplexPoint:
    """North-pole stereographic projection ``(x + i y) / (1 - z)``."""
    if 1.0 - s.z < POLE_EPSILON:
        return ComplexPoint.infinity()
    return ComplexPoint(s.x / (1.0 - s.z), s.y / (1.0 - s.z))


def stereo_unproject(z: ComplexPoint) -> SpherePoint:
    """Inverse stereographic projection; infinity maps to the north pole."""
    if z.at_infinity:
        return SpherePoint(0.0, 0.0, 1.0)
    r2 = z.re * z.re + z.im * z.im
    denom = r2 + 1.0
    return SpherePoint(2.0 * z.re / denom, 2.0 * z.im / denom, (r2 - 1.0) / denom)


def pixel_to_sphere(u: float, v: float, geom: SphereGeom) -> SpherePoint:
    """Map a continuous image coordinate to its spherical direction.

    The rectangle is centered on the optical axis ``(0, 0, -1)`` and
    subtends ``fov_deg`` horizontally: ``p = tan(fov/2) (2u/W - 1)``,
    ``q = tan(fov/2) (2v/H - 1) (H/W)``, ``s = normalize(p, q, -1)``.
    """
    w, h = geom.width_px, geom.height_px
    if not (0.0 <= u <= w and 0.0 <= v <= h):
        raise OutOfBounds(f"({u}, {v}) outside [0, {w}] x [0, {h}]")
    t = geom.half_tangent
    p = t * (2.0 * u / w - 1.0)
    q = t * (2.0 * v / h - 1.0) * (h / w)
    n = math.sqrt(p * p + q * q + 1.0)
    return SpherePoint(p / n, q / n, -1.0 / n)


def sphere_to_pixel(s: SpherePoint, geom: SphereGeom) -> tuple[float, float, bool]:
    """Project a spherical direction back to image coordinates.

    Returns ``(u, v, inside)``; ``inside`` is False for directions on
    or behind the projection plane (z >= 0) or landing outside the
    image rectangle.  The coordinates are only meaningful when the
    direction points into the front hemisphere.
    """
    w, h = geom.width_px, geom.height_px
    if s.z > -POLE_EPSILON:
        return 0.0, 0.0, False
    p = -s.x / s.z
    q = -s.y / s.z
    scale = w / (2.0 * geom.half_tangent)
    u = w / 2.0 + p * scale
    v = h / 2.0 + q * scale
    inside = 0.0 <= u <= w and 0.0 <= v <= h
    return u, v, inside


# ----------------------------------------------------------------------
# Vectorized counterparts used by the warp module.  Same formulas as the
# scalar operations above, evaluated on whole grids.
# ----------------------------------------------------------------------


def pixel_grid_to_plane(geom: SphereGeom) -> np.ndarray:
    """Complex-plane coordinates of every pixel center, shape (H, W)."""
    w, h = geom.width_px, geom.height_px
    t = geom.half_tangent
    us = (np.arange(w, dtype=np.float64) + 0.5)
    vs = (np.arange(h, dtype=np.float64) + 0.5)
    p = t * (2.0 * us / w - 1.0)
    q = t * (2.0 * vs / h - 1.0) * (h / w)
    pp, qq = np.meshgrid(p, q)
    n = np.sqrt(pp * pp + qq * qq + 1.0)
    sx, sy, sz = pp / n, qq / n, -1.0 / n
    # 1 - sz > 1 on the footprint, so the projection never hits the pole.
    return (sx + 1j * sy) / (1.0 - sz)


def mobius_apply_grid(
    params: MobiusParams, w: np.ndarray, inverse: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    """Apply the (inverse) Mobius map to a complex grid.

    Returns ``(z, finite)`` where ``finite`` is False at entries whose
    denominator vanished (the point at infinity).
    """
    if inverse:
        a, b, c, d = params.d, -params.b, -params.c, params.a
    else:
        a, b, c, d = params.a, params.b, params.c, params.d
    den = c * w + d
    finite = np.abs(den) >= POLE_EPSILON
    safe = np.where(finite, den, 1.0)
    z = (a * w + b) / safe
    return np.where(finite, z, 0.0), finite


def plane_to_pixel_grid(
    z: np.ndarray, finite: np.ndarray, geom: SphereGeom
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Lift complex-plane points back to the sphere and project to pixels.

    Returns ``(u, v, inside)``; coordinates are zeroed wherever the
    direction misses the image footprint (``inside`` False).
    """
    w, h = geom.width_px, geom.height_px
    r2 = z.real * z.real + z.imag * z.imag
    denom = r2 + 1.0
    sx = 2.0 * z.real / denom
    sy = 2.0 * z.imag / denom
    sz = (r2 - 1.0) / denom
    front = finite & (sz < -POLE_EPSILON)
    sz_safe = np.where(front, sz, -1.0)
    scale = w / (2.0 * geom.half_tangent)
    u = w / 2.0 + (-sx / sz_safe) * scale
    v = h / 2.0 + (-sy / sz_safe) * scale
    inside = front & (u >= 0.0) & (u <= w) & (v >= 0.0) & (v <= h)
    return np.where(inside, u, 0.0), np.where(inside, v, 0.0), inside
