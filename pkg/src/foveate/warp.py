"""Whole-image Mobius warps via pull-back bilinear sampling.

Both warps gather: every output pixel maps its center through the
pixel -> sphere -> plane chain, moves it with the Mobius transform
(the forward warp uses the inverse coefficients, as a pull-back must),
and bilinearly samples the source there.  Pixels whose pull-back exits
the source footprint are filled with black and flagged in the coverage
mask so that downstream metrics can ignore invented content.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import geometry
from .errors import DimensionMismatch
from .geometry import MobiusParams, SphereGeom


@dataclass(frozen=True)
class ImageBuffer:
    """An H x W x 3 raster with float samples in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = self.data
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"expected (H, W, 3) data, got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image samples must be finite")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("image samples must lie in [0, 1]")

    @staticmethod
    def from_array(arr: np.ndarray, clip: bool = False) -> "ImageBuffer":
        """Wrap an array as an image; ``clip`` snips float-roundoff overshoot."""
        arr = np.asarray(arr, dtype=np.float64)
        if clip:
            arr = np.clip(arr, 0.0, 1.0)
        return ImageBuffer(arr)

    @staticmethod
    def full(width: int, height: int, value=0.0) -> "ImageBuffer":
        data = np.empty((height, width, 3), dtype=np.float64)
        data[:] = value
        return ImageBuffer(data)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def geom(self, fov_deg: float = 90.0) -> SphereGeom:
        return SphereGeom(self.width, self.height, fov_deg)


@dataclass(frozen=True)
class CoverageMask:
    """Per-pixel flag: True where the pull-back stayed inside the source."""

    inside: np.ndarray

    def __post_init__(self):
        if self.inside.ndim != 2 or self.inside.dtype != np.bool_:
            raise ValueError("coverage mask must be a 2-d bool array")

    @property
    def interior_fraction(self) -> float:
        return float(self.inside.mean())


def bilinear_sample(img: ImageBuffer, x: float, y: float) -> tuple[np.ndarray, bool]:
    """Sample at (x, y) with pixel centers on the integer lattice.

    Coordinates within half a pixel of the rectangle are border-clamped;
    anything farther out returns black with ``inside`` False.
    """
    w, h = img.width, img.height
    inside = -0.5 <= x <= w - 0.5 and -0.5 <= y <= h - 0.5
    if not inside:
        return np.zeros(3, dtype=np.float64), False
    color = _gather(img.data, np.array([x]), np.array([y]))[0]
    return color, True


def _gather(data: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Vectorized border-clamped bilinear lookup; xs/ys in lattice coords."""
    h, w = data.shape[:2]
    xc = np.clip(xs, 0.0, w - 1.0)
    yc = np.clip(ys, 0.0, h - 1.0)
    x0 = np.clip(np.floor(xc).astype(np.intp), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(yc).astype(np.intp), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xc - x0)[..., None]
    fy = (yc - y0)[..., None]
    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bot = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def _mobius_warp(
    img: ImageBuffer, params: MobiusParams, geom: SphereGeom, inverse: bool
) -> tuple[ImageBuffer, CoverageMask]:
    if (geom.width_px, geom.height_px) != (img.width, img.height):
        raise DimensionMismatch(
            f"geom {geom.width_px}x{geom.height_px} vs image {img.width}x{img.height}"
        )
    params = geometry.normalize(params)
    w_grid = geometry.pixel_grid_to_plane(geom)
    # Pull-back: the forward warp moves source points with the Mobius map,
    # so each output pixel looks up its source through the inverse map.
    z, finite = geometry.mobius_apply_grid(params, w_grid, inverse=not inverse)
    u, v, inside = geometry.plane_to_pixel_grid(z, finite, geom)
    colors = _gather(img.data, u - 0.5, v - 0.5)
    colors[~inside] = 0.0
    return ImageBuffer.from_array(colors, clip=True), CoverageMask(inside)


def forward_warp(
    img: ImageBuffer, params: MobiusParams, geom: SphereGeom
) -> tuple[ImageBuffer, CoverageMask]:
    """Warp the image with the Mobius map (magnification toward its fixed region)."""
    return _mobius_warp(img, params, geom, inverse=False)


def inverse_warp(
    img: ImageBuffer, params: MobiusParams, geom: SphereGeom
) -> tuple[ImageBuffer, CoverageMask]:
    """Undo :func:`forward_warp`; equals the forward warp of the matrix inverse."""
    return _mobius_warp(img, params, geom, inverse=True)


def psnr(a: ImageBuffer, b: ImageBuffer, mask: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB over an optional pixel mask."""
    if a.data.shape != b.data.shape:
        raise DimensionMismatch(f"{a.data.shape} vs {b.data.shape}")
    diff = (a.data - b.data) ** 2
    if mask is not None:
        if not mask.any():
            return float("inf")
        diff = diff[mask]
    mse = float(np.mean(diff))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)
