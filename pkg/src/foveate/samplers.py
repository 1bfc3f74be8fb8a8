"""Budget-constrained sampling strategies, information-matched by construction.

Five strategies share one contract: given a pixel budget B (a fraction
of the source pixel count), take exactly ``budget_pixel_count`` source
samples and reconstruct a full-resolution image from them.  They differ
only in where the samples land:

* ``uniform``        regular grid, box-filter downsample + bilinear upsample
* ``bass``           Mobius warp, uniform sampling in warped space, unwarp
* ``static_foveated`` log-polar grid about a fixation point
* ``sunflower``      Vogel/golden-angle spiral about a fixation point
* ``radial``         full-resolution foveal disc + decaying peripheral rings

The grid-based strategies (uniform, bass) may miss the exact count by a
rounding slack bounded by max(grid_w, grid_h); the rest hit it exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from . import geometry, warp
from .geometry import MobiusParams, SphereGeom
from .warp import ImageBuffer, _gather

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))

STRATEGIES = ("uniform", "bass", "static_foveated", "sunflower", "radial")

# Tunables for the static baselines; the sources they approximate do not
# pin these, so they are fixed here for determinism.
LOG_POLAR_INNER_RADIUS = 1.0
RADIAL_FOVEA_BUDGET_SHARE = 0.5
RADIAL_RING_COUNT = 8
RADIAL_DENSITY_DECAY = 0.5


@dataclass(frozen=True)
class PixelBudget:
    """Fraction of source pixels the sampled representation may keep."""

    fraction: float

    def __post_init__(self):
        if not (0.0 < self.fraction <= 1.0):
            raise ValueError(f"budget fraction must be in (0, 1], got {self.fraction}")


@dataclass(frozen=True)
class SamplingSpec:
    """A strategy, its budget, and strategy-specific knobs."""

    strategy: str
    budget: PixelBudget
    fixation: tuple[float, float] = (0.5, 0.5)
    theta: MobiusParams | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        fx, fy = self.fixation
        if not (0.0 <= fx <= 1.0 and 0.0 <= fy <= 1.0):
            raise ValueError("fixation must lie in [0, 1]^2")
        if (self.theta is not None) != (self.strategy == "bass"):
            raise ValueError("theta must be present exactly when strategy is 'bass'")


@dataclass(frozen=True)
class SampleSet:
    """Source coordinates (lattice convention) actually read by a strategy."""

    xs: np.ndarray
    ys: np.ndarray

    @property
    def count(self) -> int:
        return int(self.xs.size)


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def budget_pixel_count(budget: PixelBudget, width: int, height: int) -> int:
    """Number of source samples the budget allows (at least 4)."""
    if width <= 0 or height <= 0:
        raise ValueError("dimensions must be positive")
    return max(4, _round_half_up(budget.fraction * width * height))


def uniform_grid_dims(budget: PixelBudget, width: int, height: int) -> tuple[int, int]:
    """Aspect-preserving grid whose cell count approximates the budget."""
    count = budget_pixel_count(budget, width, height)
    gw = min(width, max(1, _round_half_up(width * math.sqrt(budget.fraction))))
    gh = min(height, max(1, _round_half_up(count / gw)))
    return gw, gh


def strategy_sample_count(strategy: str, budget: PixelBudget, width: int, height: int) -> int:
    """Exact number of source samples a strategy takes."""
    if strategy in ("uniform", "bass"):
        gw, gh = uniform_grid_dims(budget, width, height)
        return gw * gh
    return budget_pixel_count(budget, width, height)


# ----------------------------------------------------------------------
# Uniform grid sampling (and its reuse inside the warp pipeline)
# ----------------------------------------------------------------------


def _box_downsample_axis(arr: np.ndarray, out_n: int) -> np.ndarray:
    """Exact box averaging along axis 0 via an interpolated cumulative sum."""
    n = arr.shape[0]
    if out_n == n:
        return arr
    cum = np.concatenate([np.zeros((1,) + arr.shape[1:]), np.cumsum(arr, axis=0)])
    edges = np.linspace(0.0, n, out_n + 1)
    k = np.clip(np.floor(edges).astype(np.intp), 0, n)
    frac = (edges - k).reshape((-1,) + (1,) * (arr.ndim - 1))
    upper = np.clip(k + 1, 0, n)
    integral = cum[k] + frac * (cum[upper] - cum[k])
    return (integral[1:] - integral[:-1]) * (out_n / n)


def box_downsample(img: ImageBuffer, out_w: int, out_h: int) -> ImageBuffer:
    data = _box_downsample_axis(img.data, out_h)
    data = _box_downsample_axis(np.swapaxes(data, 0, 1), out_w)
    return ImageBuffer.from_array(np.swapaxes(data, 0, 1), clip=True)


def bilinear_resize(img: ImageBuffer, out_w: int, out_h: int) -> ImageBuffer:
    """Center-aligned bilinear resize with border clamp."""
    h, w = img.height, img.width
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return ImageBuffer.from_array(_gather(img.data, gx, gy), clip=True)


def uniform_sample(img: ImageBuffer, budget: PixelBudget) -> ImageBuffer:
    """Spread the budget evenly: box-filter down, bilinear back up."""
    gw, gh = uniform_grid_dims(budget, img.width, img.height)
    return bilinear_resize(box_downsample(img, gw, gh), img.width, img.height)


def uniform_sample_set(img_w: int, img_h: int, budget: PixelBudget) -> SampleSet:
    gw, gh = uniform_grid_dims(budget, img_w, img_h)
    xs = (np.arange(gw) + 0.5) * (img_w / gw) - 0.5
    ys = (np.arange(gh) + 0.5) * (img_h / gh) - 0.5
    gx, gy = np.meshgrid(xs, ys)
    return SampleSet(_clamp_x(gx.ravel(), img_w), _clamp_x(gy.ravel(), img_h))


# ----------------------------------------------------------------------
# Warp-then-sample pipeline
# ----------------------------------------------------------------------


def bass_pipeline(
    img: ImageBuffer, theta: MobiusParams, budget: PixelBudget, geom: SphereGeom
) -> ImageBuffer:
    """Warp, spend the budget uniformly in warped space, unwarp.

    With identity coefficients this degenerates to plain uniform
    sampling; a magnifying warp instead concentrates the budget on the
    magnified region.
    """
    theta = geometry.normalize(theta)
    warped, _ = warp.forward_warp(img, theta, geom)
    reduced = uniform_sample(warped, budget)
    restored, _ = warp.inverse_warp(reduced, theta, geom)
    return restored


# ----------------------------------------------------------------------
# Static foveated baselines
# ----------------------------------------------------------------------


def _fixation_to_lattice(fixation, width, height) -> tuple[float, float]:
    # Normalized [0,1]^2 fixation to lattice coords (pixel centers at ints).
    return fixation[0] * width - 0.5, fixation[1] * height - 0.5


def _corner_distance(fx: float, fy: float, width: int, height: int) -> float:
    corners = [(0.0, 0.0), (width - 1.0, 0.0), (0.0, height - 1.0), (width - 1.0, height - 1.0)]
    return max(math.hypot(cx - fx, cy - fy) for cx, cy in corners)


def _clamp_x(xs: np.ndarray, width: int) -> np.ndarray:
    return np.clip(xs, 0.0, width - 1.0)


@dataclass(frozen=True)
class _LogPolarGrid:
    fx: float
    fy: float
    r0: float
    r_max: float
    ring_sizes: np.ndarray          # samples per ring, inner rings first
    offsets: np.ndarray             # start index of each ring in the flat arrays
    xs: np.ndarray                  # flat sample coords: fixation first, then rings
    ys: np.ndarray


def _log_polar_grid(width: int, height: int, budget: PixelBudget, fixation) -> _LogPolarGrid:
    count = budget_pixel_count(budget, width, height)
    fx, fy = _fixation_to_lattice(fixation, width, height)
    r_max = max(_corner_distance(fx, fy, width, height), LOG_POLAR_INNER_RADIUS + 1e-9)
    m = count - 1  # one sample reserved for the fixation itself
    n_ang = max(1, _round_half_up(math.sqrt(2.0 * m)))
    n_rad = max(1, _round_half_up(m / n_ang))
    base, rem = divmod(m, n_rad)
    # Inner rings absorb the remainder, keeping density highest near fixation.
    ring_sizes = np.array([base + (1 if k < rem else 0) for k in range(n_rad)], dtype=np.intp)
    if n_rad > 1:
        radii = LOG_POLAR_INNER_RADIUS * (r_max / LOG_POLAR_INNER_RADIUS) ** (
            np.arange(n_rad) / (n_rad - 1)
        )
    else:
        radii = np.array([LOG_POLAR_INNER_RADIUS])
    xs = [np.array([fx])]
    ys = [np.array([fy])]
    for k in range(n_rad):
        ang = 2.0 * np.pi * np.arange(ring_sizes[k]) / ring_sizes[k]
        xs.append(fx + radii[k] * np.cos(ang))
        ys.append(fy + radii[k] * np.sin(ang))
    offsets = np.concatenate([[0], np.cumsum(ring_sizes)])[:-1] + 1  # skip fixation slot
    return _LogPolarGrid(
        fx, fy, LOG_POLAR_INNER_RADIUS, r_max, ring_sizes, offsets,
        np.concatenate(xs), np.concatenate(ys),
    )


def log_polar_sample_set(width: int, height: int, budget: PixelBudget, fixation=(0.5, 0.5)) -> SampleSet:
    grid = _log_polar_grid(width, height, budget, fixation)
    return SampleSet(_clamp_x(grid.xs, width), _clamp_x(grid.ys, height))


def log_polar_sample(img: ImageBuffer, budget: PixelBudget, fixation=(0.5, 0.5)) -> ImageBuffer:
    """Log-polar resample about the fixation, inverted back to full resolution.

    Reconstruction interpolates bilinearly in (log r, angle) space; pixels
    inside the innermost radius copy the fixation sample.
    """
    grid = _log_polar_grid(img.width, img.height, budget, fixation)
    values = _gather(img.data, _clamp_x(grid.xs, img.width), _clamp_x(grid.ys, img.height))

    gy, gx = np.mgrid[0 : img.height, 0 : img.width].astype(np.float64)
    dx = gx - grid.fx
    dy = gy - grid.fy
    r = np.hypot(dx, dy)
    phi = np.mod(np.arctan2(dy, dx), 2.0 * np.pi)

    n_rad = len(grid.ring_sizes)
    if n_rad > 1:
        t = np.log(np.maximum(r, grid.r0) / grid.r0) / math.log(grid.r_max / grid.r0)
        t = np.clip(t * (n_rad - 1), 0.0, n_rad - 1.0)
    else:
        t = np.zeros_like(r)
    k0 = np.floor(t).astype(np.intp)
    k1 = np.minimum(k0 + 1, n_rad - 1)
    fr = (t - k0)[..., None]

    def ring_value(k):
        nk = grid.ring_sizes[k]
        a = phi * nk / (2.0 * np.pi)
        j0 = np.floor(a).astype(np.intp) % nk
        j1 = (j0 + 1) % nk
        fa = (a - np.floor(a))[..., None]
        flat0 = values[grid.offsets[k] + j0]
        flat1 = values[grid.offsets[k] + j1]
        return flat0 * (1.0 - fa) + flat1 * fa

    out = ring_value(k0) * (1.0 - fr) + ring_value(k1) * fr
    out[r < grid.r0] = values[0]
    return ImageBuffer.from_array(out, clip=True)


def _vogel_points(count: int, fx: float, fy: float, r_max: float) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(count, dtype=np.float64)
    radius = r_max * np.sqrt(k / count)
    angle = k * GOLDEN_ANGLE
    return fx + radius * np.cos(angle), fy + radius * np.sin(angle)


def sunflower_sample_set(width: int, height: int, budget: PixelBudget, fixation=(0.5, 0.5)) -> SampleSet:
    count = budget_pixel_count(budget, width, height)
    fx, fy = _fixation_to_lattice(fixation, width, height)
    xs, ys = _vogel_points(count, fx, fy, _corner_distance(fx, fy, width, height))
    return SampleSet(_clamp_x(xs, width), _clamp_x(ys, height))


def sunflower_sample(img: ImageBuffer, budget: PixelBudget, fixation=(0.5, 0.5)) -> ImageBuffer:
    """Vogel-spiral sampling with nearest-sample (Voronoi) reconstruction."""
    samples = sunflower_sample_set(img.width, img.height, budget, fixation)
    values = _gather(img.data, samples.xs, samples.ys)
    gy, gx = np.mgrid[0 : img.height, 0 : img.width].astype(np.float64)
    tree = cKDTree(np.column_stack([samples.xs, samples.ys]))
    _, idx = tree.query(np.column_stack([gx.ravel(), gy.ravel()]))
    out = values[idx].reshape(img.height, img.width, 3)
    return ImageBuffer.from_array(out, clip=True)


def _radial_layout(width: int, height: int, budget: PixelBudget, fixation):
    count = budget_pixel_count(budget, width, height)
    fx, fy = _fixation_to_lattice(fixation, width, height)
    gy, gx = np.mgrid[0:height, 0:width].astype(np.float64)
    dist = np.hypot(gx - fx, gy - fy)

    rho = math.sqrt(count * RADIAL_FOVEA_BUDGET_SHARE / math.pi)
    fovea = dist <= rho
    if int(fovea.sum()) > count:
        # Shrink the disc to fit: keep only the budget's nearest pixels.
        order = np.argsort(dist.ravel(), kind="stable")[:count]
        fovea = np.zeros(dist.size, dtype=bool)
        fovea[order] = True
        fovea = fovea.reshape(dist.shape)
        rho = float(dist[fovea].max())
    n_fovea = int(fovea.sum())

    m = count - n_fovea
    xs_parts = [gx[fovea], ]
    ys_parts = [gy[fovea], ]
    if m > 0:
        r_max = max(_corner_distance(fx, fy, width, height), rho * (1.0 + 1e-9))
        n_rings = min(RADIAL_RING_COUNT, m)
        bounds = rho * (r_max / rho) ** (np.arange(n_rings + 1) / n_rings)
        areas = bounds[1:] ** 2 - bounds[:-1] ** 2
        weights = areas * RADIAL_DENSITY_DECAY ** np.arange(n_rings)
        raw = weights / weights.sum() * m
        counts = np.floor(raw).astype(int)
        # Largest-remainder rounding so the ring counts sum to m exactly.
        for i in np.argsort(raw - counts)[::-1][: m - counts.sum()]:
            counts[i] += 1
        k_global = 0
        for i, ring_count in enumerate(counts):
            if ring_count == 0:
                continue
            s = np.arange(ring_count, dtype=np.float64)
            rr = np.sqrt(bounds[i] ** 2 + (s + 0.5) / ring_count * areas[i])
            ang = (k_global + s) * GOLDEN_ANGLE
            xs_parts.append(fx + rr * np.cos(ang))
            ys_parts.append(fy + rr * np.sin(ang))
            k_global += ring_count
    xs = _clamp_x(np.concatenate(xs_parts), width)
    ys = _clamp_x(np.concatenate(ys_parts), height)
    return xs, ys, fovea, n_fovea


def radial_sample_set(width: int, height: int, budget: PixelBudget, fixation=(0.5, 0.5)) -> SampleSet:
    xs, ys, _, _ = _radial_layout(width, height, budget, fixation)
    return SampleSet(xs, ys)


def radial_sample(img: ImageBuffer, budget: PixelBudget, fixation=(0.5, 0.5)) -> ImageBuffer:
    """Full-resolution foveal disc plus decaying peripheral rings.

    Half the budget copies the pixels nearest the fixation verbatim; the
    rest goes to concentric rings with geometrically decaying density,
    reconstructed by nearest-sample fill.
    """
    xs, ys, fovea, n_fovea = _radial_layout(img.width, img.height, budget, fixation)
    values = _gather(img.data, xs, ys)
    gy, gx = np.mgrid[0 : img.height, 0 : img.width].astype(np.float64)
    tree = cKDTree(np.column_stack([xs, ys]))
    _, idx = tree.query(np.column_stack([gx.ravel(), gy.ravel()]))
    out = values[idx].reshape(img.height, img.width, 3)
    out[fovea] = img.data[fovea]  # foveal zone is exact by construction
    return ImageBuffer.from_array(out, clip=True)


# ----------------------------------------------------------------------
# Dispatch
# ----------------------------------------------------------------------


def apply_strategy(img: ImageBuffer, spec: SamplingSpec, geom: SphereGeom | None = None) -> ImageBuffer:
    """Run one sampling strategy; ``geom`` is only needed for 'bass'."""
    if spec.strategy == "uniform":
        return uniform_sample(img, spec.budget)
    if spec.strategy == "bass":
        if geom is None:
            geom = img.geom()
        return bass_pipeline(img, spec.theta, spec.budget, geom)
    if spec.strategy == "static_foveated":
        return log_polar_sample(img, spec.budget, spec.fixation)
    if spec.strategy == "sunflower":
        return sunflower_sample(img, spec.budget, spec.fixation)
    return radial_sample(img, spec.budget, spec.fixation)
