"""Perceptual loss stack: MSE, SDSP saliency, VSI, and their weighted sum.

The saliency detector is a single-scale SDSP variant: the product of a
band-pass (log-Gabor) frequency prior on luminance, a warm-color prior
in an opponent color space, and a center-weighted location prior.  VSI
pools local similarity of the two saliency maps, gradient-magnitude
similarity, and chrominance similarity, weighted by the pointwise max
of the saliencies.  All constants live in the config dataclasses below
so runs are reproducible; images enter in [0, 1] and are rescaled to
the [0, 255] range the published similarity constants assume.

A deep-feature distance (e.g. DISTS) is deliberately not computed here:
``perceptual_loss`` accepts a plugin callable for that term and its
weight defaults to zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, MissingPlugin
from .warp import ImageBuffer

MetricPlugin = Callable[[ImageBuffer, ImageBuffer], float]


@dataclass(frozen=True)
class LossWeights:
    """Weights of the three perceptual-loss terms (saliency, plugin, MSE)."""

    alpha: float = 1.0
    beta_img: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if min(self.alpha, self.beta_img, self.gamma) < 0.0:
            raise ValueError("loss weights must be nonnegative")
        if self.alpha + self.beta_img + self.gamma <= 0.0:
            raise ValueError("at least one loss weight must be positive")


@dataclass(frozen=True)
class SdspConfig:
    """Saliency-prior constants (single log-Gabor scale)."""

    center_freq: float = 0.05        # cycles/pixel of the band-pass peak
    bandwidth_ratio: float = 0.55    # sigma of log-Gabor in log-frequency
    sigma_color: float = 0.25        # warm-color prior falloff
    location_sigma_frac: float = 0.25  # Gaussian sigma as fraction of the diagonal
    freq_floor: float = 0.1          # keeps the product informative on flat inputs
    color_floor: float = 0.1


@dataclass(frozen=True)
class VsiConfig:
    """Similarity constants; luminance/chrominance ranges assume [0, 255]."""

    c_saliency: float = 1.27
    c_gradient: float = 386.0
    c_chroma: float = 130.0
    gradient_exponent: float = 0.4
    chroma_exponent: float = 0.02
    # Opponent color transform rows: L (luma), M, N (chroma), applied to
    # RGB scaled to [0, 255].
    lmn: tuple = (
        (0.06, 0.63, 0.27),
        (0.30, 0.04, -0.35),
        (0.34, -0.60, 0.26),
    )
    sdsp: SdspConfig = field(default_factory=SdspConfig)


DEFAULT_SDSP = SdspConfig()
DEFAULT_VSI = VsiConfig()

_SCHARR_X = np.array([[3.0, 0.0, -3.0], [10.0, 0.0, -10.0], [3.0, 0.0, -3.0]]) / 16.0


def mse(a: ImageBuffer, b: ImageBuffer) -> float:
    """Mean squared error over all pixels and channels; in [0, 1]."""
    if a.data.shape != b.data.shape:
        raise DimensionMismatch(f"{a.data.shape} vs {b.data.shape}")
    return float(np.mean((a.data - b.data) ** 2))


def _minmax(arr: np.ndarray) -> np.ndarray:
    lo, hi = float(arr.min()), float(arr.max())
    if hi - lo < 1e-12:
        return np.zeros_like(arr)
    return (arr - lo) / (hi - lo)


def sdsp_saliency(img: ImageBuffer, cfg: SdspConfig = DEFAULT_SDSP) -> np.ndarray:
    """Per-pixel saliency in [0, 1] (min-max normalized product of priors)."""
    rgb = img.data
    h, w = img.height, img.width

    # Frequency prior: magnitude of the band-pass response of the luminance.
    lum = rgb.mean(axis=2)
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    freq = np.hypot(fy, fx)
    log_gabor = np.zeros_like(freq)
    nonzero = freq > 0
    log_gabor[nonzero] = np.exp(
        -((np.log(freq[nonzero] / cfg.center_freq)) ** 2)
        / (2.0 * np.log(1.0 / cfg.bandwidth_ratio) ** 2)
    )
    response = np.fft.ifft2(np.fft.fft2(lum) * log_gabor)
    s_freq = _minmax(np.abs(response))

    # Color prior: warm (red/yellow) opponent responses, squashed.
    rg = rgb[..., 0] - rgb[..., 1]
    by = (rgb[..., 0] + rgb[..., 1]) / 2.0 - rgb[..., 2]
    mn = _minmax(rg)
    nn = _minmax(by)
    s_color = 1.0 - np.exp(-(mn**2 + nn**2) / cfg.sigma_color**2)

    # Location prior: centered Gaussian.
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    gy, gx = np.mgrid[0:h, 0:w].astype(np.float64)
    sigma = cfg.location_sigma_frac * np.hypot(w, h)
    s_loc = np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2.0 * sigma**2))

    return _minmax((s_freq + cfg.freq_floor) * (s_color + cfg.color_floor) * s_loc)


def _lmn(rgb255: np.ndarray, cfg: VsiConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = np.asarray(cfg.lmn)
    flat = rgb255 @ m.T
    return flat[..., 0], flat[..., 1], flat[..., 2]


def _gradient_magnitude(lum: np.ndarray) -> np.ndarray:
    gx = ndimage.convolve(lum, _SCHARR_X, mode="nearest")
    gy = ndimage.convolve(lum, _SCHARR_X.T, mode="nearest")
    return np.hypot(gx, gy)


def _similarity(a: np.ndarray, b: np.ndarray, c: float) -> np.ndarray:
    return (2.0 * a * b + c) / (a * a + b * b + c)


def vsi(ref: ImageBuffer, dist: ImageBuffer, cfg: VsiConfig = DEFAULT_VSI) -> float:
    """Saliency-weighted structural similarity in (0, 1]; 1 iff identical."""
    if ref.data.shape != dist.data.shape:
        raise DimensionMismatch(f"{ref.data.shape} vs {dist.data.shape}")
    return _VsiRefSide(ref, cfg).score(dist)


class _VsiRefSide:
    """Reference-side VSI terms, computed once and reused across candidates."""

    def __init__(self, ref: ImageBuffer, cfg: VsiConfig = DEFAULT_VSI):
        self.cfg = cfg
        self.saliency = sdsp_saliency(ref, cfg.sdsp)
        lum, self.m, self.n = _lmn(ref.data * 255.0, cfg)
        self.gradient = _gradient_magnitude(lum)

    def score(self, dist: ImageBuffer) -> float:
        cfg = self.cfg
        vs2 = sdsp_saliency(dist, cfg.sdsp)
        lum2, m2, n2 = _lmn(dist.data * 255.0, cfg)
        g2 = _gradient_magnitude(lum2)

        s_vs = _similarity(self.saliency, vs2, cfg.c_saliency)
        s_g = _similarity(self.gradient, g2, cfg.c_gradient)
        s_c = _similarity(self.m, m2, cfg.c_chroma) * _similarity(self.n, n2, cfg.c_chroma)
        # Chroma similarity can go slightly negative; clamp before the
        # fractional exponent.
        s_c = np.clip(s_c, 0.0, None)
        s = s_vs * s_g**cfg.gradient_exponent * s_c**cfg.chroma_exponent

        weight = np.maximum(self.saliency, vs2)
        total = float(weight.sum())
        if total == 0.0:
            return float(s.mean())
        return float((s * weight).sum() / total)


def perceptual_loss(
    ref: ImageBuffer,
    dist: ImageBuffer,
    weights: LossWeights,
    plugin: Optional[MetricPlugin] = None,
) -> float:
    """``alpha (1 - VSI) + beta plugin_distance + gamma MSE``; zero at ref == dist."""
    if weights.beta_img > 0.0 and plugin is None:
        raise MissingPlugin("beta_img > 0 requires a metric plugin")
    return PerceptualScorer(ref, weights, plugin).loss(dist)


class PerceptualScorer:
    """Scores many candidates against one reference without recomputing it."""

    def __init__(
        self,
        ref: ImageBuffer,
        weights: LossWeights,
        plugin: Optional[MetricPlugin] = None,
        vsi_cfg: VsiConfig = DEFAULT_VSI,
    ):
        if weights.beta_img > 0.0 and plugin is None:
            raise MissingPlugin("beta_img > 0 requires a metric plugin")
        self.ref = ref
        self.weights = weights
        self.plugin = plugin
        self._vsi_side = _VsiRefSide(ref, vsi_cfg) if weights.alpha > 0.0 else None

    def loss(self, dist: ImageBuffer) -> float:
        w = self.weights
        total = 0.0
        if w.alpha > 0.0:
            total += w.alpha * (1.0 - self._vsi_side.score(dist))
        if w.beta_img > 0.0:
            total += w.beta_img * float(self.plugin(self.ref, dist))
        if w.gamma > 0.0:
            total += w.gamma * mse(self.ref, dist)
        return total
