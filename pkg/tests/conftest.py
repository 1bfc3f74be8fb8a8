"""Shared synthetic-image factories and the acceptance summary hook."""

import numpy as np
import pytest

from foveate.warp import ImageBuffer


def make_smooth_image(size: int, seed: int, channels_correlated: bool = False) -> ImageBuffer:
    """Low-frequency sinusoid mixture; round-trips warps with little loss."""
    rng = np.random.default_rng(seed)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) / size
    data = np.zeros((size, size, 3))
    base = None
    for ch in range(3):
        acc = np.zeros((size, size))
        for _ in range(4):
            fx, fy = rng.uniform(0.5, 3.0, 2)
            ph = rng.uniform(0.0, 2.0 * np.pi, 2)
            acc += rng.uniform(0.2, 1.0) * np.sin(2 * np.pi * fx * xs + ph[0]) * np.sin(
                2 * np.pi * fy * ys + ph[1]
            )
        if channels_correlated and base is not None:
            acc = 0.7 * base + 0.3 * acc
        base = acc if base is None else base
        lo, hi = acc.min(), acc.max()
        data[..., ch] = (acc - lo) / (hi - lo + 1e-12)
    return ImageBuffer.from_array(data)


def make_vignetted_image(size: int, seed: int, margin: float = 0.15) -> ImageBuffer:
    """Smooth image faded to black near the borders.

    The fade keeps warp losses differentiable in the Mobius parameters:
    pixels crossing the footprint boundary carry near-zero values, so the
    black fill introduces no jump.
    """
    img = make_smooth_image(size, seed)
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) / (size - 1)
    fade = np.ones((size, size))
    for coord in (xs, ys, 1.0 - xs, 1.0 - ys):
        edge = np.clip(coord / margin, 0.0, 1.0)
        fade *= 0.5 - 0.5 * np.cos(np.pi * edge)
    return ImageBuffer.from_array(img.data * fade[..., None])


def add_texture_patch(img: ImageBuffer, rect: tuple, seed: int, amplitude: float = 0.45) -> ImageBuffer:
    """Overlay a high-frequency checker-like texture inside rect (x0, y0, x1, y1)."""
    rng = np.random.default_rng(seed)
    x0, y0, x1, y1 = rect
    data = img.data.copy()
    ph = rng.uniform(0.0, 2.0 * np.pi, 2)
    ys, xs = np.mgrid[y0:y1, x0:x1].astype(np.float64)
    tex = np.sin(xs * 2.1 + ph[0]) * np.sin(ys * 2.3 + ph[1])
    patch = 0.5 + 0.5 * amplitude * tex
    data[y0:y1, x0:x1, :] = patch[..., None]
    return ImageBuffer.from_array(data, clip=True)


def make_region_task(seed: int, size: int = 128, half: int = 18):
    """A dim, edge-faded scene with one bright two-scale textured window.

    Returns (image, rect) with rect = (x0, y0, x1, y1) pixels.  The window
    sits on the horizontal centerline (real-coefficient warps can only
    magnify along it) at a seeded offset.  Fine texture (period 10 px) is
    unrecoverable at small budgets without magnification; the coarse
    component (period 20 px) gives the perceptual loss an early slope.
    """
    rng = np.random.default_rng(seed)
    offset = int(rng.integers(-12, 13))
    cx, cy = size // 2 + offset, size // 2
    rect = (cx - half, cy - half, cx + half, cy + half)

    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64) / size
    bg = np.zeros((size, size, 3))
    for ch in range(3):
        acc = np.zeros((size, size))
        for _ in range(2):
            fx, fy = rng.uniform(0.3, 1.0, 2)
            ph = rng.uniform(0.0, 2.0 * np.pi, 2)
            acc += np.sin(2 * np.pi * fx * xs + ph[0]) * np.sin(2 * np.pi * fy * ys + ph[1])
        acc = (acc - acc.min()) / (acc.max() - acc.min() + 1e-12)
        bg[..., ch] = acc * 0.10
    ysn, xsn = np.mgrid[0:size, 0:size].astype(np.float64) / (size - 1)
    fade = np.ones((size, size))
    for coord in (xsn, ysn, 1.0 - xsn, 1.0 - ysn):
        fade *= 0.5 - 0.5 * np.cos(np.pi * np.clip(coord / 0.25, 0.0, 1.0))
    data = bg * fade[..., None]

    ph = rng.uniform(0.0, 2.0 * np.pi, 4)
    yy, xx = np.mgrid[rect[1] : rect[3], rect[0] : rect[2]].astype(np.float64)
    k_fine, k_coarse = 2 * np.pi / 10.0, 2 * np.pi / 20.0
    tex = 0.65 * np.sin(xx * k_fine + ph[0]) * np.sin(yy * k_fine + ph[1])
    tex += 0.35 * np.sin(xx * k_coarse + ph[2]) * np.sin(yy * k_coarse + ph[3])
    data[rect[1] : rect[3], rect[0] : rect[2], :] = (0.5 + 0.5 * 0.9 * tex)[..., None]
    return ImageBuffer.from_array(np.clip(data, 0.0, 1.0)), rect


def region_mae(a: ImageBuffer, b: ImageBuffer, rect) -> float:
    x0, y0, x1, y1 = rect
    return float(np.abs(a.data[y0:y1, x0:x1] - b.data[y0:y1, x0:x1]).mean())


@pytest.fixture
def smooth_image():
    return make_smooth_image


@pytest.fixture
def vignetted_image():
    return make_vignetted_image


_ACCEPTANCE_RESULTS = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE_RESULTS.append((name, report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, passed in _ACCEPTANCE_RESULTS:
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {name}")
