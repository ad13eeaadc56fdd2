"""Comparators that ignore measurement error.

``dke_detect`` is the difference-of-kernel-estimates jump detector: the
same argmax as :func:`~jumpfinder.estimators.detect_jump` but built from
plain one-sided kernel averages. ``llk_fit`` is a local linear smoother
for display curves only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .estimators import (
    DetectorConfig,
    JumpEstimate,
    ObservedSample,
    _DEFAULT_KERNEL,
    _estimate_from_curves,
    one_sided_curves,
)
from .errors import InvalidConfig
from .kernels import KernelSpec

__all__ = ["LlkCurve", "dke_detect", "llk_fit"]


def dke_detect(
    sample: ObservedSample,
    config: DetectorConfig,
    kernel: KernelSpec = _DEFAULT_KERNEL,
) -> JumpEstimate:
    right, left = one_sided_curves(sample, config.search_grid, config.bandwidth, kernel, kernel, robust=False)
    return _estimate_from_curves(config.search_grid, right, left, config.bandwidth)


@dataclass
class LlkCurve:
    grid: np.ndarray
    values: np.ndarray  # NaN where the local fit is singular
    bandwidth: float

    @property
    def defined(self) -> np.ndarray:
        return np.isfinite(self.values)


def llk_fit(sample: ObservedSample, grid, h: float) -> LlkCurve:
    """Local linear kernel smoother with two-sided Epanechnikov weights.

    At each grid point ``x`` a weighted least-squares line in ``w - x`` is
    fitted with weights ``0.75 (1 - ((w - x)/h)^2)`` on ``|w - x| <= h`` and
    its intercept is reported. Points with fewer than two distinct
    design values in the window are reported as NaN.
    """
    if not (np.isfinite(h) and h > 0):
        raise InvalidConfig(f"bandwidth must be positive, got {h!r}")
    grid = np.asarray(grid, dtype=float).ravel()
    w, y = sample.w, sample.y
    values = np.full(grid.shape, np.nan)
    for i, x in enumerate(grid):
        lo = np.searchsorted(w, x - h, side="left")
        hi = np.searchsorted(w, x + h, side="right")
        d = w[lo:hi] - x
        k = 0.75 * np.clip(1.0 - (d / h) ** 2, 0.0, None)
        keep = k > 0
        d, k, yy = d[keep], k[keep], y[lo:hi][keep]
        if np.unique(d).size < 2:
            continue
        s0, s1, s2 = k.sum(), (k * d).sum(), (k * d * d).sum()
        t0, t1 = (k * yy).sum(), (k * d * yy).sum()
        det = s0 * s2 - s1 * s1
        if det <= 0:
            continue
        values[i] = (s2 * t0 - s1 * t1) / det
    return LlkCurve(grid=grid, values=values, bandwidth=float(h))
