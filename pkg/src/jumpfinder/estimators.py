"""One-sided kernel estimators and the single-jump detector.

Three right-limit estimators of the regression function are provided,
each with a left-limit mirror:

* :func:`conventional_onesided` -- kernel average over ``[x, x + h]``.
* :func:`shifted_onesided` -- the same average anchored at ``x + h``,
  i.e. computed from ``[x + h, x + 2h]`` where observations are less
  likely to have crossed the jump through measurement error.
* :func:`robust_onesided` -- the double-kernel estimator. Every
  observation in ``[x, x + h]`` is reweighted by a second kernel applied
  to the distance between its own local estimate and the shifted anchor,
  scaled by the largest such distance in the window.

:func:`detect_jump` maximizes ``|m(x+) - m(x-)|`` over a search grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from . import _core
from .errors import EmptyWindow, InvalidConfig, NoValidGridPoint
from .kernels import KernelSpec

__all__ = [
    "ObservedSample",
    "DetectorConfig",
    "JumpEstimate",
    "conventional_onesided",
    "shifted_onesided",
    "robust_onesided",
    "detect_jump",
    "default_grid",
    "TIE_TOL",
]

Sidedness = Literal["left", "right"]

#: grid points whose criterion is within this of the maximum count as tied
TIE_TOL = 1e-12

_DEFAULT_KERNEL = KernelSpec()


class ObservedSample:
    """Observed pairs ``(w_i, y_i)``, stored sorted by ``w``.

    Parameters
    ----------
    w, y : array_like
        Predictor values and responses of equal length ``n >= 1``. The
        pairs are sorted by ``w`` (stable) on construction. Estimators
        additionally need ``n >= 2``; a single pair is allowed so that
        resampling degenerate inputs stays well defined.
    """

    __slots__ = ("w", "y")

    def __init__(self, w, y):
        w = np.asarray(w, dtype=float).ravel()
        y = np.asarray(y, dtype=float).ravel()
        if w.shape != y.shape:
            raise InvalidConfig(f"w and y differ in length ({w.size} != {y.size})")
        if w.size == 0:
            raise InvalidConfig("sample is empty")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(y))):
            raise InvalidConfig("sample contains non-finite values")
        order = np.argsort(w, kind="mergesort")
        self.w = np.ascontiguousarray(w[order])
        self.y = np.ascontiguousarray(y[order])
        self.w.flags.writeable = False
        self.y.flags.writeable = False

    @property
    def n(self) -> int:
        return int(self.w.size)

    @property
    def span(self) -> tuple[float, float]:
        return float(self.w[0]), float(self.w[-1])

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, ObservedSample):
            return NotImplemented
        return np.array_equal(self.w, other.w) and np.array_equal(self.y, other.y)

    def __repr__(self):
        lo, hi = self.span
        return f"ObservedSample(n={self.n}, w in [{lo:.4g}, {hi:.4g}])"

    def reflected(self, domain: tuple[float, float] | None = None) -> "ObservedSample":
        """Mirror the predictor through the midpoint of ``domain``."""
        a, b = domain if domain is not None else self.span
        return ObservedSample(a + b - self.w, self.y)


#: search region is (a + margin*h, b - margin*h); 1 admits every point whose
#: shifted windows can still hold data
SEARCH_MARGIN = 1.0


def default_grid(
    domain: tuple[float, float], h: float, step: float | None = None, margin: float | None = None
) -> np.ndarray:
    """Uniform grid strictly inside ``(a + margin*h, b - margin*h)``.

    The grid is symmetric about the domain midpoint with spacing ``h / 20``
    unless ``step`` is given; empty when the search region is empty.
    """
    a, b = map(float, domain)
    step = h / 20.0 if step is None else float(step)
    margin = SEARCH_MARGIN if margin is None else margin
    lo, hi = a + margin * h, b - margin * h
    if not lo < hi:
        return np.empty(0)
    mid = 0.5 * (a + b)
    k = int(np.floor((hi - mid) / step)) + 1
    grid = mid + step * np.arange(-k, k + 1)
    return grid[(grid > lo) & (grid < hi)]


@dataclass(frozen=True)
class DetectorConfig:
    """Bandwidth, search grid and domain for :func:`detect_jump`.

    Use :meth:`for_sample` to build one with the default grid.
    """

    bandwidth: float
    search_grid: np.ndarray
    domain: tuple[float, float]
    margin: float = SEARCH_MARGIN

    def __post_init__(self):
        h = float(self.bandwidth)
        a, b = map(float, self.domain)
        m = float(self.margin)
        if not (np.isfinite(h) and h > 0):
            raise InvalidConfig(f"bandwidth must be positive, got {self.bandwidth!r}")
        if not a < b:
            raise InvalidConfig(f"domain must satisfy a < b, got {self.domain!r}")
        if not m >= 0:
            raise InvalidConfig("search margin must be non-negative")
        if not a + m * h < b - m * h:
            raise InvalidConfig(
                f"bandwidth {h:.6g} leaves an empty search region on [{a:.6g}, {b:.6g}]"
                f" with margin {m:g}"
            )
        grid = np.ascontiguousarray(np.asarray(self.search_grid, dtype=float).ravel())
        if grid.size == 0:
            raise InvalidConfig("search grid is empty")
        if np.any(grid <= a + m * h) or np.any(grid >= b - m * h):
            raise InvalidConfig(f"search grid must lie inside (a + {m:g}h, b - {m:g}h)")
        grid.flags.writeable = False
        object.__setattr__(self, "bandwidth", h)
        object.__setattr__(self, "domain", (a, b))
        object.__setattr__(self, "margin", m)
        object.__setattr__(self, "search_grid", grid)

    @classmethod
    def for_sample(
        cls,
        sample: ObservedSample,
        bandwidth: float,
        domain: tuple[float, float] | None = None,
        step: float | None = None,
        window: tuple[float, float] | None = None,
        margin: float | None = None,
    ) -> "DetectorConfig":
        """Default configuration: domain = sample span, grid step ``h/20``.

        ``window`` further restricts the grid to ``[lo, hi]``.
        """
        domain = sample.span if domain is None else domain
        margin = SEARCH_MARGIN if margin is None else margin
        grid = default_grid(domain, bandwidth, step, margin)
        if window is not None:
            grid = grid[(grid >= window[0]) & (grid <= window[1])]
        return cls(bandwidth, grid, domain, margin)

    @staticmethod
    def feasible(bandwidth: float, domain: tuple[float, float], margin: float | None = None) -> bool:
        return bandwidth > 0 and default_grid(domain, bandwidth, None, margin).size > 0


@dataclass
class JumpEstimate:
    location: float
    magnitude: float
    bandwidth: float
    grid: np.ndarray = field(repr=False)
    diff: np.ndarray = field(repr=False)
    right: np.ndarray = field(repr=False)
    left: np.ndarray = field(repr=False)

    @property
    def diff_curve(self) -> list[tuple[float, float]]:
        """``(x, |m(x+) - m(x-)|)`` over grid points where both sides are defined."""
        ok = np.isfinite(self.diff)
        return list(zip(self.grid[ok].tolist(), self.diff[ok].tolist()))

    def to_dict(self) -> dict:
        return {
            "location": self.location,
            "magnitude": self.magnitude,
            "bandwidth": self.bandwidth,
        }


def _check_h(h):
    if not (np.isfinite(h) and h > 0):
        raise InvalidConfig(f"bandwidth must be positive, got {h!r}")


def _or_empty(value, what):
    if np.isnan(value):
        raise EmptyWindow(f"{what}: no observation receives positive kernel weight")
    return float(value)


def conventional_onesided(
    sample: ObservedSample,
    x: float,
    h: float,
    side: Sidedness = "right",
    kernel: KernelSpec = _DEFAULT_KERNEL,
) -> float:
    """Kernel-weighted mean of ``y`` over ``[x, x + h]`` (right) or ``[x - h, x]`` (left).

    Raises
    ------
    EmptyWindow
        If no observation falls in the window.
    """
    _check_h(h)
    fn = _core.conv_right if side == "right" else _core.conv_left
    return _or_empty(fn(sample.w, sample.y, float(x), float(h), kernel.code), f"{side} estimate at {x}")


def shifted_onesided(
    sample: ObservedSample,
    x: float,
    h: float,
    side: Sidedness = "right",
    kernel: KernelSpec = _DEFAULT_KERNEL,
) -> float:
    """One-step-away estimate: :func:`conventional_onesided` centred at ``x +/- h``."""
    _check_h(h)
    center = x + h if side == "right" else x - h
    return conventional_onesided(sample, center, h, side, kernel)


def robust_onesided(
    sample: ObservedSample,
    x: float,
    h: float,
    side: Sidedness = "right",
    kr: KernelSpec = _DEFAULT_KERNEL,
    kstar: KernelSpec = _DEFAULT_KERNEL,
) -> float:
    """Double-kernel one-sided estimate of ``m(x+)`` or ``m(x-)``.

    Each observation ``w_i`` in the one-sided window gets weight
    ``kr((w_i - x)/h) * kstar(|m*(w_i) - anchor| / rho)`` where ``m*(w_i)``
    is the conventional estimate at ``w_i`` on the same side, ``anchor`` is
    :func:`shifted_onesided` at ``x`` and ``rho`` is the largest of the
    distances ``|m*(w_i) - anchor|`` in the closed window. When ``rho`` is
    zero every ``kstar`` argument is taken as zero; when every ``kstar``
    factor vanishes the plain one-sided estimate is returned.
    """
    _check_h(h)
    w, y = sample.w, sample.y
    x, h = float(x), float(h)
    if side == "right":
        mstar = _core.local_right(w, y, h, kr.code)
        value = _core.robust_right(w, y, x, h, kr.code, kstar.code, mstar)
    else:
        mstar = _core.local_left(w, y, h, kr.code)
        value = _core.robust_left(w, y, x, h, kr.code, kstar.code, mstar)
    return _or_empty(value, f"robust {side} estimate at {x}")


def _estimate_from_curves(grid, right, left, h) -> JumpEstimate:
    i = _core.argmax_jump(right, left, TIE_TOL)
    if i < 0:
        raise NoValidGridPoint(
            f"no grid point has both one-sided estimates defined at bandwidth {h:.6g}"
        )
    diff = np.abs(right - left)
    return JumpEstimate(
        location=float(grid[i]),
        magnitude=float(right[i] - left[i]),
        bandwidth=float(h),
        grid=np.asarray(grid),
        diff=diff,
        right=right,
        left=left,
    )


def one_sided_curves(
    sample: ObservedSample,
    grid: Sequence[float],
    h: float,
    kr: KernelSpec = _DEFAULT_KERNEL,
    kstar: KernelSpec = _DEFAULT_KERNEL,
    robust: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Right and left estimates along ``grid``; NaN marks an empty window."""
    grid = np.ascontiguousarray(np.asarray(grid, dtype=float))
    return _core.one_sided_curves(sample.w, sample.y, grid, float(h), kr.code, kstar.code, robust)


def detect_jump(
    sample: ObservedSample,
    config: DetectorConfig,
    kr: KernelSpec = _DEFAULT_KERNEL,
    kstar: KernelSpec = _DEFAULT_KERNEL,
) -> JumpEstimate:
    """Locate the jump as the grid maximizer of ``|m(x+) - m(x-)|``.

    Grid points where either robust estimate is undefined are skipped. Ties
    (within ``TIE_TOL``) resolve to the smallest grid point.

    Raises
    ------
    NoValidGridPoint
        If every grid point was skipped.
    """
    right, left = one_sided_curves(sample, config.search_grid, config.bandwidth, kr, kstar, True)
    return _estimate_from_curves(config.search_grid, right, left, config.bandwidth)
