"""Bootstrap bandwidth selection and percentile intervals for the jump location.

For every candidate bandwidth ``h`` the jump is located on the original
sample (``s_hat(h)``) and on ``B`` pairs bootstrap resamples
(``s_k(h)``). The selected bandwidth minimizes ``mean_k |s_hat(h) - s_k(h)|``
and the replicate locations at that bandwidth give a percentile interval.

Random streams: replicate ``k`` draws its resample indices from
``PCG64(SeedSequence(seed, spawn_key=(k,)))``. The same ``B`` resamples
are reused for every candidate bandwidth, so serial and parallel runs
agree bit for bit.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _core
from .errors import AllCandidatesFailed, InvalidConfig, JumpFinderError
from .estimators import TIE_TOL, DetectorConfig, ObservedSample, _DEFAULT_KERNEL, detect_jump
from .baseline import dke_detect
from .kernels import KernelSpec

__all__ = [
    "BandwidthSearchConfig",
    "BootstrapResult",
    "replicate_rng",
    "bootstrap_resample",
    "resample_indices",
    "default_candidates",
    "select_bandwidth",
    "percentile_ci",
]

log = logging.getLogger(__name__)

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"


@dataclass(frozen=True)
class BandwidthSearchConfig:
    candidates: tuple[float, ...]
    replicates: int = 999
    seed: int = 0
    alpha: float = 0.05

    def __post_init__(self):
        cands = tuple(sorted(float(h) for h in self.candidates))
        if not cands:
            raise InvalidConfig("bandwidth candidate list is empty")
        if any(not (np.isfinite(h) and h > 0) for h in cands):
            raise InvalidConfig("bandwidth candidates must be positive")
        if int(self.replicates) < 1:
            raise InvalidConfig("replicates must be >= 1")
        if not 0 < self.alpha < 1:
            raise InvalidConfig("alpha must lie in (0, 1)")
        object.__setattr__(self, "candidates", cands)
        object.__setattr__(self, "replicates", int(self.replicates))


@dataclass
class BootstrapResult:
    selected_bandwidth: float
    criterion_by_bandwidth: list[tuple[float, float]]
    replicate_locations: np.ndarray  # at the selected bandwidth, dropped replicates removed
    ci: tuple[float, float]
    alpha: float
    estimate: float  # location on the original sample at the selected bandwidth
    dropped: dict[float, int] = field(default_factory=dict)
    skipped_candidates: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "selected_bandwidth": self.selected_bandwidth,
            "criterion_by_bandwidth": [list(p) for p in self.criterion_by_bandwidth],
            "ci": list(self.ci),
            "alpha": self.alpha,
            "estimate": self.estimate,
            "replicates_used": int(self.replicate_locations.size),
            "dropped": {repr(h): c for h, c in self.dropped.items()},
            "skipped_candidates": self.skipped_candidates,
        }


def replicate_rng(seed: int, k: int) -> np.random.Generator:
    """Independent generator for bootstrap replicate ``k``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(k),))))


def resample_indices(n: int, replicates: int, seed: int) -> np.ndarray:
    """``(replicates, n)`` matrix of with-replacement row indices."""
    idx = np.empty((replicates, n), dtype=np.int64)
    for k in range(replicates):
        idx[k] = replicate_rng(seed, k).integers(0, n, size=n)
    return idx


def bootstrap_resample(sample: ObservedSample, rng: np.random.Generator | int) -> ObservedSample:
    """Draw ``n`` pairs with replacement, keeping each ``(w, y)`` pair intact."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    idx = rng.integers(0, sample.n, size=sample.n)
    return ObservedSample(sample.w[idx], sample.y[idx])


def percentile_ci(locations: Sequence[float], alpha: float = 0.05) -> tuple[float, float]:
    """``(alpha/2, 1 - alpha/2)`` empirical quantiles, linear interpolation between order statistics."""
    x = np.asarray(locations, dtype=float)
    if x.size == 0:
        raise InvalidConfig("no replicate locations")
    if not 0 < alpha < 1:
        raise InvalidConfig("alpha must lie in (0, 1)")
    lo, hi = np.quantile(x, [alpha / 2.0, 1.0 - alpha / 2.0], method="linear")
    return float(lo), float(hi)


def default_candidates(sample: ObservedSample, count: int = 15, domain=None) -> tuple[float, ...]:
    """``count`` log-spaced bandwidths in ``[4 * median gap, (b - a) / 4)``.

    The upper end keeps a region of width ``(b - a) / 2`` to search even
    with a margin of ``h`` on each side.
    """
    a, b = sample.span if domain is None else domain
    gaps = np.diff(sample.w)
    gaps = gaps[gaps > 0]
    lo = 4.0 * float(np.median(gaps)) if gaps.size else (b - a) / 100.0
    hi = (b - a) / 4.0
    if not lo < hi:
        raise InvalidConfig("sample too sparse for a default bandwidth grid")
    # under a margin of 2h the upper end would empty the search region; stay just inside
    return tuple(np.geomspace(lo, hi * (1.0 - 1e-9), count).tolist())


def _detector(method):
    if method == "new":
        return lambda s, cfg, kr, ks: detect_jump(s, cfg, kr, ks)
    if method == "dke":
        return lambda s, cfg, kr, ks: dke_detect(s, cfg, kr)
    raise InvalidConfig(f"unknown method {method!r}")


def select_bandwidth(
    sample: ObservedSample,
    search: BandwidthSearchConfig,
    method: str = "new",
    kr: KernelSpec = _DEFAULT_KERNEL,
    kstar: KernelSpec = _DEFAULT_KERNEL,
    config_factory: Callable[[ObservedSample, float], DetectorConfig] | None = None,
    indices: np.ndarray | None = None,
) -> BootstrapResult:
    """Choose the bandwidth minimizing the bootstrap mean absolute deviation.

    Parameters
    ----------
    sample : ObservedSample
    search : BandwidthSearchConfig
        Candidates, number of replicates ``B``, seed and CI level.
    method : {"new", "dke"}
        Jump detector to run on every sample.
    config_factory : callable, optional
        ``(sample, h) -> DetectorConfig``; defaults to
        :meth:`DetectorConfig.for_sample`. Bootstrap replicates reuse the
        configuration (grid and domain) built for the original sample.
    indices : ndarray, optional
        Precomputed resample matrix (see :func:`resample_indices`).

    Returns
    -------
    BootstrapResult

    Raises
    ------
    AllCandidatesFailed
        If no candidate yields a detection on the original sample.
    """
    detect = _detector(method)
    factory = config_factory or (lambda s, h: DetectorConfig.for_sample(s, h))
    if indices is None:
        indices = resample_indices(sample.n, search.replicates, search.seed)
    robust = method == "new"

    criterion = []
    per_h = {}
    dropped = {}
    skipped = []
    for h in search.candidates:
        try:
            cfg = factory(sample, h)
            est = detect(sample, cfg, kr, kstar)
        except JumpFinderError as exc:
            log.debug("candidate h=%g skipped: %s", h, exc)
            skipped.append(h)
            continue
        locs = _core.bootstrap_locations(
            sample.w, sample.y, indices, cfg.search_grid, cfg.bandwidth, kr.code, kstar.code, robust, TIE_TOL
        )
        ok = np.isfinite(locs)
        dropped[h] = int((~ok).sum())
        if not ok.any():
            skipped.append(h)
            continue
        crit = float(np.mean(np.abs(est.location - locs[ok])))
        criterion.append((h, crit))
        per_h[h] = (est.location, locs[ok])
    if not criterion:
        raise AllCandidatesFailed(f"none of {len(search.candidates)} bandwidth candidates produced a detection")

    values = np.array([c for _, c in criterion])
    best_h = criterion[int(np.argmin(values))][0]  # first minimum, candidates ascending
    location, locs = per_h[best_h]
    return BootstrapResult(
        selected_bandwidth=best_h,
        criterion_by_bandwidth=criterion,
        replicate_locations=locs,
        ci=percentile_ci(locs, search.alpha),
        alpha=search.alpha,
        estimate=location,
        dropped=dropped,
        skipped_candidates=skipped,
    )
