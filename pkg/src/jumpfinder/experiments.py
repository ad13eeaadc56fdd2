"""Seeded replication harness for the simulation studies.

Each replication draws one dataset from a seed derived from
``(master_seed, replication)``; every method and bandwidth sees that same
dataset. Per-replication raw records are kept so that every summary can
be recomputed from them.
"""

from __future__ import annotations

import logging
import multiprocessing as mp
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .bandwidth import BandwidthSearchConfig, default_candidates, resample_indices, select_bandwidth
from .baseline import dke_detect
from .datagen import GeneratorConfig, builtin_response, generate
from .errors import InvalidConfig, JumpFinderError
from .estimators import DetectorConfig, detect_jump

__all__ = [
    "ExperimentDesign",
    "ReplicationRecord",
    "MethodSummary",
    "SimulationReport",
    "run_design",
    "median_ae_sample",
    "paper_design",
    "DEFAULT_SWEEP",
    "MAX_SKIP_FRACTION",
]

log = logging.getLogger(__name__)

DEFAULT_SWEEP = tuple(np.linspace(0.10, 0.45, 25).tolist())
COMPARE_SWEEP = tuple(np.round(np.arange(0.02, 0.2001, 0.01), 4).tolist())
MAX_SKIP_FRACTION = 0.05

_DETECTORS = {"new": detect_jump, "dke": lambda s, cfg: dke_detect(s, cfg)}


def derive_seed(master: int, *path: int) -> int:
    return int(np.random.SeedSequence([int(master), *map(int, path)]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class ExperimentDesign:
    generator: GeneratorConfig
    replications: int = 100
    bandwidth_sweep: tuple[float, ...] = DEFAULT_SWEEP
    methods: tuple[str, ...] = ("new",)
    bootstrap: BandwidthSearchConfig | None = None  # seed field is ignored; derived per replication
    seed: int = 0
    name: str = ""
    # "config": the candidates stored in ``bootstrap``;
    # "sample": each replication searches default_candidates(sample)
    bootstrap_grid: str = "config"
    # search domain: "sample" = [min w, max w]; "support" = the generator's x_range
    domain: str = "sample"
    margin: float | None = None  # None: the library default

    def __post_init__(self):
        if int(self.replications) < 1:
            raise InvalidConfig("replications must be >= 1")
        if not self.bandwidth_sweep:
            raise InvalidConfig("bandwidth sweep is empty")
        bad = set(self.methods) - set(_DETECTORS)
        if bad or not self.methods:
            raise InvalidConfig(f"unknown methods {sorted(bad)}")
        if self.bootstrap_grid not in ("sample", "config"):
            raise InvalidConfig(f"unknown bootstrap grid {self.bootstrap_grid!r}")
        if self.domain not in ("sample", "support"):
            raise InvalidConfig(f"unknown domain {self.domain!r}")

    def detector_config(self, sample, h: float) -> DetectorConfig:
        domain = self.generator.x_range if self.domain == "support" else None
        return DetectorConfig.for_sample(sample, h, domain=domain, margin=self.margin)

    def feasible(self, sample, h: float) -> bool:
        domain = self.generator.x_range if self.domain == "support" else sample.span
        return DetectorConfig.feasible(h, domain, self.margin)
        object.__setattr__(self, "bandwidth_sweep", tuple(sorted(map(float, self.bandwidth_sweep))))


@dataclass
class ReplicationRecord:
    replication: int
    seed: int
    method: str
    locations: np.ndarray  # per sweep bandwidth, NaN when infeasible / undetected
    magnitudes: np.ndarray
    bt_bandwidth: float = float("nan")
    bt_location: float = float("nan")
    bt_ci: tuple[float, float] = (float("nan"), float("nan"))

    def to_dict(self) -> dict:
        return {
            "replication": self.replication,
            "seed": self.seed,
            "method": self.method,
            "locations": _nan_to_none(self.locations),
            "magnitudes": _nan_to_none(self.magnitudes),
            "bt_bandwidth": _f(self.bt_bandwidth),
            "bt_location": _f(self.bt_location),
            "bt_ci": [_f(v) for v in self.bt_ci],
        }


def _f(v):
    return None if v is None or not np.isfinite(v) else float(v)


def _nan_to_none(a):
    return [_f(v) for v in np.asarray(a, dtype=float)]


@dataclass
class MethodSummary:
    method: str
    mae_by_bandwidth: list[tuple[float, float, int]]  # (h, MAE, failures)
    h_opt: float
    mae_opt: float
    sdae: float
    mabjs: float
    sdabjs: float
    h_bt: float | None = None
    mae_bt: float | None = None
    cp: float | None = None
    bootstrap_failures: int = 0

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in (
            "method", "h_opt", "mae_opt", "sdae", "mabjs", "sdabjs", "h_bt", "mae_bt", "cp", "bootstrap_failures"
        )}
        d["mae_by_bandwidth"] = [[h, _f(m), c] for h, m, c in self.mae_by_bandwidth]
        return d


@dataclass
class SimulationReport:
    design: ExperimentDesign
    truth: tuple[float, float]
    records: list[ReplicationRecord]
    summaries: dict[str, MethodSummary] = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        n = self.design.replications
        return all(s.bootstrap_failures <= MAX_SKIP_FRACTION * n for s in self.summaries.values())

    def records_for(self, method: str) -> list[ReplicationRecord]:
        return [r for r in self.records if r.method == method]

    def ae_matrix(self, method: str) -> np.ndarray:
        s = self.truth[0]
        return np.array([np.abs(r.locations - s) for r in self.records_for(method)])

    def to_dict(self, raw: bool = False) -> dict:
        g = self.design.generator
        out = {
            "design": {
                "name": self.design.name,
                "n": g.n,
                "response": g.response.name,
                "x_dist": list(g.x_dist) if isinstance(g.x_dist, tuple) else g.x_dist,
                "u_dist": g.u_dist,
                "error_sd": g.error_sd,
                "replications": self.design.replications,
                "bandwidth_sweep": list(self.design.bandwidth_sweep),
                "methods": list(self.design.methods),
                "bootstrap_replicates": self.design.bootstrap.replicates if self.design.bootstrap else None,
                "bootstrap_grid": self.design.bootstrap_grid if self.design.bootstrap else None,
                "domain": self.design.domain,
                "margin": self.design.margin,
                "seed": self.design.seed,
            },
            "truth": {"location": self.truth[0], "magnitude": self.truth[1]},
            "valid": self.valid,
            "summaries": {m: s.to_dict() for m, s in self.summaries.items()},
        }
        if raw:
            out["records"] = [r.to_dict() for r in self.records]
        return out

    def table(self) -> str:
        """Text table: one row per method."""
        hdr = f"{'method':<6} {'h_opt':>7} {'h_bt':>7} {'MAE(opt)':>9} {'MAE(bt)':>9} {'CP':>5} {'SDAE':>8} {'MABJS':>8} {'SDABJS':>8}"
        lines = [self.design.name or "design", hdr]

        def fmt(v, spec):
            return format(v, spec) if v is not None and np.isfinite(v) else "-"

        for m, s in self.summaries.items():
            lines.append(
                f"{m.upper():<6} {fmt(s.h_opt, '7.4f')} {fmt(s.h_bt, '7.4f'):>7} {fmt(s.mae_opt, '9.4f')}"
                f" {fmt(s.mae_bt, '9.4f'):>9} {fmt(s.cp, '5.2f'):>5} {fmt(s.sdae, '8.5f')}"
                f" {fmt(s.mabjs, '8.5f')} {fmt(s.sdabjs, '8.5f')}"
            )
        return "\n".join(lines)


def _run_replication(design: ExperimentDesign, r: int) -> list[ReplicationRecord]:
    seed = derive_seed(design.seed, r)
    data = generate(design.generator.with_seed(seed))
    sample = data.sample
    sweep = design.bandwidth_sweep
    out = []
    indices = None
    for method in design.methods:
        detect = _DETECTORS[method]
        locs = np.full(len(sweep), np.nan)
        mags = np.full(len(sweep), np.nan)
        for j, h in enumerate(sweep):
            if not design.feasible(sample, h):
                continue
            try:
                est = detect(sample, design.detector_config(sample, h))
            except JumpFinderError:
                continue
            locs[j], mags[j] = est.location, est.magnitude
        rec = ReplicationRecord(r, seed, method, locs, mags)
        if design.bootstrap is not None:
            bseed = derive_seed(design.seed, r, 1)
            search = replace(design.bootstrap, seed=bseed)
            candidates = search.candidates if design.bootstrap_grid == "config" else default_candidates(sample)
            feasible = tuple(h for h in candidates if design.feasible(sample, h))
            if feasible:
                search = replace(search, candidates=feasible)
                if indices is None:
                    indices = resample_indices(sample.n, search.replicates, bseed)
                try:
                    res = select_bandwidth(
                        sample, search, method=method, indices=indices, config_factory=design.detector_config
                    )
                    rec.bt_bandwidth = res.selected_bandwidth
                    rec.bt_location = res.estimate
                    rec.bt_ci = res.ci
                except JumpFinderError as exc:
                    log.info("replication %d: bootstrap failed: %s", r, exc)
        out.append(rec)
    return out


def _summarize(design: ExperimentDesign, truth, records: list[ReplicationRecord], method) -> MethodSummary:
    s, d = truth
    sweep = np.asarray(design.bandwidth_sweep)
    recs = [r for r in records if r.method == method]
    n = len(recs)
    loc = np.array([r.locations for r in recs])
    mag = np.array([r.magnitudes for r in recs])
    ae = np.abs(loc - s)
    fails = np.isnan(ae).sum(axis=0)
    with np.errstate(invalid="ignore"):
        mae = np.array([np.mean(col[np.isfinite(col)]) if np.isfinite(col).any() else np.nan for col in ae.T])
    eligible = (fails <= MAX_SKIP_FRACTION * n) & np.isfinite(mae)
    if not eligible.any():
        raise InvalidConfig(f"{method}: no bandwidth in the sweep succeeds in >= 95% of replications")
    j = int(np.flatnonzero(eligible)[np.argmin(mae[eligible])])
    col = ae[:, j][np.isfinite(ae[:, j])]
    bj = np.abs(mag[:, j] - d)
    bj = bj[np.isfinite(bj)]
    summary = MethodSummary(
        method=method,
        mae_by_bandwidth=[(float(h), float(m), int(c)) for h, m, c in zip(sweep, mae, fails)],
        h_opt=float(sweep[j]),
        mae_opt=float(np.mean(col)),
        sdae=float(np.std(col, ddof=1)) if col.size > 1 else 0.0,
        mabjs=float(np.mean(bj)),
        sdabjs=float(np.std(bj, ddof=1)) if bj.size > 1 else 0.0,
    )
    if design.bootstrap is not None:
        hb = np.array([r.bt_bandwidth for r in recs])
        ok = np.isfinite(hb)
        summary.bootstrap_failures = int(n - ok.sum())
        if ok.any():
            good = [r for r in recs if np.isfinite(r.bt_bandwidth)]
            summary.h_bt = float(np.mean(hb[ok]))
            summary.mae_bt = float(np.mean([abs(r.bt_location - s) for r in good]))
            summary.cp = float(np.mean([r.bt_ci[0] <= s <= r.bt_ci[1] for r in good]))
    return summary


def summarize(report: SimulationReport) -> SimulationReport:
    report.summaries = {
        m: _summarize(report.design, report.truth, report.records, m) for m in report.design.methods
    }
    return report


_WORKER_DESIGN: ExperimentDesign | None = None


def _run_inherited(r: int) -> list[ReplicationRecord]:
    return _run_replication(_WORKER_DESIGN, r)


def _threads(workers):
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("JUMPFINDER_THREADS")
    return max(1, int(env)) if env else 1


def run_design(design: ExperimentDesign, workers: int | None = None, progress=None) -> SimulationReport:
    """Run every replication of ``design`` and aggregate the metrics.

    ``workers > 1`` runs replications in worker processes; the report is
    folded in replication order, so the result does not depend on it.
    """
    truth_obj = design.generator.response.truth()
    truth = (truth_obj.location, truth_obj.magnitude)
    nworkers = _threads(workers)
    reps = range(int(design.replications))
    records: list[ReplicationRecord] = []
    if nworkers == 1:
        for r in reps:
            records.extend(_run_replication(design, r))
            if progress:
                progress(r)
    else:
        global _WORKER_DESIGN
        if "fork" in mp.get_all_start_methods():
            # children inherit the design, so user-supplied lambdas need not pickle
            _WORKER_DESIGN = design
            pool = ProcessPoolExecutor(nworkers, mp_context=mp.get_context("fork"))
            jobs = lambda: pool.map(_run_inherited, reps)  # noqa: E731
        else:
            pool = ProcessPoolExecutor(nworkers)
            jobs = lambda: pool.map(_run_replication, [design] * len(reps), reps)  # noqa: E731
        try:
            with pool:
                for r, recs in zip(reps, jobs()):
                    records.extend(recs)
                    if progress:
                        progress(r)
        finally:
            _WORKER_DESIGN = None
    return summarize(SimulationReport(design, truth, records))


def median_ae_sample(report: SimulationReport, h: float, method: str = "new") -> int:
    """Replication whose AE at sweep bandwidth ``h`` is the (lower) median."""
    sweep = np.asarray(report.design.bandwidth_sweep)
    j = int(np.argmin(np.abs(sweep - h)))
    if not np.isclose(sweep[j], h, rtol=0, atol=1e-12):
        raise InvalidConfig(f"bandwidth {h} is not in the sweep")
    recs = report.records_for(method)
    ae = np.array([abs(r.locations[j] - report.truth[0]) for r in recs])
    ok = np.flatnonzero(np.isfinite(ae))
    if ok.size == 0:
        raise InvalidConfig(f"no replication has a detection at h={h}")
    order = ok[np.argsort(ae[ok], kind="mergesort")]
    return recs[int(order[(order.size - 1) // 2])].replication


def paper_design(
    which: str,
    n: int | None = None,
    u_dist: str = "normal",
    replications: int = 100,
    seed: int = 20150,
    bootstrap_reps: int | None = 199,
    x_dist="uniform",
    sweep: Sequence[float] | None = None,
    bootstrap_grid: str = "config",
) -> ExperimentDesign:
    """Designs of the simulation studies.

    ``ex1`` / ``ex2``: uniform X, error variance 15% of Var(X), NEW only,
    with bootstrap selection over ``bootstrap_grid`` (``"config"``: the
    sweep itself; ``"sample"``: the per-sample default candidates). ``compare``: n = 6000, error sd 0.05 (normal),
    NEW vs DKE, no bootstrap.
    """
    if which in ("ex1", "ex2"):
        gen = GeneratorConfig(
            n=n or 100, response=builtin_response(which), u_dist=u_dist, variance_ratio=0.15
        )
        sweep = tuple(sweep) if sweep else DEFAULT_SWEEP
        boot = BandwidthSearchConfig(sweep, replicates=bootstrap_reps) if bootstrap_reps else None
        return ExperimentDesign(
            gen, replications, sweep, ("new",), boot, seed, name=f"{which} n={gen.n} U={u_dist}",
            bootstrap_grid=bootstrap_grid,
        )
    if which == "compare":
        gen = GeneratorConfig(
            n=n or 6000, response=builtin_response("compare"), x_dist=x_dist, u_dist="normal", sigma=0.05
        )
        label = x_dist if isinstance(x_dist, str) else f"beta({x_dist[1]:g},{x_dist[2]:g})"
        return ExperimentDesign(
            gen, replications, tuple(sweep) if sweep else COMPARE_SWEEP, ("dke", "new"), None, seed,
            name=f"compare n={gen.n} X={label}",
        )
    raise InvalidConfig(f"unknown design {which!r}")
