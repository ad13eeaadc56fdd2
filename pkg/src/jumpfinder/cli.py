"""Command-line interface.

Subcommands: ``detect``, ``bandwidth``, ``simulate``, ``replicate``, ``curve``.
Every command that writes a result also writes a run manifest next to it;
``--from-manifest`` re-runs a command from one.

Exit codes: 0 success, 2 parse/ingest error, 3 detection infeasible,
4 bandwidth selection failed, 1 anything else.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .bandwidth import RNG_ALGORITHM, BandwidthSearchConfig, default_candidates, select_bandwidth
from .baseline import dke_detect, llk_fit
from .datagen import GeneratorConfig, builtin_response, generate
from .errors import AllCandidatesFailed, InvalidConfig, JumpFinderError, NoValidGridPoint, ParseError
from .estimators import DetectorConfig, ObservedSample, SEARCH_MARGIN, detect_jump
from .experiments import paper_design, run_design
from .io import dumps_json, file_digest, ingest, write_atomic, write_csv, write_json
from .kernels import kernel_from_name

log = logging.getLogger("jumpfinder")

EXIT_OK, EXIT_OTHER, EXIT_PARSE, EXIT_DETECT, EXIT_BANDWIDTH = 0, 1, 2, 3, 4


class StageError(Exception):
    def __init__(self, stage, exc):
        self.stage = stage
        self.exc = exc
        super().__init__(f"{stage}: {exc}")


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except JumpFinderError as exc:
        raise StageError(name, exc) from exc


# ---------------------------------------------------------------- parsing helpers


def _range(text):
    try:
        lo, hi = (float(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi, got {text!r}") from None
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"need lo < hi in {text!r}")
    return [lo, hi]


def _linspace(text, positive=True):
    try:
        lo, hi, count = text.split(":")
        lo, hi, count = float(lo), float(hi), int(count)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected lo:hi:count, got {text!r}") from None
    if not (lo <= hi and count >= 1) or (positive and lo <= 0):
        bound = "0 < lo <= hi" if positive else "lo <= hi"
        raise argparse.ArgumentTypeError(f"need {bound} and count >= 1 in {text!r}")
    return [lo, hi, count]


def _grid_spec(text):
    return _linspace(text)


def _point_grid(text):
    return _linspace(text, positive=False)


def _x_dist(text):
    if text == "uniform":
        return "uniform"
    try:
        name, params = text.split(":")
        a, b = (float(v) for v in params.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'uniform' or 'beta:a,b', got {text!r}") from None
    if name != "beta":
        raise argparse.ArgumentTypeError(f"unknown x distribution {name!r}")
    return ["beta", a, b]


def _sweep(spec):
    lo, hi, count = spec
    return tuple(np.linspace(lo, hi, int(count)).tolist())


# ---------------------------------------------------------------- shared I/O


def _paths(output: Path, suffix: str, explicit):
    return Path(explicit) if explicit else output.with_name(output.stem + suffix)


def _manifest(command, config, seed, digest, started):
    return {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "rng": RNG_ALGORITHM,
        "input_digest": digest,
        "started_at": started,
        "finished_at": _now(),
    }


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _ingest(cfg):
    return _stage(
        "ingest",
        ingest,
        cfg["input"],
        w_column=cfg["w_column"],
        y_column=cfg["y_column"],
        log_transform=cfg["log_transform"],
        window=tuple(cfg["filter"]) if cfg["filter"] else None,
        binary=cfg["response"] == "binary",
    )


def _detector_config(sample, h, cfg):
    try:
        return DetectorConfig.for_sample(
            sample, h, window=tuple(cfg["window"]) if cfg["window"] else None, margin=cfg["search_margin"]
        )
    except InvalidConfig as exc:
        raise NoValidGridPoint(str(exc)) from exc


def _candidates(sample, cfg):
    if cfg["bandwidth"] is not None:
        return (float(cfg["bandwidth"]),)
    if cfg["bandwidth_grid"]:
        return _sweep(cfg["bandwidth_grid"])
    return default_candidates(sample)


def _bootstrap(sample, cfg):
    kr, ks = kernel_from_name(cfg["kernel"]), kernel_from_name(cfg["kstar"])
    search = BandwidthSearchConfig(
        _candidates(sample, cfg), replicates=cfg["bootstrap_reps"], seed=cfg["seed"], alpha=cfg["alpha"]
    )
    return select_bandwidth(
        sample,
        search,
        method=cfg["method"],
        kr=kr,
        kstar=ks,
        config_factory=lambda s, h: _detector_config(s, h, cfg),
    )


# ---------------------------------------------------------------- commands


def cmd_detect(cfg, started, threads=None):
    sample, report = _ingest(cfg)
    digest = file_digest(cfg["input"])
    kr, ks = kernel_from_name(cfg["kernel"]), kernel_from_name(cfg["kstar"])

    boot = None
    if cfg["bandwidth"] is None or cfg["bootstrap_reps"] > 0:
        if cfg["bootstrap_reps"] < 1:
            raise StageError("bandwidth selection", InvalidConfig("--bootstrap-reps must be >= 1 without --bandwidth"))
        boot = _stage("bandwidth selection", _bootstrap, sample, cfg)
    h = float(cfg["bandwidth"]) if cfg["bandwidth"] is not None else boot.selected_bandwidth

    def run():
        dcfg = _detector_config(sample, h, cfg)
        if cfg["method"] == "dke":
            return dke_detect(sample, dcfg, kr)
        return detect_jump(sample, dcfg, kr, ks)

    est = _stage("detection", run)

    output = Path(cfg["output"])
    diff_path = _paths(output, ".diff.csv", cfg["diff_curve"])
    manifest_path = _paths(output, ".manifest.json", cfg["manifest"])
    result = {
        "command": "detect",
        "method": cfg["method"],
        "n": sample.n,
        "location": est.location,
        "magnitude": est.magnitude,
        "bandwidth": est.bandwidth,
        "bandwidth_source": "fixed" if cfg["bandwidth"] is not None else "bootstrap",
        "ci": list(boot.ci) if boot else None,
        "alpha": cfg["alpha"],
        "bootstrap": boot.to_dict() if boot else None,
        "ingest": report.to_dict(),
        "diff_curve": diff_path.name,
        "manifest": manifest_path.name,
    }
    write_csv(diff_path, ["x", "diff"], est.diff_curve)
    write_json(output, result)
    write_json(manifest_path, _manifest("detect", cfg, cfg["seed"], digest, started))
    return result


def cmd_bandwidth(cfg, started, threads=None):
    sample, report = _ingest(cfg)
    digest = file_digest(cfg["input"])
    if cfg["bootstrap_reps"] < 1:
        raise StageError("bandwidth selection", InvalidConfig("--bootstrap-reps must be >= 1"))
    boot = _stage("bandwidth selection", _bootstrap, sample, cfg)
    output = Path(cfg["output"])
    manifest_path = _paths(output, ".manifest.json", cfg["manifest"])
    result = {"command": "bandwidth", "method": cfg["method"], "n": sample.n, **boot.to_dict(),
              "replicate_locations": boot.replicate_locations, "ingest": report.to_dict(),
              "manifest": manifest_path.name}
    write_json(output, result)
    write_json(manifest_path, _manifest("bandwidth", cfg, cfg["seed"], digest, started))
    return result


SIM_DEFAULTS = {
    "ex1": dict(n=100, variance_ratio=0.15),
    "ex2": dict(n=100, variance_ratio=0.15),
    "compare": dict(n=6000, sigma=0.05),
    "phi": dict(n=9685, sigma=0.05, x_dist=["beta", 2.0, 3.0], x_range=[9.8, 11.3]),
}


def _generator(cfg):
    base = dict(SIM_DEFAULTS[cfg["design"]])
    for key in ("n", "variance_ratio", "sigma", "x_dist", "u_dist"):
        if cfg.get(key) is not None:
            base[key] = cfg[key]
    if cfg.get("sigma") is not None:
        base.pop("variance_ratio", None)
    elif cfg.get("variance_ratio") is not None:
        base.pop("sigma", None)
    if isinstance(base.get("x_dist"), list):
        base["x_dist"] = tuple(base["x_dist"])
    if "x_range" in base:
        base["x_range"] = tuple(base["x_range"])
    return GeneratorConfig(response=builtin_response(cfg["design"]), seed=cfg["seed"], **base)


def cmd_simulate(cfg, started, threads=None):
    gen = _stage("simulate", _generator, cfg)
    data = generate(gen)
    output = Path(cfg["output"])
    manifest_path = _paths(output, ".manifest.json", cfg["manifest"])
    s = data.sample
    if cfg["emit_latent"]:
        write_csv(output, ["w", "y", "x"], zip(s.w.tolist(), s.y.tolist(), data.latent.tolist()))
    else:
        write_csv(output, ["w", "y"], zip(s.w.tolist(), s.y.tolist()))
    truth = {"location": data.truth.location, "magnitude": data.truth.magnitude, "error_sd": gen.error_sd}
    write_json(manifest_path, {**_manifest("simulate", cfg, cfg["seed"], None, started), "truth": truth})
    return {"command": "simulate", "n": s.n, "output": str(output), "truth": truth}


def cmd_replicate(cfg, started, threads=None):
    x_dist = tuple(cfg["x_dist"]) if isinstance(cfg["x_dist"], list) else (cfg["x_dist"] or "uniform")
    design = _stage(
        "design",
        paper_design,
        cfg["design"],
        n=cfg["n"],
        u_dist=cfg["u_dist"] or "normal",
        replications=cfg["reps"],
        seed=cfg["seed"],
        bootstrap_reps=cfg["bootstrap_reps"] or None,
        x_dist=x_dist,
        sweep=_sweep(cfg["sweep"]) if cfg["sweep"] else None,
        bootstrap_grid="sample" if cfg.get("bootstrap_grid") == "sample" else "config",
    )
    report = _stage("replicate", run_design, design, workers=threads)
    payload = report.to_dict(raw=False)
    if cfg["output"]:
        output = Path(cfg["output"])
        write_json(output, payload)
        write_json(_paths(output, ".manifest.json", cfg["manifest"]),
                   _manifest("replicate", cfg, cfg["seed"], None, started))
    if cfg["records"]:
        rows = []
        for r in report.records:
            for h, loc, mag in zip(design.bandwidth_sweep, r.locations, r.magnitudes):
                rows.append((r.replication, r.seed, r.method, h, loc, mag))
        write_csv(cfg["records"], ["replication", "seed", "method", "bandwidth", "location", "magnitude"], rows)
    print(report.table())
    return payload


def cmd_curve(cfg, started, threads=None):
    sample, _ = _ingest(cfg)
    digest = file_digest(cfg["input"])
    if cfg["grid"]:
        lo, hi, count = cfg["grid"]
        grid = np.linspace(lo, hi, int(count))
    else:
        a, b = sample.span
        grid = np.linspace(a, b, 201)
    curve = _stage("curve", llk_fit, sample, grid, cfg["bandwidth"])
    ok = curve.defined
    output = Path(cfg["output"])
    write_csv(output, ["x", "value"], zip(curve.grid[ok].tolist(), curve.values[ok].tolist()))
    write_json(_paths(output, ".manifest.json", cfg["manifest"]), _manifest("curve", cfg, None, digest, started))
    return {"command": "curve", "points": int(ok.sum())}


COMMANDS = {
    "detect": cmd_detect,
    "bandwidth": cmd_bandwidth,
    "simulate": cmd_simulate,
    "replicate": cmd_replicate,
    "curve": cmd_curve,
}


# ---------------------------------------------------------------- argparse


def _input_args(p):
    p.add_argument("input", nargs="?", help="CSV file with a header row")
    p.add_argument("--w-column", default="w")
    p.add_argument("--y-column", default="y")
    p.add_argument("--log-transform", action="store_true", help="use log(w) as the predictor")
    p.add_argument("--filter", type=_range, metavar="LO:HI", help="keep rows with predictor in [LO, HI]")
    p.add_argument("--response", choices=["any", "binary"], default="any")


def _detect_args(p):
    _input_args(p)
    p.add_argument("--method", choices=["new", "dke"], default="new")
    p.add_argument("--kernel", default="epanechnikov", choices=["epanechnikov", "triangular", "uniform"])
    p.add_argument("--kstar", default="epanechnikov", choices=["epanechnikov", "triangular", "uniform"])
    p.add_argument("--bandwidth", type=float,
                   help="fixed bandwidth; the bootstrap then only supplies the CI (0 reps: no CI)")
    p.add_argument("--bandwidth-grid", type=_grid_spec, metavar="LO:HI:COUNT")
    p.add_argument("--bootstrap-reps", type=int, default=999)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--window", type=_range, metavar="LO:HI", help="restrict the jump search to [LO, HI]")
    p.add_argument("--search-margin", type=float, default=SEARCH_MARGIN,
                   help="search inside (a + M*h, b - M*h)")


def build_parser():
    parser = argparse.ArgumentParser(prog="jumpfinder", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--from-manifest", metavar="PATH", help="re-run with the configuration in a manifest")
    common.add_argument("--output", "-o", help="result file")
    common.add_argument("--manifest", help="manifest path (default: next to the output)")
    common.add_argument("--threads", type=int, help="worker cap (env JUMPFINDER_THREADS)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common], help="locate a jump in a CSV sample")
    _detect_args(p)
    p.add_argument("--diff-curve", help="diff-curve CSV path (default: next to the output)")

    p = sub.add_parser("bandwidth", parents=[common], help="bootstrap bandwidth selection only")
    _detect_args(p)

    p = sub.add_parser("simulate", parents=[common], help="write a synthetic sample as CSV")
    p.add_argument("--design", choices=sorted(SIM_DEFAULTS), default="ex1")
    p.add_argument("--config", help="key=value file; flags override it")
    p.add_argument("--n", type=int)
    p.add_argument("--u-dist", choices=["normal", "laplace", "uniform"])
    p.add_argument("--x-dist", type=_x_dist, metavar="uniform|beta:A,B")
    p.add_argument("--variance-ratio", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--emit-latent", action="store_true", help="add the latent x column")

    p = sub.add_parser("replicate", parents=[common], help="run a simulation design")
    p.add_argument("--design", choices=["ex1", "ex2", "compare"], required=False, default="ex1")
    p.add_argument("--n", type=int)
    p.add_argument("--u-dist", choices=["normal", "laplace", "uniform"])
    p.add_argument("--x-dist", type=_x_dist, metavar="uniform|beta:A,B")
    p.add_argument("--reps", type=int, default=100)
    p.add_argument("--seed", type=int, default=20150)
    p.add_argument("--bootstrap-reps", type=int, default=999, help="0 disables bootstrap selection")
    p.add_argument("--sweep", type=_grid_spec, metavar="LO:HI:COUNT")
    p.add_argument("--bootstrap-grid", choices=("sweep", "sample"), default="sweep",
                   help="bootstrap candidates: the sweep, or the per-sample default grid")
    p.add_argument("--records", help="per-replication CSV")

    p = sub.add_parser("curve", parents=[common], help="local linear smooth of a CSV sample")
    _input_args(p)
    p.add_argument("--bandwidth", type=float, required=False)
    p.add_argument("--grid", type=_point_grid, metavar="LO:HI:COUNT")
    return parser


_DEFAULT_OUTPUTS = {"detect": "result.json", "bandwidth": "bandwidth.json", "simulate": "sample.csv",
                    "replicate": None, "curve": "curve.csv"}
_RUNTIME_KEYS = {"command", "from_manifest", "verbose", "config", "threads"}


def _kv_args(path) -> list[str]:
    """Turn a ``key=value`` file into command-line flags."""
    flags = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        flag = "--" + key.strip().replace("_", "-")
        value = value.strip()
        if not sep or value.lower() == "true":
            flags.append(flag)
        elif value.lower() != "false":
            flags.append(f"{flag}={value}")
    return flags


def resolve_config(args) -> dict:
    """Materialize every option into a plain dict (the manifest's ``config``)."""
    if args.from_manifest:
        manifest = json.loads(Path(args.from_manifest).read_text(encoding="utf-8"))
        if manifest.get("command") != args.command:
            raise StageError("manifest", ParseError(f"manifest is for {manifest.get('command')!r}"))
        cfg = dict(manifest["config"])
        for key in ("output", "manifest", "diff_curve"):
            if getattr(args, key, None) is not None:
                cfg[key] = getattr(args, key)
        if manifest.get("input_digest") and cfg.get("input"):
            try:
                current = file_digest(cfg["input"])
            except OSError as exc:
                raise StageError("manifest", ParseError(f"cannot read input: {exc}")) from None
            if current != manifest["input_digest"]:
                raise StageError("manifest", ParseError("input file changed since the manifest was written"))
        return cfg
    cfg = {k: v for k, v in vars(args).items() if k not in _RUNTIME_KEYS}
    if cfg.get("output") is None:
        cfg["output"] = _DEFAULT_OUTPUTS[args.command]
    if cfg.get("input") is not None:
        cfg["input"] = str(cfg["input"])
    return cfg


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "simulate" and args.config:
        # flags after the file contents win
        try:
            extra = _kv_args(args.config)
        except OSError as exc:
            print(f"jumpfinder simulate: config failed: {exc}", file=sys.stderr)
            return EXIT_PARSE
        rest = argv[argv.index("simulate") + 1:]
        args = parser.parse_args(["simulate", *extra, *rest])
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    if args.threads is None and os.environ.get("JUMPFINDER_THREADS"):
        args.threads = int(os.environ["JUMPFINDER_THREADS"])
    started = _now()
    try:
        cfg = resolve_config(args)
        if args.command in ("detect", "bandwidth", "curve") and not cfg.get("input"):
            raise StageError("ingest", ParseError("no input file given"))
        if args.command == "curve" and cfg.get("bandwidth") is None:
            raise StageError("curve", InvalidConfig("--bandwidth is required"))
        result = COMMANDS[args.command](cfg, started, args.threads)
    except StageError as err:
        print(f"jumpfinder {args.command}: {err.stage} failed: {err.exc}", file=sys.stderr)
        return _exit_code(err.exc)
    except (InvalidConfig, JumpFinderError) as exc:
        print(f"jumpfinder {args.command}: {exc}", file=sys.stderr)
        return _exit_code(exc)
    if args.command != "replicate":
        print(dumps_json({k: v for k, v in result.items() if k not in ("bootstrap", "replicate_locations")}), end="")
    return EXIT_OK


def _exit_code(exc) -> int:
    if isinstance(exc, ParseError):
        return EXIT_PARSE
    if isinstance(exc, NoValidGridPoint):
        return EXIT_DETECT
    if isinstance(exc, AllCandidatesFailed):
        return EXIT_BANDWIDTH
    return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
