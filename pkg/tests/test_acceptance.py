"""Acceptance gate.

Each test carries a ``criterion`` mark; the terminal summary prints one
PASS/FAIL line per criterion. The simulation tables run 100 replications
at B = 199 from a fixed master seed and are cached for the session.
"""

import functools
import json

import numpy as np
import pytest

import oracles
from jumpfinder.bandwidth import BandwidthSearchConfig, percentile_ci, select_bandwidth
from jumpfinder.baseline import dke_detect
from jumpfinder.cli import EXIT_OK, main
from jumpfinder.datagen import GeneratorConfig, Piecewise, ResponseModel, builtin_response, generate
from jumpfinder.errors import EmptyWindow, NoValidGridPoint
from jumpfinder.estimators import (
    DetectorConfig,
    ObservedSample,
    conventional_onesided,
    detect_jump,
    robust_onesided,
    shifted_onesided,
)
from jumpfinder.experiments import paper_design, run_design
from jumpfinder.io import ingest
from jumpfinder.kernels import Family, KernelSpec, Side, evaluate_array

MASTER_SEED = 20150
REPS = 100
B = 199

# (h_opt, MAE(h_opt), CP) per (n, f_U)
TABLE1 = {
    (100, "normal"): (0.3000, 0.0290, 0.95),
    (100, "laplace"): (0.2931, 0.0292, 0.98),
    (100, "uniform"): (0.2767, 0.0335, 0.96),
    (200, "normal"): (0.2991, 0.0232, 0.96),
    (200, "laplace"): (0.2902, 0.0191, 0.94),
    (200, "uniform"): (0.2721, 0.0232, 0.97),
}
TABLE2 = {
    (100, "normal"): (0.3329, 0.0407, 0.93),
    (100, "laplace"): (0.2758, 0.0397, 0.98),
    (100, "uniform"): (0.3203, 0.0479, 0.97),
    (200, "normal"): (0.3122, 0.0363, 0.98),
    (200, "laplace"): (0.2820, 0.0326, 0.92),
    (200, "uniform"): (0.2878, 0.0352, 0.94),
}
# MAE(DKE), MABJS(DKE), MAE(NEW), MABJS(NEW) per f_X
TABLE3 = {
    "uniform": (0.01718, 0.02598, 0.01532, 0.00511),
    ("beta", 2.0, 2.0): (0.01547, 0.02475, 0.01329, 0.00961),
    ("beta", 3.0, 2.0): (0.01607, 0.02593, 0.01305, 0.00494),
    ("beta", 2.0, 3.0): (0.01810, 0.02707, 0.01690, 0.01031),
}


def _xid(x):
    return x if isinstance(x, str) else f"beta{int(x[1])}{int(x[2])}"


@functools.cache
def example_report(which, n, u_dist):
    design = paper_design(which, n=n, u_dist=u_dist, replications=REPS, seed=MASTER_SEED, bootstrap_reps=B)
    return run_design(design)


@functools.cache
def compare_report(x_dist):
    return run_design(paper_design("compare", replications=REPS, seed=MASTER_SEED, x_dist=x_dist))


def _detail(request, text):
    request.node.user_properties.append(("detail", text))


def _table_row(request, which, n, u, paper, mae_tol, check_h):
    s = example_report(which, n, u).summaries["new"]
    h_p, mae_p, cp_p = paper
    _detail(
        request,
        f"{which} n={n} {u}: h_opt {s.h_opt:.4f} (paper {h_p:.4f}), MAE {s.mae_opt:.4f} (paper {mae_p:.4f}),"
        f" CP {s.cp:.2f} (paper {cp_p:.2f}), h_bt {s.h_bt:.4f}",
    )
    problems = []
    if abs(s.mae_opt - mae_p) > mae_tol:
        problems.append(f"MAE {s.mae_opt:.4f} vs {mae_p:.4f}")
    if check_h and abs(s.h_opt - h_p) > 0.05:
        problems.append(f"h_opt {s.h_opt:.4f} vs {h_p:.4f}")
    if abs(s.cp - cp_p) > 0.05 + 1e-12:
        problems.append(f"CP {s.cp:.2f} vs {cp_p:.2f}")
    assert not problems, "; ".join(problems)


# ---------------------------------------------------------------- 1, 2, 3, 7


@pytest.mark.slow
@pytest.mark.criterion(1, "Table 1 replication: MAE +-0.010, h_opt +-0.05, CP +-0.05")
@pytest.mark.parametrize("n,u", list(TABLE1), ids=[f"n{n}-{u}" for n, u in TABLE1])
def test_table1_row(request, n, u):
    _table_row(request, "ex1", n, u, TABLE1[n, u], 0.010, True)


@pytest.mark.slow
@pytest.mark.criterion(2, "Table 2 replication: MAE +-0.012, CP +-0.05")
@pytest.mark.parametrize("n,u", list(TABLE2), ids=[f"n{n}-{u}" for n, u in TABLE2])
def test_table2_row(request, n, u):
    _table_row(request, "ex2", n, u, TABLE2[n, u], 0.012, False)


@pytest.mark.slow
@pytest.mark.criterion(3, "Table 3: NEW beats DKE in MAE and MABJS; MABJS NEW +-0.004, DKE +-0.006")
@pytest.mark.parametrize("x_dist", list(TABLE3), ids=[_xid(x) for x in TABLE3])
def test_table3_row(request, x_dist):
    rep = compare_report(x_dist)
    new, dke = rep.summaries["new"], rep.summaries["dke"]
    mae_d, mabjs_d, mae_n, mabjs_n = TABLE3[x_dist]
    _detail(
        request,
        f"{_xid(x_dist)}: DKE MAE {dke.mae_opt:.5f} MABJS {dke.mabjs:.5f} (paper {mae_d:.5f} {mabjs_d:.5f});"
        f" NEW MAE {new.mae_opt:.5f} MABJS {new.mabjs:.5f} (paper {mae_n:.5f} {mabjs_n:.5f});"
        f" h_opt DKE {dke.h_opt:.2f} NEW {new.h_opt:.2f}",
    )
    problems = []
    if not new.mae_opt < dke.mae_opt:
        problems.append("MAE(NEW) >= MAE(DKE)")
    if not new.mabjs < dke.mabjs:
        problems.append("MABJS(NEW) >= MABJS(DKE)")
    if abs(new.mabjs - mabjs_n) > 0.004:
        problems.append(f"NEW MABJS {new.mabjs:.5f} vs {mabjs_n:.5f}")
    if abs(dke.mabjs - mabjs_d) > 0.006:
        problems.append(f"DKE MABJS {dke.mabjs:.5f} vs {mabjs_d:.5f}")
    assert not problems, "; ".join(problems)


@pytest.mark.slow
@pytest.mark.criterion(7, "coverage of the bootstrap 95% CI, Example 1 n=100 Normal, in [0.90, 1.00]")
def test_coverage(request):
    s = example_report("ex1", 100, "normal").summaries["new"]
    _detail(request, f"CP {s.cp:.2f} over {REPS} replications, B={B}")
    assert 0.90 <= s.cp <= 1.00


# ---------------------------------------------------------------- 4


def _random_instance(r):
    n = int(r.integers(2, 31))
    w = r.random(n)
    if r.random() < 0.3:
        w = np.round(w, 2)  # ties
    y = r.normal(size=n) + float(r.normal()) * (w > float(r.uniform(0.3, 0.7)))
    return ObservedSample(w, y), float(r.uniform(0.05, 0.4))


_FAMILIES = [f.name.lower() for f in Family]


def _compare_pointwise(fn, oracle_fn, seed, star=False):
    r = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(200):
        s, h = _random_instance(r)
        fam = _FAMILIES[int(r.integers(3))]
        kw = {"kr": KernelSpec(Family[fam.upper()])}
        okw = {"family": fam}
        if star:
            sf = _FAMILIES[int(r.integers(3))]
            kw["kstar"] = KernelSpec(Family[sf.upper()])
            okw["star"] = sf
        xs = list(r.uniform(-0.1, 1.1, 3)) + [float(r.choice(s.w))]
        for x in xs:
            for side in ("right", "left"):
                expected = oracle_fn(list(s.w), list(s.y), x, h, side, **okw)
                if expected is None:
                    with pytest.raises(EmptyWindow):
                        fn(s, x, h, side, *kw.values())
                else:
                    worst = max(worst, abs(fn(s, x, h, side, *kw.values()) - expected))
    return worst


@pytest.mark.criterion(4, "oracle equivalence on 200 random instances, 1e-12")
class TestOracleEquivalence:
    def test_conventional(self, request):
        worst = _compare_pointwise(conventional_onesided, oracles.conventional, 1)
        _detail(request, f"conventional: max |diff| {worst:.1e}")
        assert worst <= 1e-12

    def test_shifted(self, request):
        worst = _compare_pointwise(shifted_onesided, oracles.shifted, 2)
        _detail(request, f"shifted: max |diff| {worst:.1e}")
        assert worst <= 1e-12

    def test_robust(self, request):
        worst = _compare_pointwise(robust_onesided, oracles.robust, 3, star=True)
        _detail(request, f"robust: max |diff| {worst:.1e}")
        assert worst <= 1e-12

    def test_dke(self, request):
        r = np.random.default_rng(4)
        worst, checked = 0.0, 0
        while checked < 200:
            s, h = _random_instance(r)
            if not DetectorConfig.feasible(h, s.span) or s.n < 4:
                continue
            cfg = DetectorConfig.for_sample(s, h)
            grid = list(cfg.search_grid)
            expected = oracles.detect(list(s.w), list(s.y), grid, h, oracles.conventional)
            if expected is None:
                with pytest.raises(NoValidGridPoint):
                    dke_detect(s, cfg)
            else:
                est = dke_detect(s, cfg)
                assert est.location == expected[0]
                worst = max(worst, abs(est.magnitude - expected[1]))
                for x, d in zip(grid, est.diff):
                    rr = oracles.conventional(list(s.w), list(s.y), x, h, "right")
                    ll = oracles.conventional(list(s.w), list(s.y), x, h, "left")
                    if rr is None or ll is None:
                        assert np.isnan(d)
                    else:
                        worst = max(worst, abs(d - abs(rr - ll)))
            checked += 1
        _detail(request, f"dke: max |diff| {worst:.1e}")
        assert worst <= 1e-12


# ---------------------------------------------------------------- 5


def _step_model(s, d):
    return ResponseModel("gaussian", Piecewise(s, lambda x: 0.0 * x, lambda x: 0.0 * x + d), sd=0.0)


@pytest.mark.criterion(5, "consistency on noiseless steps: |s_hat - s| <= h, 50 seeds x 3 bandwidths")
def test_consistency(request):
    worst = {}
    for seed in range(50):
        r = np.random.default_rng(seed)
        s, d = float(r.uniform(0.3, 0.7)), float(r.choice([-1, 1]) * r.uniform(0.5, 2.0))
        data = generate(GeneratorConfig(n=200, response=_step_model(s, d), sigma=0.0, seed=seed))
        for h in (0.05, 0.1, 0.2):
            est = detect_jump(data.sample, DetectorConfig.for_sample(data.sample, h))
            err = abs(est.location - s)
            worst[h] = max(worst.get(h, 0.0), err / h)
            assert err <= h, f"seed {seed}, h {h}: |{est.location} - {s}| > h"
    _detail(request, "max |s_hat - s| / h: " + ", ".join(f"h={h}: {v:.3f}" for h, v in worst.items()))


# ---------------------------------------------------------------- 6


@pytest.mark.criterion(6, "invariant suites")
class TestInvariants:
    @pytest.mark.parametrize("family", list(Family))
    def test_kernel_normalization_monotone(self, family):
        u = np.linspace(0.0, 1.0, 10**6)
        right = evaluate_array(KernelSpec(family), u)
        assert abs(np.trapezoid(right, u) - 1.0) <= 1e-9
        assert np.all(np.diff(right) <= 0)
        left = evaluate_array(KernelSpec(family, Side.LEFT), -u)
        np.testing.assert_array_equal(left, right)

    def test_shift_identity(self):
        r = np.random.default_rng(11)
        for _ in range(50):
            s, h = _random_instance(r)
            for x in r.uniform(0, 1, 5):
                for side, c in (("right", x + h), ("left", x - h)):
                    try:
                        expected = conventional_onesided(s, c, h, side)
                    except EmptyWindow:
                        with pytest.raises(EmptyWindow):
                            shifted_onesided(s, x, h, side)
                        continue
                    assert shifted_onesided(s, x, h, side) == expected

    def test_range_preservation(self):
        r = np.random.default_rng(12)
        for _ in range(100):
            s, h = _random_instance(r)
            lo, hi = s.y.min(), s.y.max()
            for x in r.uniform(0, 1, 4):
                for fn in (conventional_onesided, shifted_onesided, robust_onesided):
                    for side in ("right", "left"):
                        try:
                            v = fn(s, x, h, side)
                        except EmptyWindow:
                            continue
                        assert lo - 1e-12 <= v <= hi + 1e-12

    @pytest.mark.parametrize("detector", [detect_jump, dke_detect], ids=["new", "dke"])
    def test_mirror(self, detector):
        for seed in range(10):
            data = generate(GeneratorConfig(n=150, response=builtin_response("ex1"), variance_ratio=0.15, seed=seed))
            s = data.sample
            a, b = s.span
            cfg = DetectorConfig.for_sample(s, 0.2)
            est = detector(s, cfg)
            m = detector(s.reflected(), DetectorConfig.for_sample(s.reflected(), 0.2))
            gap = abs(m.location - (a + b - est.location))
            assert gap <= 0.2 / 20 + 1e-9
            if gap <= 1e-9:
                assert abs(m.magnitude + est.magnitude) <= 1e-9

    def test_ci_ordering_nesting(self):
        r = np.random.default_rng(13)
        for _ in range(50):
            locs = r.normal(0.5, 0.05, int(r.integers(1, 300)))
            prev = None
            for alpha in (0.01, 0.05, 0.1, 0.2, 0.5):
                lo, hi = percentile_ci(locs, alpha)
                assert lo <= hi
                if prev is not None:
                    assert prev[0] <= lo and hi <= prev[1]
                prev = (lo, hi)

    def test_bootstrap_ci_brackets_median(self):
        data = generate(GeneratorConfig(n=100, response=builtin_response("ex1"), variance_ratio=0.15, seed=3))
        res = select_bandwidth(data.sample, BandwidthSearchConfig((0.2, 0.3), replicates=99, seed=1))
        lo, hi = res.ci
        assert lo <= np.median(res.replicate_locations) <= hi

    def test_manifest_replay_and_seed(self, tmp_path):
        data = tmp_path / "d.csv"
        assert main(["simulate", "--design", "ex2", "--n", "150", "--seed", "21", "-o", str(data)]) == EXIT_OK
        args = ["detect", str(data), "--bootstrap-reps", "29", "--bandwidth-grid", "0.2:0.35:4", "--seed", "3"]
        assert main([*args, "-o", str(tmp_path / "a.json")]) == EXIT_OK
        assert main([*args, "-o", str(tmp_path / "b" / "a.json")]) == EXIT_OK
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b" / "a.json").read_bytes()
        assert main(["detect", "--from-manifest", str(tmp_path / "a.manifest.json"),
                     "-o", str(tmp_path / "c" / "a.json")]) == EXIT_OK
        assert (tmp_path / "a.json").read_bytes() == (tmp_path / "c" / "a.json").read_bytes()
        assert (tmp_path / "a.diff.csv").read_bytes() == (tmp_path / "c" / "a.diff.csv").read_bytes()

    def test_design_seed_determinism(self):
        design = paper_design("ex1", n=60, replications=4, bootstrap_reps=19, sweep=[0.25, 0.3], seed=5)
        assert run_design(design).to_dict(raw=True) == run_design(design).to_dict(raw=True)

    def test_csv_round_trip(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["simulate", "--design", "ex1", "--n", "10000", "--seed", "8", "-o", str(out)]) == EXIT_OK
        s, _ = ingest(out)
        expected = generate(GeneratorConfig(n=10000, response=builtin_response("ex1"), variance_ratio=0.15, seed=8))
        assert s == expected.sample


# ---------------------------------------------------------------- paper examples and properties


@pytest.mark.slow
class TestPaperExamples:
    def test_mean_bootstrap_bandwidth(self):
        s = example_report("ex1", 100, "normal").summaries["new"]
        assert abs(s.h_bt - 0.3008) <= 0.03

    def test_example2_mae(self):
        s = example_report("ex2", 200, "normal").summaries["new"]
        assert abs(s.mae_opt - 0.0363) <= 0.01

    @pytest.mark.parametrize("which", ["ex1", "ex2"])
    @pytest.mark.parametrize("u", ["normal", "laplace", "uniform"])
    def test_sample_size_monotone(self, which, u):
        small = example_report(which, 100, u).summaries["new"].mae_opt
        large = example_report(which, 200, u).summaries["new"].mae_opt
        assert large <= small

    def test_dke_uniform_row(self):
        s = compare_report("uniform").summaries["dke"]
        assert abs(s.mae_opt - 0.01718) <= 0.004
        assert abs(s.mabjs - 0.02598) <= 0.005

    def test_report_json_round_trip(self):
        rep = example_report("ex1", 100, "normal")
        d = json.loads(json.dumps(rep.to_dict(raw=True)))
        ae = np.array([[abs(v - 0.5) for v in r["locations"]] for r in d["records"]])
        j = rep.design.bandwidth_sweep.index(rep.summaries["new"].h_opt)
        assert np.mean(ae[:, j]) == rep.summaries["new"].mae_opt
