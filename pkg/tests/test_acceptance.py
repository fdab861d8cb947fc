"""End-to-end acceptance suite: one test per criterion, each printing a
single pass/fail line (collected again in the pytest terminal summary)."""
import filecmp
import math
import time

import numpy as np
import pytest

from conftest import record_acceptance, write_demo_inputs
from oracles import best_bipartition, brute_signature_cell, chord_argmax, t_cdf_quad
from demandshift.calibration import SensitivityCurve, knee_point, sensitivity_curve
from demandshift.cli import main
from demandshift.clustering import agglomerative, davies_bouldin, read_profiles_json
from demandshift.deviance import compute_deviance
from demandshift.ingest import read_demand_csv
from demandshift.modes import MODES
from demandshift.signature import build_signature, compute_element
from demandshift.synth import SCENARIO_TARGETS, BaselineSpec, generate_baseline
from demandshift.validation import GREATER, TWO_SIDED, one_sample_t, t_pvalue
from test_clustering import two_direction_instance

pytestmark = pytest.mark.acceptance


def _random_series(seed):
    return generate_baseline(BaselineSpec(weeks=9, seed=seed, noise_fraction=0.1))


@pytest.fixture(scope="module")
def fifty_series():
    return [_random_series(1000 + i) for i in range(50)]


def test_1_signature_oracle_equivalence(fifty_series):
    t0 = time.perf_counter()
    tables = [build_signature(s, 4.0, 4) for s in fifty_series]
    build = time.perf_counter() - t0

    worst, cells = 0.0, 0
    for s, table in zip(fifty_series, tables):
        hours = s.hours.astype(object)
        counts = dict(zip(hours, s.counts))
        missing = dict(zip(hours, s.missing))
        ref = np.array([brute_signature_cell(counts, missing, t, q, 4) for t in hours for q in range(5)])
        idx = (slice(None), *s.decomposition())
        got = np.stack([table.mu[idx].T.ravel(), table.sigma[idx].T.ravel(), table.n_samples[idx].T.ravel()], 1)
        assert np.array_equal(got[:, 2], ref[:, 2])
        for col in (0, 1):
            nz = ref[:, col] != 0
            assert (got[~nz, col] == 0).all()
            worst = max(worst, float(np.max(np.abs(got[nz, col] - ref[nz, col]) / np.abs(ref[nz, col]))))
        cells += len(ref)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10
    record_acceptance(1, ok, f"{cells} elements, max rel err {worst:.2e}, build {build:.2f}s, "
                             f"build+oracle {elapsed:.1f}s")
    assert ok


def test_2_threshold_equivalence(fifty_series):
    mismatches, checked = 0, 0
    for s in fifty_series:
        table = build_signature(s, 4.0, 4)
        dev = compute_deviance(s, table)
        mu, sigma = table.lookup(*s.decomposition())
        lam = table.alpha * sigma
        ok = ~np.isnan(dev.values)
        via_delta = np.abs(dev.values[ok]) > table.alpha
        via_band = np.abs(s.counts[ok] - mu[ok]) > lam[ok]
        mismatches += int((via_delta != via_band).sum())
        checked += int(ok.sum())
    record_acceptance(2, mismatches == 0, f"{checked} cells, {mismatches} mismatches")
    assert mismatches == 0


def test_3_hand_values():
    sigma = compute_element([100, 110, 90, 100], 4).sigma
    t = one_sample_t([1, 2, 3, 4], 0).t_value
    db = davies_bouldin([(0, 0), (0, 1), (4, 0), (4, 1)], [0, 0, 1, 1], normalize=False)
    ok = abs(sigma - 7.0710678) <= 1e-6 and abs(t - 3.8730) <= 1e-3 and abs(db - 0.25) <= 1e-9
    record_acceptance(3, ok, f"sigma={sigma:.7f}, t={t:.4f}, DB={db:.10f}")
    assert ok


@pytest.fixture(scope="module")
def demo_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("accept")
    t0 = time.perf_counter()
    cfg = write_demo_inputs(root)
    code = main(["run", "--config", str(cfg), "-o", str(root / "run")])
    return root, cfg, code, time.perf_counter() - t0


def test_4_scenario_recovery(demo_run):
    root, _, code, elapsed = demo_run
    assert code == 0
    truth_lines = (root / "syn" / "ground_truth.csv").read_text().splitlines()[1:]
    kind_of = {}
    strong = set()
    for line in truth_lines:
        t, kind, *targets = line.split(",")
        kind_of[t] = kind
        if max(abs(float(v)) for v in targets if v) >= 5:
            strong.add(t)
    cluster_lines = (root / "run" / "clusters.csv").read_text().splitlines()[1:]
    label = {t: int(c) for t, c in (l.split(",") for l in cluster_lines)}
    flagged = set(label)
    n_hours = len(read_demand_csv(root / "run" / "demand.csv").hours)
    recall = len(strong & flagged) / len(strong)
    fp_rate = len(flagged - set(kind_of)) / (n_hours - len(kind_of))
    profiles = read_profiles_json(root / "run" / "profiles.json")
    k = len(profiles)

    # each scenario's cluster = majority label of its injected hours
    signs_ok = True
    notes = []
    for kind, targets in SCENARIO_TARGETS.items():
        votes = [label[t] for t, kk in kind_of.items() if kk == kind and t in label]
        c = max(set(votes), key=votes.count) if votes else None
        if c is None:
            signs_ok = False
            continue
        prof = profiles[c]["profile"]
        for mode in MODES:
            if np.sign(prof[mode]) != np.sign(targets[mode]):
                signs_ok = False
        notes.append(f"{kind}->c{c}")
        if kind == "metro_closure":
            metro_ok = prof["metro"] < -4 and prof["bike"] > 1
            signs_ok &= metro_ok
            notes.append(f"metro {prof['metro']:+.2f} bike {prof['bike']:+.2f}")
    ok = recall >= 0.95 and fp_rate <= 0.02 and k == 3 and signs_ok and elapsed < 60
    record_acceptance(4, ok, f"recall {recall:.3f}, FP {fp_rate:.4f}, k*={k}, signs {'ok' if signs_ok else 'BAD'} "
                             f"[{', '.join(notes)}], {elapsed:.1f}s")
    assert ok


def test_5_clustering_properties():
    rng = np.random.default_rng(2024)
    scale_ok = 0
    for _ in range(100):
        n = int(rng.integers(5, 40))
        X = rng.normal(size=(n, 5))
        k = int(rng.integers(1, min(n, 8) + 1))
        c = rng.uniform(0.01, 100, size=(n, 1))
        scale_ok += np.array_equal(agglomerative(X, k), agglomerative(X * c, k))

    rng = np.random.default_rng(0)
    agree = 0
    for _ in range(200):
        X = two_direction_instance(rng)
        labels = agglomerative(X, 2)
        ours = {frozenset(np.flatnonzero(labels == c).tolist()) for c in (0, 1)}
        agree += ours == best_bipartition(X.tolist())
    ok = scale_ok == 100 and agree / 200 >= 0.90
    record_acceptance(5, ok, f"scale-invariant {scale_ok}/100, bipartition agreement {agree / 200:.1%}")
    assert ok


def test_6_calibration():
    curves = {
        3: [(1, 1.0), (2, 0.45), (3, 0.20), (4, 0.10), (5, 0.07), (6, 0.05), (7, 0.04), (8, 0.035)],
        2: [(1, 1.0), (2, 0.1), (3, 0.05), (4, 0.0)],
    }
    knees = []
    for expected, pts in curves.items():
        got = knee_point(SensitivityCurve(tuple(p[0] for p in pts), tuple(p[1] for p in pts)))
        knees.append(got == expected == chord_argmax(pts)[0])
    violations = 0
    for seed in range(20):
        fr = sensitivity_curve(_random_series(seed)).fractions
        violations += sum(b > a for a, b in zip(fr, fr[1:]))
    ok = all(knees) and violations == 0
    record_acceptance(6, ok, f"knee examples {sum(knees)}/2, monotonicity violations {violations} over 20 series")
    assert ok


def _tree_equal(a, b):
    cmp = filecmp.dircmp(a, b)
    stack = [cmp]
    while stack:
        c = stack.pop()
        if c.left_only or c.right_only or c.diff_files or c.funny_files:
            return False
        _, mismatch, errors = filecmp.cmpfiles(c.left, c.right, c.common_files, shallow=False)
        if mismatch or errors:
            return False
        stack.extend(c.subdirs.values())
    return True


def test_7_determinism(demo_run):
    root, cfg, _, _ = demo_run
    runs = {}
    for name, threads in (("t1a", 1), ("t1b", 1), ("t8", 8)):
        assert main(["run", "--config", str(cfg), "--threads", str(threads), "-o", str(root / name)]) == 0
        runs[name] = root / name
    same_seed = _tree_equal(runs["t1a"], runs["t1b"])
    threads = _tree_equal(runs["t1a"], runs["t8"])
    ok = same_seed and threads and _tree_equal(runs["t1a"], root / "run")
    record_acceptance(7, ok, f"rerun identical: {same_seed}, threads 1 vs 8 identical: {threads}")
    assert ok


def test_8_t_cdf_accuracy():
    worst = 0.0
    for df in (1, 3, 10, 100):
        for t in (0, 1, -1, 3, -3, 5, -5):
            cdf = t_cdf_quad(t, df)
            worst = max(worst, abs(t_pvalue(t, df, GREATER) - (1 - cdf)))
            worst = max(worst, abs(t_pvalue(t, df, TWO_SIDED) - 2 * min(cdf, 1 - cdf)))
    ok = worst <= 1e-6
    record_acceptance(8, ok, f"max |p - oracle| = {worst:.2e}")
    assert ok and math.isfinite(worst)
