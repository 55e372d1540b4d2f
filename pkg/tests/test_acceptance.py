"""Acceptance criteria A1-A12, each at its stated tolerance.

Every test records a one-line PASS/FAIL verdict (see the "acceptance
criteria" section of the pytest summary) before asserting.
"""
import math
import os
import time

import numpy as np
import pytest

from conftest import TEN_POINTS, random_points
from knnmotif.closedform import estimate_b2, q_limit_d1, r_limit
from knnmotif.digraph import build_knn_digraph, count_reflexive, count_shared, indegree_histogram
from knnmotif.geometry import PointSet, Region
from knnmotif.identities import run_identity_suite
from knnmotif.montecarlo import ExperimentConfig, region_invariance_check, run_many
from knnmotif.motifs import MotifPattern, count_motif
from knnmotif.oracle import brute_count_motif
from knnmotif.pointproc import ProcessSpec, sample

WORKERS = os.cpu_count() or 1

R_TABLE = {
    (1, 1): 0.3333, (1, 2): 0.7407, (1, 3): 1.1728, (1, 4): 1.6168, (1, 5): 2.0680,
    (2, 1): 0.3107, (2, 2): 0.7105, (2, 3): 1.1365, (2, 4): 1.5751, (2, 5): 2.0215,
}


def experiment(kind, d, k, reps, seed, n=5000, region=None):
    spec = ProcessSpec(kind, n, region or Region.unit_cube(d), seed)
    return ExperimentConfig(spec, k, "R", reps)


def within(got: dict, target: dict, tol) -> tuple[bool, str]:
    tol = tol if isinstance(tol, dict) else {key: tol for key in target}
    ok = all(abs(got[key] - target[key]) <= tol[key] for key in target)
    text = ", ".join(f"{key}={got[key]:.4f} (target {target[key]} +/- {tol[key]})" for key in target)
    return ok, text


def test_a1_r_table(criterion):
    t0 = time.perf_counter()
    errs = {dk: abs(float(r_limit(*dk)) - v) for dk, v in R_TABLE.items()}
    elapsed = time.perf_counter() - t0
    bad = {dk: f"{e:.1e}" for dk, e in errs.items() if e >= 5e-5}
    ok = not bad and elapsed < 1
    criterion("A1", ok, f"max |err| {max(errs.values()):.1e}; entries at or above 5e-5: {bad or 'none'}; "
                        f"{elapsed:.3f}s")
    assert not bad, f"r(d,k) entries off by >= 5e-5: {bad}"
    assert elapsed < 1


def test_a2_q_table_d1(criterion):
    t0 = time.perf_counter()
    got = [q_limit_d1(k) for k in range(1, 6)]
    elapsed = time.perf_counter() - t0
    ok = got == [0.25, 1.5, 3.75, 7, 11.25] and elapsed < 1
    criterion("A2", ok, f"q(1,1..5) = {got}")
    assert ok


def test_a3_means_d1(criterion):
    t0 = time.perf_counter()
    out = run_many(experiment("binomial", 1, 1, 400, seed=3003), ["R", "Q", "Qj(0)", "Qj(1)", "Qj(2)"], WORKERS)
    elapsed = time.perf_counter() - t0
    got = {key: s.mean_over_n for key, s in out.items()}
    ok, text = within(got, {"R": 1 / 3, "Q": 0.25, "Qj(0)": 0.25, "Qj(1)": 0.5, "Qj(2)": 0.25}, 0.01)
    ok = ok and elapsed < 60
    criterion("A3", ok, f"{text}; {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_a4_variance_slopes_d1(criterion):
    t0 = time.perf_counter()
    stats = ["R", "Q", "Qj(1)"]
    binom = run_many(experiment("binomial", 1, 1, 1000, seed=4004), stats, WORKERS)
    poiss = run_many(experiment("poisson", 1, 1, 1000, seed=4005), stats, WORKERS)
    elapsed = time.perf_counter() - t0
    targets = {
        ("U", "R"): 2 / 45, ("P", "R"): 7 / 45,
        ("U", "Q"): 19 / 240, ("P", "Q"): 17 / 120,
        ("U", "Qj(1)"): 19 / 60, ("P", "Qj(1)"): 17 / 30,
    }
    got = {key: (binom if key[0] == "U" else poiss)[key[1]].var_over_n for key in targets}
    rel = {key: got[key] / targets[key] - 1 for key in targets}
    ok = all(abs(r) <= 0.2 for r in rel.values()) and elapsed < 300
    text = ", ".join(f"Var {s}({p})/n={got[(p, s)]:.4f} ({rel[(p, s)]:+.0%})" for p, s in targets)
    criterion("A4", ok, f"{text}; {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_a5_means_d2(criterion):
    t0 = time.perf_counter()
    out = run_many(experiment("binomial", 2, 1, 400, seed=5005), ["R", "Q", "Qj(0)", "Qj(1)", "Qj(2)"], WORKERS)
    elapsed = time.perf_counter() - t0
    got = {key: s.mean_over_n for key, s in out.items()}
    target = {"R": 0.3107, "Q": 0.3166, "Qj(0)": 0.284, "Qj(1)": 0.463, "Qj(2)": 0.221}
    tol = {"R": 0.01, "Q": 0.015, "Qj(0)": 0.01, "Qj(1)": 0.01, "Qj(2)": 0.01}
    ok, text = within(got, target, tol)
    ok = ok and elapsed < 300
    criterion("A5", ok, f"{text}; {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_a6_normality(criterion):
    t0 = time.perf_counter()
    parts, ok = [], True
    for seed, (d, k) in enumerate([(1, 1), (2, 1), (2, 2)], start=6006):
        out = run_many(experiment("binomial", d, k, 1000, seed=seed), ["R", "Q"], WORKERS)
        for name, s in out.items():
            good = abs(s.skewness) <= 0.25 and abs(s.excess_kurtosis) <= 0.6
            ok &= good
            parts.append(f"({d},{k}) {name}: skew {s.skewness:+.3f} kurt {s.excess_kurtosis:+.3f}")
    elapsed = time.perf_counter() - t0
    ok = ok and elapsed < 900
    criterion("A6", ok, "; ".join(parts) + f"; {elapsed:.1f}s")
    assert ok


def test_a7_identity_suite(criterion):
    t0 = time.perf_counter()
    instances, failures = run_identity_suite(seed=7007, count=200, dmax=3, kmax=3, nmin=50, nmax=500)
    elapsed = time.perf_counter() - t0
    ok = len(instances) == 200 and not failures and elapsed < 60
    names = sorted({f.identity for f in failures})
    criterion("A7", ok, f"{len(instances)} instances, {len(failures)} failures {names or ''}; {elapsed:.1f}s")
    assert ok


def test_a8_oracle_equivalence(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8008)
    patterns = [MotifPattern.star(2), MotifPattern.star(3), MotifPattern.mutual_pair(), MotifPattern.shared_head(),
                MotifPattern.cycle(3), MotifPattern.single_arc(), MotifPattern.path(3), MotifPattern.path(4)]
    mismatches, checks = [], 0
    for i in range(50):
        n = int(rng.integers(4, 26))
        k = int(rng.integers(1, 3))
        g = build_knn_digraph(random_points(int(rng.integers(2**31)), n, int(rng.integers(1, 4))), k)
        for p in patterns:
            checks += 1
            if count_motif(g, p) != brute_count_motif(g, p):
                mismatches.append((i, p.arcs))
    elapsed = time.perf_counter() - t0
    ok = not mismatches and elapsed < 60
    criterion("A8", ok, f"{checks} pattern counts on 50 instances, {len(mismatches)} mismatches; {elapsed:.1f}s")
    assert ok


def test_a9_ten_points(criterion):
    t0 = time.perf_counter()
    ps = PointSet(np.array(TEN_POINTS))
    got = {}
    for k in (1, 2):
        g = build_knn_digraph(ps, k)
        q = indegree_histogram(g)
        top = int(np.flatnonzero(q).max()) + 1
        got[k] = (count_reflexive(g), count_shared(g), tuple(int(x) for x in q[:top]))
    elapsed = time.perf_counter() - t0
    ok = got == {1: (3, 3, (3, 4, 3)), 2: (6, 17, (1, 3, 2, 3, 1))} and elapsed < 1
    criterion("A9", ok, f"k=1 (R, Q, Qj) = {got[1]}, k=2 = {got[2]}")
    assert ok


@pytest.mark.slow
def test_a10_region_independence(criterion):
    t0 = time.perf_counter()
    rep = region_invariance_check(experiment("binomial", 2, 1, 400, seed=1010),
                                  Region.unit_cube(2), Region.unit_volume_ball(2), WORKERS)
    elapsed = time.perf_counter() - t0
    ok = rep.overlap and elapsed < 300
    a, b = rep.a.ci95_mean, rep.b.ci95_mean
    criterion("A10", ok, f"cube CI [{a[0]:.4f}, {a[1]:.4f}], ball CI [{b[0]:.4f}, {b[1]:.4f}]; {elapsed:.1f}s")
    assert ok


@pytest.mark.slow
def test_a11_performance(criterion):
    ps = sample(ProcessSpec("binomial", 10**6, Region.unit_cube(2), seed=1111))
    t0 = time.perf_counter()
    g = build_knn_digraph(ps, 3, workers=WORKERS)
    r, q, qj = count_reflexive(g), count_shared(g), indegree_histogram(g)
    elapsed = time.perf_counter() - t0
    ok = elapsed <= 60 and int(qj.sum()) == 10**6
    criterion("A11", ok, f"n=1e6, d=2, k=3: build + R, Q, Qj in {elapsed:.1f}s on {WORKERS} core(s) "
                         f"(R/n={r / 1e6:.4f}, Q/n={q / 1e6:.4f})")
    assert ok


@pytest.mark.slow
def test_a12_b2_cross_check(criterion):
    t0 = time.perf_counter()
    half = estimate_b2(2, 10**6, seed=1212) / 2
    elapsed = time.perf_counter() - t0
    ok = abs(half - 0.3166) <= 0.01 and elapsed < 300
    criterion("A12", ok, f"b2(2)/2 = {half:.4f} (target 0.3166 +/- 0.01); {elapsed:.1f}s")
    assert ok
