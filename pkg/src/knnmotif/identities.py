"""Deterministic identities every kNN digraph satisfies, checked on random inputs."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .digraph import (
    KnnDigraph,
    build_knn_digraph,
    component_count,
    count_reflexive,
    count_shared,
    indegree_histogram,
    underlying_graph,
)
from .geometry import PointSet
from .motifs import qj_via_inclusion_exclusion
from .rng import stream


@dataclass(frozen=True)
class Instance:
    index: int
    d: int
    k: int
    n: int


@dataclass(frozen=True)
class Failure:
    identity: str
    instance: Instance
    detail: str


def random_instances(seed: int, count: int = 200, dmax: int = 3, kmax: int = 3,
                     nmin: int = 50, nmax: int = 500) -> list[Instance]:
    """Instance ``i`` draws (d, k, n) from stream ``(seed, i)``."""
    out = []
    for i in range(count):
        rng = stream(seed, i)
        d = int(rng.integers(1, dmax + 1))
        k = int(rng.integers(1, kmax + 1))
        n = int(rng.integers(nmin, nmax + 1))
        out.append(Instance(i, d, k, n))
    return out


def instance_points(seed: int, inst: Instance) -> PointSet:
    rng = stream(seed, inst.index, 1)
    return PointSet(rng.random((inst.n, inst.d)), dim=inst.d)


def check_digraph(g: KnnDigraph) -> list[tuple[str, bool, str]]:
    """Evaluate every identity on ``g``; returns ``(name, holds, detail)`` rows."""
    n, k = g.n, g.k
    q = indegree_histogram(g)
    j = np.arange(len(q))
    big_q = count_shared(g)
    r = count_reflexive(g)
    rows = [
        ("sum Qj = n", int(q.sum()) == n, f"{int(q.sum())} vs {n}"),
        ("sum j Qj = nk", int(j @ q) == n * k, f"{int(j @ q)} vs {n * k}"),
        ("sum (j-k) Qj = 0", int((j - k) @ q) == 0, f"{int((j - k) @ q)}"),
        ("Q = sum C(j,2) Qj", big_q == sum(math.comb(int(a), 2) * int(c) for a, c in zip(j, q)),
         f"Q={big_q}"),
        ("Q >= nk(k-1)/2", 2 * big_q >= n * k * (k - 1), f"Q={big_q}"),
        ("max indegree <= kappa' k",
         g.indegree_bound is None or int(g.indegree.max()) <= g.indegree_bound,
         f"max={int(g.indegree.max())} bound={g.indegree_bound}"),
        ("underlying edges = nk - R", len(underlying_graph(g)) == n * k - r,
         f"{len(underlying_graph(g))} vs {n * k - r}"),
    ]
    if k == 1:
        c = component_count(g)
        rows.append(("components = R (k=1)", c == r, f"{c} vs R={r}"))
    bad = [int(t) for t in j if qj_via_inclusion_exclusion(g, int(t)) != int(q[t])]
    rows.append(("Qj by inclusion-exclusion", not bad, f"mismatch at j={bad}" if bad else ""))
    return rows


def run_identity_suite(seed: int, count: int = 200, **ranges) -> tuple[list[Instance], list[Failure]]:
    instances = random_instances(seed, count, **ranges)
    failures = []
    for inst in instances:
        g = build_knn_digraph(instance_points(seed, inst), inst.k)
        for name, ok, detail in check_digraph(g):
            if not ok:
                failures.append(Failure(name, inst, detail))
    return instances, failures
