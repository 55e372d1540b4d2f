"""Brute-force reference implementations for tests.

Everything here follows the definitions literally and is deliberately slow.
Size guards raise instead of truncating so a test cannot pass on no work.
"""
from __future__ import annotations

import itertools
import logging

import numpy as np

from .errors import DuplicatePointError, InsufficientPointsError, SizeGuardError
from .geometry import TIE_RTOL, PointSet

log = logging.getLogger(__name__)

MAX_ORACLE_N = 30
MAX_ORACLE_S = 4


def brute_knn(ps: PointSet, v: int, k: int) -> list[int]:
    """Sort every other point by distance to ``v`` and keep the first ``k``."""
    if k >= ps.n:
        raise InsufficientPointsError(f"k={k} needs at least {k + 1} points")
    x = ps.coords
    others = [u for u in range(ps.n) if u != v]
    dists = [float(np.sqrt(np.sum((x[u] - x[v]) ** 2))) for u in others]
    ranked = sorted(zip(dists, others))
    if ranked and ranked[0][0] == 0.0:
        raise DuplicatePointError(f"point {v} coincides with point {ranked[0][1]}")
    for (a, _), (b, _) in zip(ranked[: k + 1], ranked[1 : k + 1]):
        if b - a <= TIE_RTOL * b:
            log.warning("distance tie at point %d", v)
    return [u for _, u in ranked[:k]]


def brute_neighbors(ps: PointSet, k: int) -> np.ndarray:
    return np.array([brute_knn(ps, v, k) for v in range(ps.n)], dtype=np.int64).reshape(ps.n, k)


def _arc_set(g) -> set:
    return {(int(u), int(v)) for u, v in g.arcs}


def brute_count_motif(g, p) -> int:
    """Distinct (vertex set, arc set) copies found by trying every labeling."""
    if g.n > MAX_ORACLE_N or p.s > MAX_ORACLE_S:
        raise SizeGuardError(f"oracle limited to n <= {MAX_ORACLE_N} and s <= {MAX_ORACLE_S}")
    arcs = _arc_set(g)
    need = len(p.arcs)
    copies = set()
    for subset in itertools.combinations(range(g.n), p.s):
        inside = [(u, v) for u in subset for v in subset if (u, v) in arcs]
        if len(inside) < need:
            continue
        for image in itertools.permutations(subset):
            mapped = frozenset((image[a - 1], image[b - 1]) for a, b in p.arcs)
            if mapped <= arcs:
                copies.add((frozenset(subset), mapped))
    return len(copies)


def brute_R(g) -> int:
    arcs = _arc_set(g)
    return sum(1 for u in range(g.n) for v in range(u + 1, g.n) if (u, v) in arcs and (v, u) in arcs)


def brute_Q(g) -> int:
    """Triplets ({u, w}, v) with v a kNN of both u and w."""
    arcs = _arc_set(g)
    total = 0
    for v in range(g.n):
        tails = [u for u in range(g.n) if (u, v) in arcs]
        total += sum(1 for _ in itertools.combinations(tails, 2))
    return total


def brute_Qj(g, j: int) -> int:
    arcs = _arc_set(g)
    return sum(1 for v in range(g.n) if sum(1 for u in range(g.n) if (u, v) in arcs) == j)
