"""Counting copies of small weakly connected patterns in a kNN digraph.

A copy of pattern ``D`` is a subdigraph (vertex subset plus arc subset) of
the host that is isomorphic to ``D``; extra host arcs among the chosen
vertices are allowed. Copies are counted as injective arc-preserving maps
``D -> host`` divided by ``|Aut(D)|``. Maps are grown outward from an anchor
along host arcs, so the work per anchor is bounded by the host's maximum
total degree ``K = k (kappa' + 1)``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .closedform import kappa_prime_bound
from .digraph import KnnDigraph

MAX_PATTERN_SIZE = 6


@dataclass(frozen=True)
class MotifPattern:
    """A weakly connected digraph on vertices ``1..s`` (no loops or multi-arcs)."""

    s: int
    arcs: tuple

    def __post_init__(self):
        arcs = tuple(sorted((int(a), int(b)) for a, b in self.arcs))
        object.__setattr__(self, "arcs", arcs)
        if not 1 <= self.s <= MAX_PATTERN_SIZE:
            raise ValueError(f"pattern size must be in 1..{MAX_PATTERN_SIZE}, got {self.s}")
        if len(set(arcs)) != len(arcs):
            raise ValueError("pattern has duplicate arcs")
        for a, b in arcs:
            if not (1 <= a <= self.s and 1 <= b <= self.s):
                raise ValueError(f"arc ({a}, {b}) uses a vertex outside 1..{self.s}")
            if a == b:
                raise ValueError("pattern has a self-loop")
        if not self._weakly_connected():
            raise ValueError("pattern must be weakly connected")

    def _weakly_connected(self) -> bool:
        seen = {1}
        stack = [1]
        while stack:
            u = stack.pop()
            for w in self.neighbors(u):
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.s

    def neighbors(self, u: int) -> set:
        return {b for a, b in self.arcs if a == u} | {a for a, b in self.arcs if b == u}

    @cached_property
    def arc_set(self) -> frozenset:
        return frozenset(self.arcs)

    @classmethod
    def single_vertex(cls) -> "MotifPattern":
        return cls(1, ())

    @classmethod
    def single_arc(cls) -> "MotifPattern":
        return cls(2, ((1, 2),))

    @classmethod
    def mutual_pair(cls) -> "MotifPattern":
        return cls(2, ((1, 2), (2, 1)))

    @classmethod
    def shared_head(cls) -> "MotifPattern":
        return cls(3, ((1, 2), (3, 2)))

    @classmethod
    def star(cls, i: int) -> "MotifPattern":
        """``i`` tails pointing at one head (vertex ``i + 1``); ``star(0)`` is a vertex."""
        return cls(i + 1, tuple((t, i + 1) for t in range(1, i + 1)))

    @classmethod
    def cycle(cls, s: int) -> "MotifPattern":
        return cls(s, tuple((t, t % s + 1) for t in range(1, s + 1)))

    @classmethod
    def path(cls, s: int) -> "MotifPattern":
        return cls(s, tuple((t, t + 1) for t in range(1, s)))

    def to_dict(self) -> dict:
        return {"s": self.s, "arcs": [list(a) for a in self.arcs]}

    @classmethod
    def from_dict(cls, data: dict) -> "MotifPattern":
        return cls(int(data["s"]), tuple(tuple(a) for a in data["arcs"]))

    @classmethod
    def load(cls, path) -> "MotifPattern":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class StatisticSpec:
    """Linear combination ``sum coef_i * H_{D_i}`` of motif counts."""

    terms: tuple

    def __post_init__(self):
        terms = tuple((float(c), p) for c, p in self.terms)
        if not terms:
            raise ValueError("a statistic needs at least one term")
        for _, p in terms:
            if not isinstance(p, MotifPattern):
                raise TypeError("statistic terms must pair a coefficient with a MotifPattern")
        object.__setattr__(self, "terms", terms)

    @classmethod
    def of(cls, pattern: MotifPattern, coef: float = 1.0) -> "StatisticSpec":
        return cls(((coef, pattern),))

    def to_dict(self) -> dict:
        return {"terms": [{"coef": c, "pattern": p.to_dict()} for c, p in self.terms]}

    @classmethod
    def from_dict(cls, data: dict) -> "StatisticSpec":
        return cls(tuple((t["coef"], MotifPattern.from_dict(t["pattern"])) for t in data["terms"]))

    @classmethod
    def load(cls, path) -> "StatisticSpec":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def automorphism_count(p: MotifPattern) -> int:
    """|Aut(p)| by checking every vertex permutation."""
    arcs = p.arc_set
    count = 0
    for perm in itertools.permutations(range(1, p.s + 1)):
        if all((perm[a - 1], perm[b - 1]) in arcs for a, b in arcs):
            count += 1
    return count


class _Host:
    """Adjacency views of a digraph used by the enumerator."""

    def __init__(self, g: KnnDigraph):
        self.n = g.n
        self.out = [list(map(int, row)) for row in g.neighbors]
        self.out_sets = [set(row) for row in self.out]
        order = np.argsort(g.heads, kind="stable")
        tails = g.tails[order]
        bounds = np.concatenate([[0], np.cumsum(g.indegree)])
        self.inn = [tails[bounds[v]:bounds[v + 1]].tolist() for v in range(g.n)]

    def has_arc(self, u: int, v: int) -> bool:
        return v in self.out_sets[u]


def _plan(p: MotifPattern, root: int):
    """Visit order from ``root`` with, for each later vertex, how to find it.

    Returns a list of ``(parent_pos, forward, checks)`` where candidates for
    the new vertex are out-neighbors (``forward``) or in-neighbors of the
    image at ``parent_pos`` and ``checks`` lists ``(pos, outgoing)`` arcs to
    already placed vertices that must also be present.
    """
    order = [root]
    pos = {root: 0}
    steps = []
    queue = [root]
    while queue:
        u = queue.pop(0)
        for w in sorted(p.neighbors(u)):
            if w in pos:
                continue
            forward = (u, w) in p.arc_set
            checks = []
            for x in order:
                if x == u:
                    if forward and (w, u) in p.arc_set:
                        checks.append((pos[x], True))
                    elif not forward and (u, w) in p.arc_set:
                        checks.append((pos[x], False))
                    continue
                if (w, x) in p.arc_set:
                    checks.append((pos[x], True))
                if (x, w) in p.arc_set:
                    checks.append((pos[x], False))
            pos[w] = len(order)
            order.append(w)
            steps.append((pos[u], forward, tuple(checks)))
            queue.append(w)
    return steps


def _count_maps(host: _Host, steps, anchor: int) -> int:
    """Injective arc-preserving maps with the plan's root sent to ``anchor``."""
    image = [anchor]
    depth = len(steps)

    def extend(i: int) -> int:
        if i == depth:
            return 1
        parent, forward, checks = steps[i]
        base = image[parent]
        cands = host.out[base] if forward else host.inn[base]
        total = 0
        for c in cands:
            if c in image:
                continue
            ok = True
            for j, outgoing in checks:
                if outgoing:
                    if not host.has_arc(c, image[j]):
                        ok = False
                        break
                elif not host.has_arc(image[j], c):
                    ok = False
                    break
            if ok:
                image.append(c)
                total += extend(i + 1)
                image.pop()
        return total

    return extend(0)


def _root(p: MotifPattern) -> int:
    return max(range(1, p.s + 1), key=lambda u: (len(p.neighbors(u)), -u))


def count_motif(g: KnnDigraph, p: MotifPattern) -> int:
    """Number H_D of subdigraphs of ``g`` isomorphic to ``p``."""
    if p.s == 1:
        return g.n
    host = _Host(g)
    steps = _plan(p, _root(p))
    maps = sum(_count_maps(host, steps, v) for v in range(g.n))
    aut = automorphism_count(p)
    copies, rem = divmod(maps, aut)
    assert rem == 0, "map count must be a multiple of |Aut|"
    return copies


def local_motif_count(g: KnnDigraph, p: MotifPattern, v: int) -> int:
    """Number h_D of copies of ``p`` in ``g`` that contain vertex ``v``."""
    if not 0 <= v < g.n:
        raise IndexError(f"vertex {v} out of range")
    if p.s == 1:
        return 1
    host = _Host(g)
    maps = sum(_count_maps(host, _plan(p, a), v) for a in range(1, p.s + 1))
    copies, rem = divmod(maps, automorphism_count(p))
    assert rem == 0
    return copies


def local_count_bound(k: int, d: int, s: int) -> int:
    """Explicit bound K^(s-1) s! on copies of an s-vertex pattern through one vertex."""
    big_k = k * (kappa_prime_bound(d) + 1)
    return big_k ** (s - 1) * math.factorial(s)


def evaluate_statistic(g: KnnDigraph, spec: StatisticSpec) -> float:
    """Value of ``sum coef * count_motif`` on ``g``."""
    return math.fsum(c * count_motif(g, p) for c, p in spec.terms)


def star_count(g: KnnDigraph, i: int) -> int:
    """Copies of the i-tailed in-star: sum over heads of C(indegree, i).

    Computed from in-neighbor list sizes; ``count_motif(g, star(i))`` agrees
    wherever the star fits the pattern size cap. ``i = 0`` counts vertices.
    """
    if i < 0:
        raise ValueError("i must be nonnegative")
    if i == 0:
        return g.n
    _, in_sizes = np.unique(g.heads, return_counts=True)
    by_size = np.bincount(in_sizes)
    return sum(int(c) * math.comb(m, i) for m, c in enumerate(by_size) if c)


def qj_via_inclusion_exclusion(g: KnnDigraph, j: int) -> int:
    """Q_j recovered as an alternating sum of in-star counts."""
    top = g.indegree_bound
    if top is None:
        top = int(g.indegree.max(initial=0))
    if not 0 <= j <= top:
        raise ValueError(f"j must lie in 0..{top}")
    return sum((-1) ** (i - j) * math.comb(i, j) * star_count(g, i) for i in range(j, top + 1))
