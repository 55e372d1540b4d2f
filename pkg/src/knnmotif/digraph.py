"""The kNN digraph of a point set and its first-order statistics.

Arc ``(u, v)`` is present when ``v`` is one of the ``k`` nearest neighbors
of ``u``. Every vertex has outdegree ``k``; indegrees are bounded by
``kappa'(d) * k``.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .closedform import kappa_prime_bound
from .errors import (
    DuplicatePointError,
    IndegreeBoundViolation,
    InsufficientPointsError,
    UnknownBoundError,
)
from .geometry import PointSet, build_index

log = logging.getLogger(__name__)


@dataclass
class KnnDigraph:
    """kNN digraph stored as a neighbor table.

    ``neighbors[u]`` lists the heads of the arcs leaving ``u`` in order of
    increasing distance, so arcs sorted by tail then rank are simply the
    table read row by row.
    """

    neighbors: np.ndarray
    dim: int
    tie_events: int = 0
    check_bound: bool = True

    def __post_init__(self):
        self.neighbors = np.asarray(self.neighbors, dtype=np.int64)
        self.indegree = np.bincount(self.neighbors.ravel(), minlength=self.n)
        if self.check_bound:
            bound = self.indegree_bound
            if bound is not None and self.n and self.indegree.max() > bound:
                raise IndegreeBoundViolation(
                    f"indegree {self.indegree.max()} exceeds kappa'({self.dim}) * k = {bound}")

    @property
    def n(self) -> int:
        return self.neighbors.shape[0]

    @property
    def k(self) -> int:
        return self.neighbors.shape[1]

    @property
    def indegree_bound(self) -> int | None:
        try:
            return kappa_prime_bound(self.dim) * self.k
        except UnknownBoundError:
            return None

    @property
    def tails(self) -> np.ndarray:
        return np.repeat(np.arange(self.n), self.k)

    @property
    def heads(self) -> np.ndarray:
        return self.neighbors.ravel()

    @property
    def arcs(self) -> np.ndarray:
        """(n k, 2) array of (tail, head) pairs sorted by tail then rank."""
        return np.column_stack([self.tails, self.heads])

    @property
    def outdegree(self) -> np.ndarray:
        return np.full(self.n, self.k, dtype=np.int64)


def build_knn_digraph(ps: PointSet, k: int, boxsize=None, workers: int = 1) -> KnnDigraph:
    """kNN digraph of ``ps``; needs at least ``k + 1`` points."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    if ps.n < k + 1:
        raise InsufficientPointsError(f"k={k} needs at least {k + 1} points, have {ps.n}")
    idx = build_index(ps, boxsize=boxsize)
    nbrs, ties = idx.query_all(k, workers=workers)
    # the indegree bound assumes Euclidean distance; periodic windows are diagnostics only
    return KnnDigraph(nbrs, ps.dim, tie_events=ties, check_bound=boxsize is None)


def indegree_histogram(g: KnnDigraph) -> np.ndarray:
    """Counts Q_0..Q_top of vertices by indegree.

    ``top`` is ``kappa'(d) k`` when a bound is known for the dimension,
    otherwise the largest observed indegree.
    """
    bound = g.indegree_bound
    length = (bound if bound is not None else int(g.indegree.max(initial=0))) + 1
    hist = np.bincount(g.indegree, minlength=length)
    if len(hist) > length:
        raise IndegreeBoundViolation(f"indegree {len(hist) - 1} exceeds bound {bound}")
    return hist


def count_reflexive(g: KnnDigraph) -> int:
    """Number R of unordered pairs that are kNNs of each other."""
    back = np.any(g.neighbors[g.heads] == g.tails[:, None], axis=1)
    return int(back.sum()) // 2


def count_shared(g: KnnDigraph) -> int:
    """Number Q of pairs of arcs sharing a head, sum of C(indegree, 2)."""
    d = g.indegree.astype(np.int64)
    return int(np.sum(d * (d - 1) // 2))


def component_labels(g: KnnDigraph) -> np.ndarray:
    adj = coo_matrix((np.ones(g.n * g.k, dtype=np.int8), (g.tails, g.heads)), shape=(g.n, g.n))
    _, labels = connected_components(adj, directed=True, connection="weak")
    return labels


def weak_components(g: KnnDigraph) -> list[list[int]]:
    """Weakly connected components, each sorted, ordered by smallest member."""
    labels = component_labels(g)
    order = np.argsort(labels, kind="stable")
    splits = np.flatnonzero(np.diff(labels[order])) + 1
    parts = [p.tolist() for p in np.split(order, splits)]
    return sorted(parts, key=lambda c: c[0])


def component_count(g: KnnDigraph) -> int:
    return int(component_labels(g).max(initial=-1)) + 1


def underlying_graph(g: KnnDigraph) -> np.ndarray:
    """Undirected edges ``(u, v)`` with ``u < v``, one per adjacent pair."""
    return np.unique(np.sort(g.arcs, axis=1), axis=0)


@dataclass
class MarkVector:
    """Class labels ``1..m`` attached to the vertices."""

    marks: np.ndarray
    n_classes: int

    def __post_init__(self):
        self.marks = np.asarray(self.marks, dtype=np.int64)
        if self.n_classes < 1:
            raise ValueError("need at least one mark class")
        if self.marks.size and (self.marks.min() < 1 or self.marks.max() > self.n_classes):
            raise ValueError(f"marks must lie in 1..{self.n_classes}")


def marked_arc_matrix(g: KnnDigraph, marks: MarkVector) -> np.ndarray:
    """Matrix whose (i-1, j-1) entry counts arcs from class i to class j."""
    if len(marks.marks) != g.n:
        raise ValueError("need one mark per vertex")
    m = marks.n_classes
    flat = (marks.marks[g.tails] - 1) * m + (marks.marks[g.heads] - 1)
    return np.bincount(flat, minlength=m * m).reshape(m, m)


def count_marked_arcs(g: KnnDigraph, marks: MarkVector, i: int, j: int) -> int:
    """Number N_ij of arcs whose tail has mark ``i`` and head has mark ``j``."""
    for c in (i, j):
        if not 1 <= c <= marks.n_classes:
            raise ValueError(f"mark class {c} out of range 1..{marks.n_classes}")
    return int(marked_arc_matrix(g, marks)[i - 1, j - 1])


def _evaluate(stat, g: KnnDigraph):
    if callable(stat):
        return stat(g)
    from .motifs import evaluate_statistic

    return evaluate_statistic(g, stat)


def add_one_cost(ps: PointSet, k: int, stat, point=None, region=None):
    """Change in a statistic when one point is inserted, by full rebuild.

    ``stat`` is a :class:`~knnmotif.motifs.StatisticSpec` or any callable
    taking a digraph. The point defaults to the region midpoint when a region
    is given, else the origin.
    """
    if point is None:
        point = region.midpoint if region is not None else np.zeros(ps.dim)
    point = np.asarray(point, dtype=np.float64)
    if np.any(np.all(ps.coords == point, axis=1)):
        raise DuplicatePointError("insertion point coincides with an existing point")
    before = _evaluate(stat, build_knn_digraph(ps, k))
    after = _evaluate(stat, build_knn_digraph(ps.with_point(point), k))
    return after - before


def statistics_dict(g: KnnDigraph) -> dict:
    """The statistics dump: n, k, d, R, Q, Qj and the component count."""
    return {
        "n": g.n,
        "k": g.k,
        "d": g.dim,
        "R": count_reflexive(g),
        "Q": count_shared(g),
        "Qj": [int(x) for x in indegree_histogram(g)],
        "components": component_count(g),
    }


def write_arcs_csv(g: KnnDigraph, path) -> None:
    """Dump arcs as ``tail,head,rank`` rows, rank 1 being the nearest."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["tail", "head", "rank"])
        for u in range(g.n):
            for r, v in enumerate(g.neighbors[u], start=1):
                w.writerow([u, int(v), r])
