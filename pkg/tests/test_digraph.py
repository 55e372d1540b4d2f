import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_points
from knnmotif.closedform import kappa_prime_bound
from knnmotif.digraph import (
    KnnDigraph,
    MarkVector,
    add_one_cost,
    build_knn_digraph,
    component_count,
    count_marked_arcs,
    count_reflexive,
    count_shared,
    indegree_histogram,
    marked_arc_matrix,
    statistics_dict,
    underlying_graph,
    weak_components,
    write_arcs_csv,
)
from knnmotif.errors import DuplicatePointError, IndegreeBoundViolation, InsufficientPointsError
from knnmotif.geometry import PointSet, Region
from knnmotif.motifs import MotifPattern, StatisticSpec
from knnmotif.oracle import brute_neighbors

TWO = PointSet([[0.0, 0.0], [1.0, 0.5]])


def test_two_points():
    g = build_knn_digraph(TWO, 1)
    assert sorted(map(tuple, g.arcs.tolist())) == [(0, 1), (1, 0)]
    assert list(indegree_histogram(g))[1] == 2
    assert count_reflexive(g) == 1
    assert weak_components(g) == [[0, 1]]
    assert len(underlying_graph(g)) == 1


def test_insufficient_points():
    with pytest.raises(InsufficientPointsError):
        build_knn_digraph(TWO, 2)


@pytest.mark.parametrize("k, R, Q, Qj", [
    (1, 3, 3, [3, 4, 3, 0, 0, 0]),
    (2, 6, 17, [1, 3, 2, 3, 1, 0, 0, 0, 0, 0, 0]),
])
def test_ten_point_statistics(ten_points, k, R, Q, Qj):
    g = build_knn_digraph(ten_points, k)
    assert count_reflexive(g) == R
    assert count_shared(g) == Q
    assert indegree_histogram(g).tolist() == Qj


def test_ten_point_components_and_edges(ten_points):
    g = build_knn_digraph(ten_points, 1)
    assert component_count(g) == 3
    assert len(underlying_graph(g)) == 10 - 3
    assert all(len(c) >= 2 for c in weak_components(g))


@given(st.integers(0, 2**32), st.integers(3, 120), st.integers(1, 3), st.integers(1, 3))
def test_structural_identities(seed, n, d, k):
    k = min(k, n - 1)
    g = build_knn_digraph(random_points(seed, n, d), k)
    q = indegree_histogram(g)
    j = np.arange(len(q))
    assert len(g.arcs) == n * k
    assert np.all(g.outdegree == k)
    assert not np.any(g.tails == g.heads)
    assert len(np.unique(g.arcs, axis=0)) == n * k
    assert len(q) == kappa_prime_bound(d) * k + 1
    assert q.sum() == n and j @ q == n * k and (j - k) @ q == 0
    assert count_shared(g) == sum(math.comb(int(a), 2) * int(c) for a, c in zip(j, q))
    assert 2 * count_shared(g) >= n * k * (k - 1)
    assert 2 * count_reflexive(g) <= n * k
    assert len(underlying_graph(g)) + count_reflexive(g) == n * k


@pytest.mark.parametrize("seed", range(10))
def test_arcs_match_oracle(seed):
    ps = random_points(seed, 25, 2)
    assert np.array_equal(build_knn_digraph(ps, 2).neighbors, brute_neighbors(ps, 2))


def test_arcs_sorted_by_tail_then_distance():
    ps = random_points(4, 300, 2)
    g = build_knn_digraph(ps, 4)
    assert np.all(np.diff(g.tails) >= 0)
    dist = np.linalg.norm(ps.coords[g.neighbors] - ps.coords[:, None, :], axis=-1)
    assert np.all(np.diff(dist, axis=1) > 0)


def test_components_equal_reflexive_pairs_for_1nn():
    for seed in range(100):
        g = build_knn_digraph(random_points(seed, 40 + seed, 1 + seed % 3), 1)
        assert component_count(g) == count_reflexive(g)
        assert min(len(c) for c in weak_components(g)) >= 2


def test_weak_components_partition():
    g = build_knn_digraph(random_points(7, 200, 2), 1)
    parts = weak_components(g)
    assert sorted(v for c in parts for v in c) == list(range(200))
    assert [c[0] for c in parts] == sorted(c[0] for c in parts)


@given(st.integers(0, 2**32), st.floats(0.001, 1000), st.floats(-10, 10), st.integers(1, 3))
def test_statistics_affine_invariant(seed, scale, shift, k):
    ps = random_points(seed, 60, 2)
    a = statistics_dict(build_knn_digraph(ps, k))
    b = statistics_dict(build_knn_digraph(ps.affine(-scale, shift), k))
    assert a == b


@pytest.mark.parametrize("workers", [1, 3])
def test_digraph_independent_of_workers(workers):
    ps = random_points(2, 5000, 2)
    assert np.array_equal(build_knn_digraph(ps, 3).neighbors, build_knn_digraph(ps, 3, workers=workers).neighbors)


def test_indegree_bound_violation_is_hard_error():
    # everyone points at vertex 0: indegree 5 > kappa'(1) * 1
    with pytest.raises(IndegreeBoundViolation):
        KnnDigraph(np.array([[1], [0], [0], [0], [0], [0]]), dim=1)


def test_unknown_dimension_histogram_uses_observed_max():
    g = build_knn_digraph(random_points(1, 100, 5), 2)
    assert g.indegree_bound is None
    assert len(indegree_histogram(g)) == g.indegree.max() + 1


def test_marks_all_one():
    g = build_knn_digraph(random_points(3, 50, 2), 2)
    marks = MarkVector(np.ones(50, dtype=int), 2)
    assert count_marked_arcs(g, marks, 1, 1) == 100
    assert count_marked_arcs(g, marks, 1, 2) == count_marked_arcs(g, marks, 2, 1) == 0


def test_marked_arcs_partition_and_oracle():
    rng = np.random.default_rng(0)
    for seed in range(20):
        g = build_knn_digraph(random_points(seed, 30, 2), 1 + seed % 3)
        m = MarkVector(rng.integers(1, 3, size=30), 2)
        mat = marked_arc_matrix(g, m)
        assert mat.sum() == g.n * g.k
        for i in (1, 2):
            for j in (1, 2):
                scan = sum(1 for u, v in g.arcs if m.marks[u] == i and m.marks[v] == j)
                assert count_marked_arcs(g, m, i, j) == scan


def test_marked_class_out_of_range():
    g = build_knn_digraph(TWO, 1)
    with pytest.raises(ValueError):
        count_marked_arcs(g, MarkVector([1, 2], 2), 1, 3)
    with pytest.raises(ValueError):
        MarkVector([0, 1], 2)


def test_add_one_vertex_count():
    ps = random_points(5, 40, 2)
    assert add_one_cost(ps, 2, lambda g: g.n, region=Region.unit_cube(2)) == 1
    assert add_one_cost(ps, 2, StatisticSpec.of(MotifPattern.single_vertex())) == 1


def test_add_one_duplicate_point():
    ps = PointSet([[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]])
    with pytest.raises(DuplicatePointError):
        add_one_cost(ps, 1, count_reflexive)


@pytest.mark.parametrize("k", [1, 2, 3])
def test_add_one_reflexive_bounded(k):
    rng = np.random.default_rng(k)
    bound = k * (kappa_prime_bound(2) + 1)
    for _ in range(100):
        ps = PointSet(rng.random((60, 2)) * 2 - 1)
        assert abs(add_one_cost(ps, k, count_reflexive)) <= bound


def test_statistics_and_arcs_dump(ten_points, tmp_path):
    g = build_knn_digraph(ten_points, 2)
    stats = statistics_dict(g)
    assert set(stats) == {"n", "k", "d", "R", "Q", "Qj", "components"}
    path = tmp_path / "arcs.csv"
    write_arcs_csv(g, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 20
    assert [int(r["rank"]) for r in rows[:2]] == [1, 2]
    assert [(int(r["tail"]), int(r["head"])) for r in rows] == [tuple(a) for a in g.arcs.tolist()]
