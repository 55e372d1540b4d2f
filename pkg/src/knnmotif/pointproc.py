"""Seeded binomial and Poisson samplers plus deterministic fixtures.

The binomial process places exactly ``n`` i.i.d. uniform points in a
region. The homogeneous Poisson process of intensity ``n / volume`` draws a
Poisson(n) count and then that many uniform points.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .closedform import kappa_prime_bound
from .errors import ImpossibleIndegreeError
from .geometry import PointSet, Region
from .rng import MASK64, stream


@dataclass(frozen=True)
class ProcessSpec:
    kind: str
    n: int
    region: Region = field(default_factory=lambda: Region.unit_cube(2))
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("binomial", "poisson"):
            raise ValueError(f"process kind must be 'binomial' or 'poisson', got {self.kind!r}")
        if int(self.n) != self.n or self.n < 1:
            raise ValueError("n must be a positive integer")
        if not 0 <= self.seed <= MASK64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def dim(self) -> int:
        return self.region.dim


def uniform_in_region(region: Region, m: int, rng: np.random.Generator) -> np.ndarray:
    """``m`` i.i.d. uniform points in ``region`` as an (m, d) array."""
    d = region.dim
    if region.is_box:
        lo = np.asarray(region.lo)
        hi = np.asarray(region.hi)
        return lo + (hi - lo) * rng.random((m, d))
    if d == 1:
        u = 2.0 * rng.random((m, 1)) - 1.0
        return np.asarray(region.center) + region.radius * u
    g = rng.standard_normal((m, d))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = region.radius * rng.random(m) ** (1.0 / d)
    return np.asarray(region.center) + g * rad[:, None]


def sample_binomial(spec: ProcessSpec, replicate: int = 0, retry: int = 0) -> PointSet:
    """Exactly ``spec.n`` uniform points; stream key ``(seed, replicate)``."""
    if spec.kind != "binomial":
        raise ValueError("sample_binomial needs a binomial spec")
    rng = stream(spec.seed, replicate, retry)
    return PointSet(uniform_in_region(spec.region, spec.n, rng), dim=spec.dim)


def sample_poisson(spec: ProcessSpec, replicate: int = 0, retry: int = 0) -> PointSet:
    """Poisson(n) many uniform points: a homogeneous Poisson process on the region."""
    if spec.kind != "poisson":
        raise ValueError("sample_poisson needs a poisson spec")
    rng = stream(spec.seed, replicate, retry)
    count = int(rng.poisson(spec.n))
    return PointSet(uniform_in_region(spec.region, count, rng), dim=spec.dim)


def sample(spec: ProcessSpec, replicate: int = 0, retry: int = 0) -> PointSet:
    if spec.kind == "binomial":
        return sample_binomial(spec, replicate, retry)
    return sample_poisson(spec, replicate, retry)


def anchor_directions(d: int) -> np.ndarray:
    """kappa'(d) unit vectors with pairwise distances strictly above 1."""
    if d == 1:
        return np.array([[1.0], [-1.0]])
    if d == 2:
        t = 2 * np.pi * np.arange(5) / 5
        return np.column_stack([np.cos(t), np.sin(t)])
    raise ValueError("anchor sets are implemented for d in {1, 2}")


def fixture_epsilon(d: int) -> float:
    a = anchor_directions(d)
    chords = np.linalg.norm(a[:, None] - a[None], axis=-1)
    r = chords[~np.eye(len(a), dtype=bool)].min()
    return min((r - 1) / 4, 0.25) / 2


def indegree_class_sizes(d: int, k: int, j: int) -> tuple[int, ...]:
    """Class sizes s_1..s_kappa' (each at most k) summing to ``j``."""
    kp = kappa_prime_bound(d)
    if j < 0:
        raise ValueError("indegree must be nonnegative")
    if j > kp * k:
        raise ImpossibleIndegreeError(f"indegree {j} exceeds kappa'({d}) * k = {kp * k}")
    sizes = []
    left = j
    for _ in range(kp):
        sizes.append(min(k, left))
        left -= sizes[-1]
    return tuple(sizes)


def _points_in_ball(center: np.ndarray, eps: float, m: int, rng) -> np.ndarray:
    if m == 0:
        return np.empty((0, len(center)))
    return uniform_in_region(Region.ball(center, eps * 0.999), m, rng)


def build_indegree_fixture(d: int, k: int, sizes, n: int | None = None, seed: int = 0) -> PointSet:
    """A point set whose point 0 (at the origin) has indegree ``sum(sizes)``.

    ``sizes[i]`` points are placed near anchor direction ``i``; the remaining
    points form a tight cluster around ``(3, 0, ...)``. ``n`` defaults to the
    smallest admissible size ``k (kappa' + 1) + 2``.
    """
    kp = kappa_prime_bound(d)
    sizes = tuple(int(s) for s in sizes)
    j = sum(sizes)
    if len(sizes) > kp or j > kp * k:
        raise ImpossibleIndegreeError(f"indegree {j} with {len(sizes)} classes exceeds kappa'({d}) * k = {kp * k}")
    if any(s < 0 or s > k for s in sizes):
        raise ValueError(f"class sizes must lie in [0, {k}]")
    n_min = k * (kp + 1) + 2
    n = n_min if n is None else n
    if n < n_min:
        raise ValueError(f"need n >= k (kappa' + 1) + 2 = {n_min}")
    anchors = anchor_directions(d)
    eps = fixture_epsilon(d)
    rng = stream(seed, 0)
    far = np.zeros(d)
    far[0] = 3.0
    parts = [np.zeros((1, d))]
    for a, s in zip(anchors, sizes):
        parts.append(_points_in_ball(a, eps, s, rng))
    parts.append(_points_in_ball(far, eps, n - 1 - j, rng))
    return PointSet(np.vstack(parts), dim=d)


def build_add_one_fixture(d: int, k: int, seed: int = 0) -> tuple[PointSet, np.ndarray]:
    """Configuration where inserting the origin adds exactly k reflexive pairs.

    ``k`` points sit near one anchor and a crowd sits far away; after the
    origin is inserted it and those ``k`` points are mutual kNNs.
    """
    sizes = (k,) + (0,) * (kappa_prime_bound(d) - 1)
    ps = build_indegree_fixture(d, k, sizes, seed=seed)
    return ps.without(0), np.zeros(d)


def sample_marks(n: int, class_probs, rng: np.random.Generator) -> np.ndarray:
    """i.i.d. marks in ``1..m`` drawn with the given class probabilities."""
    p = np.asarray(class_probs, dtype=np.float64)
    if p.ndim != 1 or len(p) == 0 or np.any(p <= 0) or not math.isclose(p.sum(), 1.0, rel_tol=1e-9):
        raise ValueError("class probabilities must be positive and sum to 1")
    return rng.choice(len(p), size=n, p=p) + 1
