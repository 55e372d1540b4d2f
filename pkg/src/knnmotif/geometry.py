"""Point sets, sampling windows and exact k-nearest-neighbor queries.

Nearest neighbors are only well defined when pairwise distances are
distinct. Floating point can still produce (near) ties, so two distances
within ``TIE_RTOL`` of each other are treated as equal and ordered by the
smaller point index. Exactly coincident points are rejected outright.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from .errors import (
    DimensionMismatchError,
    DuplicatePointError,
    FormatError,
    InsufficientPointsError,
)

log = logging.getLogger(__name__)

TIE_RTOL = 1e-12
BRUTE_FORCE_BELOW = 64


def distance(p, q) -> float:
    """Euclidean distance between two points of equal dimension."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise DimensionMismatchError(f"cannot compare points of shape {p.shape} and {q.shape}")
    return float(np.sqrt(np.sum((p - q) ** 2)))


def ball_volume(d: int, radius: float = 1.0) -> float:
    """Volume of a d-dimensional Euclidean ball."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * radius**d


@dataclass(frozen=True)
class Region:
    """A bounded sampling window: an axis-aligned box or a Euclidean ball.

    Use the constructors (:meth:`unit_cube`, :meth:`box`, :meth:`ball`,
    :meth:`unit_volume_ball`) rather than the raw fields.
    """

    kind: str
    lo: tuple = field(default=())
    hi: tuple = field(default=())
    center: tuple = field(default=())
    radius: float = 0.0

    def __post_init__(self):
        if self.kind in ("unit-cube", "axis-box"):
            if len(self.lo) == 0 or len(self.lo) != len(self.hi):
                raise ValueError("box bounds must be nonempty and of equal length")
            if not all(math.isfinite(a) and math.isfinite(b) and a < b for a, b in zip(self.lo, self.hi)):
                raise ValueError("box must satisfy lo < hi on every axis")
        elif self.kind == "ball":
            if len(self.center) == 0 or not all(math.isfinite(c) for c in self.center):
                raise ValueError("ball center must be a finite nonempty vector")
            if not (math.isfinite(self.radius) and self.radius > 0):
                raise ValueError("ball radius must be positive")
        else:
            raise ValueError(f"unknown region kind {self.kind!r}")

    @classmethod
    def unit_cube(cls, d: int) -> "Region":
        return cls("unit-cube", lo=(0.0,) * d, hi=(1.0,) * d)

    @classmethod
    def box(cls, lo, hi) -> "Region":
        return cls("axis-box", lo=tuple(float(x) for x in lo), hi=tuple(float(x) for x in hi))

    @classmethod
    def ball(cls, center, radius: float) -> "Region":
        return cls("ball", center=tuple(float(x) for x in center), radius=float(radius))

    @classmethod
    def unit_volume_ball(cls, d: int, center=None) -> "Region":
        """Ball of volume one, centered at the middle of the unit cube by default."""
        if center is None:
            center = (0.5,) * d
        return cls.ball(center, (1.0 / ball_volume(d)) ** (1.0 / d))

    @property
    def is_box(self) -> bool:
        return self.kind != "ball"

    @property
    def dim(self) -> int:
        return len(self.lo) if self.is_box else len(self.center)

    @property
    def volume(self) -> float:
        if self.is_box:
            return math.prod(b - a for a, b in zip(self.lo, self.hi))
        return ball_volume(self.dim, self.radius)

    @property
    def midpoint(self) -> np.ndarray:
        if self.is_box:
            return (np.asarray(self.lo) + np.asarray(self.hi)) / 2
        return np.asarray(self.center, dtype=np.float64)

    def contains(self, coords) -> np.ndarray:
        """Boolean mask of rows of ``coords`` lying in the closed region."""
        x = np.atleast_2d(np.asarray(coords, dtype=np.float64))
        if self.is_box:
            return np.all((x >= np.asarray(self.lo)) & (x <= np.asarray(self.hi)), axis=1)
        r2 = np.sum((x - np.asarray(self.center)) ** 2, axis=1)
        return r2 <= self.radius**2

    def to_dict(self) -> dict:
        if self.is_box:
            return {"kind": self.kind, "lo": list(self.lo), "hi": list(self.hi)}
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}

    @classmethod
    def from_dict(cls, data: dict) -> "Region":
        kind = data["kind"]
        if kind == "ball":
            return cls.ball(data["center"], data["radius"])
        if kind == "unit-cube" and "lo" not in data:
            return cls.unit_cube(int(data["dim"]))
        return cls(kind, lo=tuple(map(float, data["lo"])), hi=tuple(map(float, data["hi"])))


class PointSet:
    """A finite ordered set of points in R^d; a point's id is its row index."""

    def __init__(self, coords, dim: int | None = None):
        arr = np.array(coords, dtype=np.float64)
        if arr.ndim == 1 and arr.size == 0:
            if dim is None:
                raise ValueError("dimension of an empty point set must be given")
            arr = arr.reshape(0, dim)
        if arr.ndim == 1 and dim == 1:
            arr = arr.reshape(-1, 1)
        if arr.ndim != 2 or arr.shape[1] == 0:
            raise DimensionMismatchError(f"coordinates must form an (n, d) array, got shape {arr.shape}")
        if dim is not None and arr.shape[1] != dim:
            raise DimensionMismatchError(f"expected dimension {dim}, got {arr.shape[1]}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("all coordinates must be finite")
        arr.setflags(write=False)
        self._coords = arr

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @property
    def dim(self) -> int:
        return self._coords.shape[1]

    @property
    def n(self) -> int:
        return self._coords.shape[0]

    def __len__(self) -> int:
        return self.n

    def __getitem__(self, i) -> np.ndarray:
        return self._coords[i]

    def __repr__(self) -> str:
        return f"PointSet(n={self.n}, dim={self.dim})"

    def __eq__(self, other) -> bool:
        return isinstance(other, PointSet) and np.array_equal(self._coords, other._coords)

    def affine(self, scale: float, shift=0.0) -> "PointSet":
        """Image under x -> scale * x + shift."""
        if scale == 0:
            raise ValueError("scale must be nonzero")
        return PointSet(scale * self._coords + np.asarray(shift, dtype=np.float64))

    def permuted(self, perm) -> "PointSet":
        return PointSet(self._coords[np.asarray(perm)])

    def with_point(self, x) -> "PointSet":
        """A new set with ``x`` appended as the last id."""
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        if x.shape[1] != self.dim:
            raise DimensionMismatchError("inserted point has the wrong dimension")
        return PointSet(np.vstack([self._coords, x]))

    def without(self, i: int) -> "PointSet":
        return PointSet(np.delete(self._coords, i, axis=0), dim=self.dim)


def _tie_groups_order(dist: np.ndarray, ids: np.ndarray, rtol: float) -> tuple[np.ndarray, bool]:
    """Order candidates by distance, treating near-equal distances as ties.

    Distances within ``rtol`` (relative to the first member of a run) form one
    group; members of a group are ordered by id.
    """
    o = np.lexsort((ids, dist))
    dist, ids = dist[o], ids[o]
    out = []
    tie = False
    start = 0
    for j in range(1, len(dist) + 1):
        if j == len(dist) or dist[j] - dist[start] > rtol * dist[j]:
            group = ids[start:j]
            if len(group) > 1:
                tie = True
                group = np.sort(group)
            out.append(group)
            start = j
    return (np.concatenate(out) if out else ids), tie


class SpatialIndex:
    """Exact k-nearest-neighbor search over a fixed :class:`PointSet`.

    Backed by a median-split k-d tree; sets smaller than
    ``BRUTE_FORCE_BELOW`` points are searched by brute force. ``boxsize``
    switches to the periodic (torus) metric on ``[0, boxsize)``.
    The index is read-only after construction.
    """

    def __init__(self, points: PointSet, boxsize=None, rtol: float = TIE_RTOL):
        if points.n == 0:
            raise InsufficientPointsError("cannot index an empty point set")
        self.points = points
        self.rtol = rtol
        self.boxsize = None if boxsize is None else np.broadcast_to(
            np.asarray(boxsize, dtype=np.float64), (points.dim,)).copy()
        self._tree = None
        if points.n >= BRUTE_FORCE_BELOW:
            self._tree = cKDTree(points.coords, balanced_tree=True, compact_nodes=True,
                                 boxsize=self.boxsize)

    @property
    def n(self) -> int:
        return self.points.n

    def _row_distances(self, v: int) -> np.ndarray:
        diff = self.points.coords - self.points.coords[v]
        if self.boxsize is not None:
            diff = np.abs(diff)
            diff = np.minimum(diff, self.boxsize - diff)
        return np.sqrt(np.einsum("ij,ij->i", diff, diff))

    def _check_k(self, k: int):
        if k < 0:
            raise ValueError("k must be nonnegative")
        if k >= self.n:
            raise InsufficientPointsError(f"k={k} needs at least {k + 1} points, have {self.n}")

    def _exact_row(self, v: int, k: int) -> tuple[np.ndarray, bool]:
        dist = self._row_distances(v)
        ids = np.arange(self.n)
        mask = ids != v
        dist, ids = dist[mask], ids[mask]
        if np.any(dist == 0):
            raise DuplicatePointError(f"point {v} coincides with point {int(ids[dist == 0][0])}")
        order, tie = _tie_groups_order(dist, ids, self.rtol)
        return order[:k], tie

    def query(self, v: int, k: int) -> list[int]:
        """The k nearest other points of point ``v``, nearest first."""
        if not 0 <= v < self.n:
            raise IndexError(f"point id {v} out of range")
        self._check_k(k)
        if k == 0:
            return []
        nbrs, ties = self._batch(np.array([v]), k)
        if ties:
            log.warning("distance tie at point %d resolved by index order", v)
        return [int(x) for x in nbrs[0]]

    def query_all(self, k: int, workers: int = 1) -> tuple[np.ndarray, int]:
        """Neighbor lists of every point as an (n, k) array, plus the tie count.

        ``workers`` threads share the read-only tree; the result does not
        depend on their number.
        """
        self._check_k(k)
        if k == 0:
            return np.empty((self.n, 0), dtype=np.int64), 0
        return self._batch(np.arange(self.n), k, workers)

    def _batch(self, rows: np.ndarray, k: int, workers: int = 1) -> tuple[np.ndarray, int]:
        if self._tree is None:
            out = np.empty((len(rows), k), dtype=np.int64)
            ties = 0
            for r, v in enumerate(rows):
                out[r], tie = self._exact_row(int(v), k)
                ties += tie
            return out, ties

        m = min(k + 2, self.n)
        dist, idx = self._tree.query(self.points.coords[rows], k=m, workers=workers)
        dist = dist.reshape(len(rows), m)
        idx = idx.reshape(len(rows), m).astype(np.int64)
        if np.any(dist[:, 1] == 0):
            bad = int(rows[np.argmax(dist[:, 1] == 0)])
            self._exact_row(bad, k)  # raises with the offending pair
        nd = dist[:, 1:]
        nbrs = idx[:, 1:]
        gaps = np.diff(nd, axis=1) <= self.rtol * nd[:, 1:]
        # self comes first once duplicates are excluded; otherwise redo the row
        suspect = np.any(gaps, axis=1) | (idx[:, 0] != rows)
        out = nbrs[:, :k].copy()
        ties = 0
        for r in np.flatnonzero(suspect):
            out[r], tie = self._exact_row(int(rows[r]), k)
            ties += tie
        if ties:
            log.info("%d distance ties resolved by index order", ties)
        return out, ties


def build_index(ps: PointSet, boxsize=None) -> SpatialIndex:
    """Build an exact k-NN index over ``ps``; deterministic for a given set."""
    return SpatialIndex(ps, boxsize=boxsize)


def knn_query(idx: SpatialIndex, v: int, k: int) -> list[int]:
    """The k nearest points to ``v`` (excluding ``v``), sorted by distance."""
    return idx.query(v, k)


def read_points_csv(path) -> PointSet:
    """Read a points file with header ``x0,...,x{d-1}``."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty points file") from None
        header = [h.strip() for h in header]
        if not header or header != [f"x{i}" for i in range(len(header))]:
            raise FormatError(f"{path}: header must be x0,...,x{{d-1}}, got {header}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise FormatError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from None
    try:
        return PointSet(np.array(rows, dtype=np.float64).reshape(-1, len(header)), dim=len(header))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def format_points_csv(ps: PointSet) -> str:
    """Points file text in decimal notation; values round-trip exactly."""
    lines = [",".join(f"x{i}" for i in range(ps.dim))]
    for row in ps.coords:
        lines.append(",".join(np.format_float_positional(x, unique=True, trim="-") for x in row))
    return "\n".join(lines) + "\n"


def write_points_csv(ps: PointSet, path) -> None:
    with open(Path(path), "w", newline="", encoding="utf-8") as fh:
        fh.write(format_points_csv(ps))
