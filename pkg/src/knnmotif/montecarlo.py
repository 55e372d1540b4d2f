"""Seeded Monte Carlo experiments over random kNN digraphs.

Replicate ``r`` draws its point set from stream ``(seed, r)``, builds the
kNN digraph and evaluates one or more statistics. Replicates are
independent, so they may run on any number of worker processes; results
are gathered and reduced in replicate order, which makes every summary
bit-identical for a fixed configuration regardless of the worker count.
"""
from __future__ import annotations

import logging
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .closedform import kappa_prime_bound
from .digraph import (
    KnnDigraph,
    MarkVector,
    build_knn_digraph,
    count_marked_arcs,
    count_reflexive,
    count_shared,
    indegree_histogram,
)
from .errors import DegenerateStatisticError, UnknownBoundError
from .geometry import Region
from .motifs import StatisticSpec, evaluate_statistic
from .pointproc import ProcessSpec, sample, sample_marks
from .rng import MASK64, stream

log = logging.getLogger(__name__)

Z95 = float(norm.ppf(0.975))
MARKS_TAG = 1 << 63
BOOTSTRAP_STREAM = MASK64


@dataclass(frozen=True)
class Statistic:
    """A named statistic: ``R``, ``Q``, ``N`` (vertices), ``Qj(j)``, ``Nij(i,j)`` or a motif spec."""

    name: str
    args: tuple = ()
    spec: StatisticSpec | None = None

    def __post_init__(self):
        arity = {"R": 0, "Q": 0, "N": 0, "Qj": 1, "Nij": 2, "motif": 0}
        if self.name not in arity:
            raise ValueError(f"unknown statistic {self.name!r}")
        if len(self.args) != arity[self.name]:
            raise ValueError(f"{self.name} takes {arity[self.name]} argument(s)")
        if (self.name == "motif") != (self.spec is not None):
            raise ValueError("a motif statistic needs a StatisticSpec and nothing else does")

    @property
    def label(self) -> str:
        if self.args:
            return f"{self.name}({','.join(map(str, self.args))})"
        return self.name

    @classmethod
    def parse(cls, text: str) -> "Statistic":
        """Parse ``R``, ``Q``, ``Qj(2)``/``Qj:2``, ``Nij(1,2)``/``Nij:1,2`` or ``motif:<file>``."""
        text = text.strip()
        if text.startswith("motif:"):
            from .motifs import MotifPattern
            import json

            with open(text[len("motif:"):], encoding="utf-8") as fh:
                data = json.load(fh)
            spec = StatisticSpec.from_dict(data) if "terms" in data else StatisticSpec.of(MotifPattern.from_dict(data))
            return cls("motif", spec=spec)
        m = re.fullmatch(r"(\w+)(?:[(:]([\d,\s]*)\)?)?", text)
        if not m:
            raise ValueError(f"cannot parse statistic {text!r}")
        args = tuple(int(a) for a in m.group(2).split(",")) if m.group(2) else ()
        return cls(m.group(1), args)

    def evaluate(self, g: KnnDigraph, marks: MarkVector | None = None):
        if self.name == "R":
            return count_reflexive(g)
        if self.name == "Q":
            return count_shared(g)
        if self.name == "N":
            return g.n
        if self.name == "Qj":
            return int(np.count_nonzero(g.indegree == self.args[0]))
        if self.name == "Nij":
            if marks is None:
                raise ValueError("Nij needs marks")
            return count_marked_arcs(g, marks, *self.args)
        return evaluate_statistic(g, self.spec)

    def to_json(self):
        if self.spec is not None:
            return {"motif": self.spec.to_dict()}
        return self.label


def as_statistic(obj) -> Statistic:
    if isinstance(obj, Statistic):
        return obj
    if isinstance(obj, StatisticSpec):
        return Statistic("motif", spec=obj)
    if isinstance(obj, dict) and "motif" in obj:
        return Statistic("motif", spec=StatisticSpec.from_dict(obj["motif"]))
    return Statistic.parse(str(obj))


@dataclass(frozen=True)
class ExperimentConfig:
    process: ProcessSpec
    k: int
    statistic: Statistic = field(default_factory=lambda: Statistic("R"))
    replicates: int = 100
    marks: tuple | None = None
    torus: bool = False

    def __post_init__(self):
        object.__setattr__(self, "statistic", as_statistic(self.statistic))
        if self.marks is not None:
            object.__setattr__(self, "marks", tuple(float(p) for p in self.marks))
        if self.k < 1:
            raise ValueError("k must be positive")
        if self.replicates < 2:
            raise ValueError("need at least two replicates")
        if self.torus and not self.process.region.is_box:
            raise ValueError("the torus metric needs a box region")
        self.check_statistic(self.statistic)

    def check_statistic(self, stat: Statistic):
        if stat.name == "Qj":
            try:
                top = kappa_prime_bound(self.process.dim) * self.k
            except UnknownBoundError:
                top = None
            if stat.args[0] < 0 or (top is not None and stat.args[0] > top):
                raise ValueError(f"Qj index must lie in 0..{top}")
        if stat.name == "Nij":
            if self.marks is None:
                raise ValueError("Nij needs mark class probabilities")
            if not all(1 <= c <= len(self.marks) for c in stat.args):
                raise ValueError("Nij classes out of range")

    @property
    def n(self) -> int:
        return self.process.n

    def to_dict(self) -> dict:
        return {
            "process": {"kind": self.process.kind, "n": self.process.n,
                        "region": self.process.region.to_dict(), "seed": self.process.seed},
            "k": self.k,
            "statistic": self.statistic.to_json(),
            "replicates": self.replicates,
            "marks": list(self.marks) if self.marks is not None else None,
            "torus": self.torus,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        p = data["process"]
        region = Region.from_dict(p["region"]) if "region" in p else Region.unit_cube(int(p.get("dim", 2)))
        process = ProcessSpec(p["kind"], int(p["n"]), region, int(p.get("seed", 0)))
        marks = data.get("marks")
        return cls(process, int(data["k"]), as_statistic(data.get("statistic", "R")),
                   int(data.get("replicates", 100)), tuple(marks) if marks else None,
                   bool(data.get("torus", False)))


def _replicate(cfg: ExperimentConfig, stats: tuple, r: int):
    """Values of ``stats`` on replicate ``r`` plus tie and resample counts."""
    retry = 0
    while True:
        ps = sample(cfg.process, r, retry)
        if ps.n >= cfg.k + 1:
            break
        retry += 1
    boxsize = None
    if cfg.torus:
        lo = np.asarray(cfg.process.region.lo)
        boxsize = np.asarray(cfg.process.region.hi) - lo
        ps = ps.affine(1.0, -lo)
    g = build_knn_digraph(ps, cfg.k, boxsize=boxsize)
    marks = None
    if cfg.marks is not None:
        labels = sample_marks(ps.n, cfg.marks, stream(cfg.process.seed, r, MARKS_TAG | retry))
        marks = MarkVector(labels, len(cfg.marks))
    values = tuple(s.evaluate(g, marks) for s in stats)
    return values, g.tie_events, retry


def _replicate_chunk(args):
    cfg, stats, rows = args
    return [_replicate(cfg, stats, r) for r in rows]


@dataclass
class ReplicateTable:
    values: list          # one tuple per replicate
    tie_events: int
    degenerate_replicates: int


def run_replicates(cfg: ExperimentConfig, stats, workers: int = 1) -> ReplicateTable:
    """Evaluate ``stats`` on every replicate, in replicate order."""
    stats = tuple(stats)
    reps = range(cfg.replicates)
    if workers <= 1:
        rows = [_replicate(cfg, stats, r) for r in reps]
    else:
        chunk = max(1, math.ceil(cfg.replicates / (4 * workers)))
        jobs = [(cfg, stats, reps[i:i + chunk]) for i in range(0, cfg.replicates, chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = [row for part in pool.map(_replicate_chunk, jobs) for row in part]
    ties = sum(t for _, t, _ in rows)
    degenerate = sum(d for _, _, d in rows)
    if degenerate:
        log.info("%d degenerate replicates were resampled", degenerate)
    return ReplicateTable([v for v, _, _ in rows], ties, degenerate)


@dataclass
class ExperimentSummary:
    statistic: str
    n: int
    replicates: int
    values: np.ndarray
    mean_over_n: float
    var_over_n: float
    ci95_mean: tuple
    skewness: float
    excess_kurtosis: float
    z_skew: float
    z_kurt: float
    tie_events: int = 0
    degenerate_replicates: int = 0
    config: ExperimentConfig | None = None

    @property
    def normality_z_scores(self) -> tuple:
        return (self.z_skew, self.z_kurt)

    def to_dict(self, per_replicate: bool = False) -> dict:
        def num(x):
            return None if not math.isfinite(x) else x

        out = {
            "config": self.config.to_dict() if self.config is not None else None,
            "statistic": self.statistic,
            "estimates": {"mean_over_n": self.mean_over_n, "var_over_n": self.var_over_n,
                          "ci95": list(self.ci95_mean)},
            "diagnostics": {"skewness": num(self.skewness), "excess_kurtosis": num(self.excess_kurtosis),
                            "z_skew": num(self.z_skew), "z_kurt": num(self.z_kurt)},
            "counts": {"ties": self.tie_events, "degenerate": self.degenerate_replicates},
        }
        if per_replicate:
            out["per_replicate"] = [v.item() if hasattr(v, "item") else v for v in self.values]
        return out


def summarize(values, n: int, label: str = "", tie_events: int = 0, degenerate: int = 0,
              config: ExperimentConfig | None = None) -> ExperimentSummary:
    """Mean/n, variance/n, a 95% CI for mean/n and moment diagnostics.

    Sums use exactly rounded summation, so the result depends only on the
    multiset of values.
    """
    x = np.asarray(values, dtype=np.float64)
    reps = len(x)
    mean = math.fsum(x) / reps
    dev = x - mean
    m2 = math.fsum(dev**2) / reps
    var = m2 * reps / (reps - 1)
    half = Z95 * math.sqrt(var / reps) / n
    if m2 > 0:
        skew = math.fsum(dev**3) / reps / m2**1.5
        kurt = math.fsum(dev**4) / reps / m2**2 - 3.0
    else:
        skew = kurt = float("nan")
    return ExperimentSummary(
        statistic=label, n=n, replicates=reps, values=np.asarray(values),
        mean_over_n=mean / n, var_over_n=var / n,
        ci95_mean=(mean / n - half, mean / n + half),
        skewness=skew, excess_kurtosis=kurt,
        z_skew=skew / math.sqrt(6 / reps), z_kurt=kurt / math.sqrt(24 / reps),
        tie_events=tie_events, degenerate_replicates=degenerate, config=config,
    )


def run_many(cfg: ExperimentConfig, stats, workers: int = 1) -> dict:
    """Summaries of several statistics computed on the same replicates, keyed by label."""
    stats = [as_statistic(s) for s in stats]
    for s in stats:
        cfg.check_statistic(s)
    table = run_replicates(cfg, stats, workers)
    out = {}
    for i, s in enumerate(stats):
        col = [v[i] for v in table.values]
        out[s.label] = summarize(col, cfg.n, s.label, table.tie_events, table.degenerate_replicates,
                                 replace(cfg, statistic=s))
    return out


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentSummary:
    """Run the configured experiment and summarize its statistic."""
    return run_many(cfg, [cfg.statistic], workers)[cfg.statistic.label]


def estimate_variance_slope(cfg: ExperimentConfig, workers: int = 1) -> float:
    """Sample variance of the statistic divided by the nominal n."""
    if cfg.replicates < 200:
        raise ValueError("variance slopes need at least 200 replicates")
    return run_experiment(cfg, workers).var_over_n


def normality_diagnostics(cfg: ExperimentConfig, workers: int = 1, summary: ExperimentSummary | None = None):
    """Sample skewness, excess kurtosis and their z-scores against sqrt(6/R), sqrt(24/R)."""
    if cfg.replicates < 500:
        raise ValueError("normality diagnostics need at least 500 replicates")
    s = summary if summary is not None else run_experiment(cfg, workers)
    if not math.isfinite(s.skewness):
        raise DegenerateStatisticError(f"{s.statistic} is constant across replicates")
    return s.skewness, s.excess_kurtosis, (s.z_skew, s.z_kurt)


@dataclass
class CovarianceSummary:
    matrix: np.ndarray            # covariance of (Q_0, ..., Q_top) divided by n
    mean_over_n: np.ndarray
    kernel_residuals: dict        # max |a . Q_in - expected| over replicates
    kernel_quadratic_forms: dict  # a^T (matrix) a
    count_variance: float         # variance of sum_j Q_j across replicates
    eigenvalues: np.ndarray


def estimate_covariance(cfg: ExperimentConfig, workers: int = 1) -> CovarianceSummary:
    """Covariance of the indegree-count vector across replicates, scaled by 1/n."""
    if cfg.replicates < 200:
        raise ValueError("covariance estimates need at least 200 replicates")
    top = kappa_prime_bound(cfg.process.dim) * cfg.k
    rows = _indegree_rows(cfg, workers)
    q = np.array(rows, dtype=np.float64)
    cov = np.cov(q, rowvar=False, ddof=1) / cfg.n
    cov = (cov + cov.T) / 2
    j = np.arange(top + 1)
    kernels = {"k-minus-j": cfg.k - j}
    expected = {"k-minus-j": 0}
    if cfg.process.kind == "binomial":
        kernels["ones"] = np.ones(top + 1, dtype=np.int64)
        expected["ones"] = cfg.n
    qi = np.array(rows, dtype=np.int64)
    residuals = {name: int(np.max(np.abs(qi @ a - expected[name]))) for name, a in kernels.items()}
    forms = {name: float(a @ cov @ a) for name, a in kernels.items()}
    totals = qi.sum(axis=1).astype(np.float64)
    return CovarianceSummary(
        matrix=cov,
        mean_over_n=q.mean(axis=0) / cfg.n,
        kernel_residuals=residuals,
        kernel_quadratic_forms=forms,
        count_variance=float(np.var(totals, ddof=1)),
        eigenvalues=np.linalg.eigvalsh(cov),
    )


class _Histogram:
    label = "Qin"

    def evaluate(self, g, marks=None):
        return tuple(int(x) for x in indegree_histogram(g))


def _indegree_rows(cfg: ExperimentConfig, workers: int) -> list:
    table = run_replicates(cfg, [_Histogram()], workers)
    return [v[0] for v in table.values]


@dataclass
class DependenceReport:
    stat_a: str
    stat_b: str
    correlation: float
    ci95: tuple
    replicates: int


def dependence_probe(cfg: ExperimentConfig, stat_a, stat_b, workers: int = 1,
                     bootstrap: int = 1000) -> DependenceReport:
    """Sample correlation of two statistics with a percentile bootstrap CI.

    Reported only: zero correlation would not imply independence.
    """
    if cfg.replicates < 500:
        raise ValueError("dependence probes need at least 500 replicates")
    a, b = as_statistic(stat_a), as_statistic(stat_b)
    cfg.check_statistic(a)
    cfg.check_statistic(b)
    table = run_replicates(cfg, [a, b], workers)
    x = np.array([v[0] for v in table.values], dtype=np.float64)
    y = np.array([v[1] for v in table.values], dtype=np.float64)
    for s, v in ((a, x), (b, y)):
        if np.all(v == v[0]):
            raise DegenerateStatisticError(f"{s.label} is constant across replicates")
    rho = _corr(x, y)
    rng = stream(cfg.process.seed, BOOTSTRAP_STREAM)
    idx = rng.integers(0, len(x), size=(bootstrap, len(x)))
    boots = np.array([_corr(x[i], y[i]) for i in idx])
    boots = boots[np.isfinite(boots)]
    lo, hi = np.quantile(boots, [0.025, 0.975])
    return DependenceReport(a.label, b.label, rho, (float(lo), float(hi)), len(x))


def _corr(x: np.ndarray, y: np.ndarray) -> float:
    dx = x - x.mean()
    dy = y - y.mean()
    den = math.sqrt(float(dx @ dx) * float(dy @ dy))
    return float(dx @ dy) / den if den > 0 else float("nan")


@dataclass
class RegionComparison:
    a: ExperimentSummary
    b: ExperimentSummary
    overlap: bool


def region_invariance_check(cfg: ExperimentConfig, region_a: Region, region_b: Region,
                            workers: int = 1) -> RegionComparison:
    """Run the experiment on two windows and report whether the 95% CIs of mean/n overlap."""
    if region_a.dim != region_b.dim:
        raise ValueError("regions must have the same dimension")
    sa = run_experiment(replace(cfg, process=replace(cfg.process, region=region_a)), workers)
    sb = run_experiment(replace(cfg, process=replace(cfg.process, region=region_b)), workers)
    overlap = sa.ci95_mean[0] <= sb.ci95_mean[1] and sb.ci95_mean[0] <= sa.ci95_mean[1]
    return RegionComparison(sa, sb, overlap)
