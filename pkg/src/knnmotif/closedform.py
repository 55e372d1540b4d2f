"""Closed-form and tabulated limit constants for kNN digraph counts.

Includes the mutual-neighbor fraction ``omega(d)``, the reflexive-pair
limits ``r(d, k)``, the one-dimensional shared-neighbor limit ``q(1, k)``,
high-dimensional limits, kissing-number bounds and a catalog of constants
known from the literature. ``estimate_b2`` approximates the two-point
integral behind ``q(d, 1) = b_2(d) / 2`` by importance sampling.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.special import betainc

from .errors import UnknownBoundError
from .geometry import ball_volume
from .rng import stream

# d -> (kappa lower, kappa upper, kappa' bound or None)
KISSING = {
    1: (2, 2, 2),
    2: (6, 6, 5),
    3: (12, 12, 12),
    4: (24, 24, None),
    5: (40, 44, None),
    6: (72, 78, None),
    7: (126, 134, None),
    8: (240, 240, None),
    24: (196560, 196560, None),
}


def kappa_prime_bound(d: int) -> int:
    """Upper bound on kappa'(d), the factor in ``max indegree <= kappa'(d) k``.

    Exact kappa' where known (d = 1, 2, 3), otherwise the exact kissing
    number kappa(d) >= kappa'(d) (d = 4, 8). Other dimensions are refused.
    """
    if d in (1, 2, 3, 4, 8):
        lo, hi, kp = KISSING[d]
        return kp if kp is not None else hi
    raise UnknownBoundError(f"no exact kissing-number bound is known for d={d}")


def kissing_table() -> list[dict]:
    rows = []
    for d, (lo, hi, kp) in KISSING.items():
        rows.append({
            "d": d,
            "kappa_lo": lo,
            "kappa_hi": hi,
            "kappa_prime": kp,
            "kappa_prime_bound": kappa_prime_bound(d) if d in (1, 2, 3, 4, 8) else None,
            "provenance": "exact" if lo == hi else "interval",
        })
    return rows


def _omega_odd(d: int) -> Fraction:
    m = (d - 1) // 2
    total = Fraction(3, 2)
    ratio = Fraction(1)
    for i in range(1, m + 1):
        ratio *= Fraction(2 * i - 1, 2 * i)
        total += Fraction(1, 2) * ratio * Fraction(3, 4) ** i
    return 1 / total


def _omega_even(d: int) -> float:
    m = d // 2
    inner = Fraction(1)
    ratio = Fraction(1)
    for i in range(1, m):
        ratio *= Fraction(2 * i, 2 * i + 1)
        inner += ratio * Fraction(3, 4) ** i
    return 1.0 / (4.0 / 3.0 + math.sqrt(3.0) / (2.0 * math.pi) * float(inner))


def omega(d: int, exact: bool = False):
    """Volume of a unit ball over the volume of the union of two unit balls
    at center distance 1.

    Rational for odd ``d``; ``exact=True`` returns a :class:`Fraction` there.
    """
    if d < 1:
        raise ValueError("d must be a positive integer")
    if d % 2:
        w = _omega_odd(d)
        return w if exact else float(w)
    if exact:
        raise ValueError("omega(d) is irrational for even d")
    return _omega_even(d)


def _pair_coefficient(s: int, t: int, i: int) -> int:
    return math.factorial(s + t - i - 2) // (
        math.factorial(i) * math.factorial(s - i - 1) * math.factorial(t - i - 1))


def r_pair(d: int, s: int, t: int, exact: bool = False):
    """Limit density of pairs that are each other's s-th and t-th neighbors."""
    if s < 1 or t < 1:
        raise ValueError("s and t must be positive")
    w = omega(d, exact=exact)
    one = Fraction(1) if exact else 1.0
    a = 2 * w - one
    b = one - w
    total = 0 * one
    for i in range(min(s, t)):
        total += _pair_coefficient(s, t, i) * a**i * b ** (s + t - 2 * i - 2)
    return w / 2 * total


def r_limit(d: int, k: int, exact: bool = False):
    """Limit of R/n: expected reflexive kNN pairs per point."""
    if k < 1:
        raise ValueError("k must be positive")
    return sum((r_pair(d, s, t, exact=exact) for s in range(1, k + 1) for t in range(1, k + 1)),
               Fraction(0) if exact else 0.0)


def q_limit_d1(k: int) -> float:
    """Limit of Q/n in one dimension: k^2/2 - k/4."""
    if k < 1:
        raise ValueError("k must be positive")
    return k * k / 2 - k / 4


def q_limit_highdim(k: int) -> float:
    """Limit of q(d, k) as d grows: k^2/2."""
    if k < 1:
        raise ValueError("k must be positive")
    return k * k / 2


def qj_limit_highdim(j: int, k: int) -> float:
    """Limit of q_j(d, k) as d grows: the Poisson(k) mass at j."""
    if j < 0 or k < 1:
        raise ValueError("need j >= 0 and k >= 1")
    return math.exp(j * math.log(k) - k - math.lgamma(j + 1))


@dataclass(frozen=True)
class KnownConstant:
    name: str
    d: int
    k: int
    value: float
    provenance: str  # "exact" or "approx"
    j: int | None = None
    source: str = ""


_CE_Q2 = {1: 0.3166, 2: 1.58685, 3: 3.84845, 4: 7.1079, 5: 11.3667}
_SCHILLING_Q = {(2, 1): 0.315, (2, 2): 1.575, (2, 3): 3.82,
                (3, 1): 0.355, (3, 2): 1.645, (3, 3): 3.93}
_CE_QJ_21 = [0.284, 0.463, 0.221, 3.04e-2, 6.58e-4, 1.90e-7]


def known_constants(d: int, k: int) -> list[KnownConstant]:
    """All limit constants available for ``(d, k)`` with their provenance."""
    out: list[KnownConstant] = []
    ex = "exact"
    if d == 1:
        out.append(KnownConstant("q", 1, k, q_limit_d1(k), ex, source="Schilling"))
    if (d, k) == (1, 1):
        for j, v in enumerate((Fraction(1, 4), Fraction(1, 2), Fraction(1, 4))):
            out.append(KnownConstant("q_j", 1, 1, float(v), ex, j=j))
        for j, v in enumerate((Fraction(19, 240), Fraction(19, 60), Fraction(19, 240))):
            out.append(KnownConstant("tau2_j", 1, 1, float(v), ex, j=j))
        for j, v in enumerate((Fraction(17, 120), Fraction(17, 30), Fraction(17, 120))):
            out.append(KnownConstant("sigma2_j", 1, 1, float(v), ex, j=j))
        out.append(KnownConstant("tau2_Q", 1, 1, 19 / 240, ex))
        out.append(KnownConstant("sigma2_Q", 1, 1, 17 / 120, ex))
        out.append(KnownConstant("tau2_R", 1, 1, 2 / 45, ex))
        out.append(KnownConstant("sigma2_R", 1, 1, 7 / 45, ex))
    if d == 2 and k in _CE_Q2:
        out.append(KnownConstant("q", 2, k, _CE_Q2[k], "approx", source="Cuzick-Edwards"))
    if (d, k) in _SCHILLING_Q:
        out.append(KnownConstant("q", d, k, _SCHILLING_Q[(d, k)], "approx", source="Schilling"))
    if (d, k) == (2, 1):
        for j, v in enumerate(_CE_QJ_21):
            out.append(KnownConstant("q_j", 2, 1, v, "approx", j=j, source="Cuzick-Edwards"))
    out.append(KnownConstant("r", d, k, float(r_limit(d, k)), ex, source="closed form"))
    return out


def _cap_volume(d: int, r, h):
    """Volume of the cap of height ``h`` (0 <= h <= r) cut from a ball of radius ``r``."""
    x = np.clip((2 * r * h - h * h) / (r * r), 0.0, 1.0)
    return 0.5 * ball_volume(d) * r**d * betainc((d + 1) / 2, 0.5, x)


def union_volume_two_balls(d: int, r1, r2, dist):
    """Volume of the union of two d-balls with radii r1, r2 and center distance ``dist``.

    Vectorized over array arguments.
    """
    r1, r2, dist = np.broadcast_arrays(*(np.asarray(a, dtype=np.float64) for a in (r1, r2, dist)))
    v1 = ball_volume(d) * r1**d
    v2 = ball_volume(d) * r2**d
    lens = np.zeros_like(dist)
    small = np.minimum(r1, r2)
    contained = dist <= np.abs(r1 - r2)
    lens[contained] = ball_volume(d) * small[contained] ** d
    partial = (~contained) & (dist < r1 + r2)
    if np.any(partial):
        a1 = (dist[partial] ** 2 + r1[partial] ** 2 - r2[partial] ** 2) / (2 * dist[partial])
        h1 = r1[partial] - a1
        h2 = r2[partial] - (dist[partial] - a1)
        lens[partial] = _cap_vol_any(d, r1[partial], h1) + _cap_vol_any(d, r2[partial], h2)
    return v1 + v2 - lens


def _cap_vol_any(d, r, h):
    # caps taller than the radius are a full ball minus the complementary cap
    big = h > r
    out = np.empty_like(h)
    out[~big] = _cap_volume(d, r[~big], h[~big])
    out[big] = ball_volume(d) * r[big] ** d - _cap_volume(d, r[big], 2 * r[big] - h[big])
    return out


def union_volume_hit_or_miss(d: int, c1, r1: float, c2, r2: float, samples: int, rng) -> float:
    """Hit-or-miss estimate of the union volume of two balls (cross-check)."""
    c1 = np.asarray(c1, dtype=np.float64)
    c2 = np.asarray(c2, dtype=np.float64)
    lo = np.minimum(c1 - r1, c2 - r2)
    hi = np.maximum(c1 + r1, c2 + r2)
    x = lo + (hi - lo) * rng.random((samples, d))
    hit = (np.sum((x - c1) ** 2, axis=1) < r1 * r1) | (np.sum((x - c2) ** 2, axis=1) < r2 * r2)
    return float(np.prod(hi - lo) * hit.mean())


def _unit_directions(d: int, m: int, rng) -> np.ndarray:
    if d == 1:
        return np.where(rng.random((m, 1)) < 0.5, -1.0, 1.0)
    g = rng.standard_normal((m, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


@dataclass(frozen=True)
class B2Estimate:
    value: float
    stderr: float
    samples: int
    truncation: float  # mass of the integration domain left out (none here)


_B2_RATE = 0.5
_B2_BLOCK = 1 << 16


def b2_monte_carlo(d: int, samples: int = 10**6, seed: int = 0) -> B2Estimate:
    """Importance-sampling estimate of b_2(d) with its standard error.

    Each point x_i is drawn with ball volume t_i = V_d |x_i|^d ~ Exp(1/2)
    and a uniform direction; in those coordinates Lebesgue measure is
    dt x (uniform direction), so the weight is the integrand over the
    exponential density. The union of the two balls has volume at least
    (t_1 + t_2) / 2, so every weight is at most 4 and no radial truncation
    is needed. Union volumes are computed exactly from the lens formula.
    """
    if d not in (1, 2, 3):
        raise ValueError("b_2 estimation is supported for d in {1, 2, 3}")
    if samples < 10**4:
        raise ValueError("use at least 10^4 samples")
    vd = ball_volume(d)
    c = _B2_RATE
    total = 0.0
    total_sq = 0.0
    done = 0
    block_id = 0
    while done < samples:
        m = min(_B2_BLOCK, samples - done)
        rng = stream(seed, block_id)
        t = rng.exponential(1 / c, size=(m, 2))
        r = (t / vd) ** (1.0 / d)
        x1 = r[:, :1] * _unit_directions(d, m, rng)
        x2 = r[:, 1:] * _unit_directions(d, m, rng)
        dist = np.linalg.norm(x1 - x2, axis=1)
        inside = (r[:, 0] < dist) & (r[:, 1] < dist)
        w = np.zeros(m)
        if np.any(inside):
            u = union_volume_two_balls(d, r[inside, 0], r[inside, 1], dist[inside])
            w[inside] = np.exp(-u + c * (t[inside, 0] + t[inside, 1])) / (c * c)
        total += math.fsum(w)
        total_sq += math.fsum(w * w)
        done += m
        block_id += 1
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return B2Estimate(mean, math.sqrt(var / samples), samples, 0.0)


def estimate_b2(d: int, samples: int = 10**6, seed: int = 0) -> float:
    """Monte Carlo estimate of b_2(d); ``estimate_b2(d) / 2`` approximates q(d, 1)."""
    return b2_monte_carlo(d, samples, seed).value
