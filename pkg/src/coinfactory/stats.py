"""Statistical machinery for the verification harness: Wilson intervals,
normal-approximation mean intervals, z gates, chi-square tests, and a small
least-squares slope fit.

The chi-square survival function is the regularized upper incomplete gamma
Q(df/2, x/2), computed by the usual series / continued-fraction split; unit
tests pin it against the closed forms at df = 1, 2, 4, 6.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Sequence, Tuple

_NORMAL = NormalDist()


def z_for_confidence(confidence: float) -> float:
    """Two-sided normal quantile: confidence 0.9999 -> z ~ 3.8906."""
    if not 0 < confidence < 1:
        raise ValueError("confidence must be in (0, 1)")
    return _NORMAL.inv_cdf(0.5 + confidence / 2)


def wilson_interval(successes: int, n: int, confidence: float = 0.9999) -> Tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return (0.0, 1.0)
    z = z_for_confidence(confidence)
    phat = successes / n
    denom = 1 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def mean_interval(mean: float, variance: float, n: int,
                  confidence: float = 0.9999) -> Tuple[float, float]:
    """Normal-approximation interval for a sample mean."""
    if n <= 1:
        return (mean, mean)
    z = z_for_confidence(confidence)
    half = z * math.sqrt(variance / n)
    return (mean - half, mean + half)


def two_proportion_z(x1: int, n1: int, x2: int, n2: int) -> float:
    """Pooled two-sample z statistic for H0: p1 = p2."""
    pooled = (x1 + x2) / (n1 + n2)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    if se == 0:
        return 0.0
    return (x1 / n1 - x2 / n2) / se


# -- incomplete gamma / chi-square ---------------------------------------------


def _gamma_p_series(a: float, x: float) -> float:
    """Lower regularized gamma P(a, x) by series; for x < a + 1."""
    term = 1.0 / a
    total = term
    k = a
    for _ in range(10000):
        k += 1
        term *= x / k
        total += term
        if abs(term) < abs(total) * 1e-16:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gamma_q_cf(a: float, x: float) -> float:
    """Upper regularized gamma Q(a, x) by Lentz continued fraction; x >= a + 1."""
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    h = d
    for i in range(1, 10000):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < 1e-16:
            break
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def gamma_q(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x)."""
    if x < 0 or a <= 0:
        raise ValueError("gamma_q needs a > 0, x >= 0")
    if x == 0:
        return 1.0
    if x < a + 1.0:
        return max(0.0, min(1.0, 1.0 - _gamma_p_series(a, x)))
    return max(0.0, min(1.0, _gamma_q_cf(a, x)))


def chi2_sf(x: float, df: int) -> float:
    """Survival function of the chi-square distribution."""
    if df <= 0:
        raise ValueError("df must be positive")
    return gamma_q(df / 2.0, x / 2.0)


@dataclass(frozen=True)
class ChiSquareResult:
    statistic: float
    df: int
    p_value: float

    def passed(self, significance: float) -> bool:
        return self.p_value >= significance


def chi2_goodness(observed: Sequence[int], expected: Sequence[float],
                  sample_size: int = None, min_expected: float = 5.0) -> ChiSquareResult:
    """Goodness-of-fit over pre-binned cells.

    When the cells do not cover the whole sample, pass sample_size and a
    complement cell is added.  Cells with expectation below min_expected pool
    together; df is cells - 1.
    """
    obs = [float(o) for o in observed]
    exp = [float(e) for e in expected]
    if sample_size is not None:
        rem_e = sample_size - sum(exp)
        if rem_e > 1e-9:
            obs.append(sample_size - sum(obs))
            exp.append(rem_e)
    cells = []
    o_pool = e_pool = 0.0
    for o, e in zip(obs, exp):
        if e < min_expected:
            o_pool += o
            e_pool += e
        else:
            cells.append((o, e))
    if e_pool > 0 and cells:
        o, e = cells[-1]
        cells[-1] = (o + o_pool, e + e_pool)
    elif e_pool > 0:
        cells.append((o_pool, e_pool))
    stat = sum((o - e) ** 2 / e for o, e in cells if e > 0)
    df = max(1, len(cells) - 1)
    return ChiSquareResult(stat, df, chi2_sf(stat, df))


def chi2_two_sample(hist1: Sequence[int], hist2: Sequence[int],
                    min_total: float = 10.0) -> ChiSquareResult:
    """Two-sample chi-square homogeneity test over matching bins.

    Sparse adjacent bins merge until their combined count reaches min_total;
    a trailing remainder merges into the last cell.
    """
    n1, n2 = sum(hist1), sum(hist2)
    if n1 == 0 or n2 == 0:
        raise ValueError("both samples must be non-empty")
    k1 = math.sqrt(n2 / n1)
    k2 = math.sqrt(n1 / n2)
    merged = []
    o1_pool = o2_pool = 0
    for o1, o2 in zip(hist1, hist2):
        o1_pool += o1
        o2_pool += o2
        if o1_pool + o2_pool >= min_total:
            merged.append((o1_pool, o2_pool))
            o1_pool = o2_pool = 0
    if (o1_pool or o2_pool) and merged:
        a, b = merged[-1]
        merged[-1] = (a + o1_pool, b + o2_pool)
    stat = sum((k1 * o1 - k2 * o2) ** 2 / (o1 + o2) for o1, o2 in merged if o1 + o2 > 0)
    df = max(1, len(merged) - 1)
    return ChiSquareResult(stat, df, chi2_sf(stat, df))


def fit_loglog_slope(xs: Sequence[float], ys: Sequence[float]) -> Tuple[float, float]:
    """(slope, intercept) of least squares on (log2 x, log2 y)."""
    lx = [math.log2(x) for x in xs]
    ly = [math.log2(y) for y in ys]
    n = len(lx)
    mx = sum(lx) / n
    my = sum(ly) / n
    sxx = sum((a - mx) ** 2 for a in lx)
    sxy = sum((a - mx) * (b - my) for a, b in zip(lx, ly))
    slope = sxy / sxx
    return slope, my - slope * mx


@dataclass(frozen=True)
class GateResult:
    """One statistical gate: |observed - target| vs sigmas * se + slack."""

    name: str
    observed: float
    target: float
    se: float
    sigmas: float
    slack: float = 0.0

    @property
    def z(self) -> float:
        if self.se == 0:
            return 0.0 if abs(self.observed - self.target) <= self.slack else math.inf
        return (self.observed - self.target) / self.se

    @property
    def passed(self) -> bool:
        return abs(self.observed - self.target) <= self.sigmas * self.se + self.slack

    def describe(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: observed {self.observed:.6g} vs {self.target:.6g} "
                f"(z = {self.z:+.2f}, gate {self.sigmas:g} sigma)")
