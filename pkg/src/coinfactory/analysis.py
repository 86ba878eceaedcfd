"""Ground-truth evaluation: f, f', expected input counts, and the sequential
Cramér-Rao lower bound.

Everything is computed from interval enclosures with explicit truncation-tail
bounds, so every result carries a guaranteed error_bound:

    f(p)  = 1 - sum c_k q^k,          q = 1 - p,
    f'(p) =     sum k c_k q^(k-1),

with tails controlled by sum_{k>K} c_k q^k <= (1 - S_K) q^(K+1) and, for the
derivative, sum_{k>K} k c_k q^(k-1) <= (1 - S_K) (K+1) q^K valid once
K >= (1-p)/p (the factor k q^(k-1) is decreasing from there on, so the largest
term bounds them all).

Cost formulas: the sequential-stop sampler uses E[N] = f(p)/p inputs; the
non-randomized variant uses E[N] = (f(p)/p) (1 + 2/(p(1-p))).  Any fast
sampler of f obeys E[N] >= (f'(p))^2 p(1-p) / (f(p)(1-f(p))), the sequential
Cramér-Rao bound.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import CoinFactoryError, ParameterError
from .intervals import DyadicInterval
from .series import CoefficientSeries, as_fraction

EVAL_PREC = 160
DEFAULT_TOL = 1e-12
DEFAULT_MAX_TERMS = 1 << 17


@dataclass(frozen=True)
class EvalResult:
    """value with |true - value| <= error_bound, and the truncation depth used."""

    value: float
    error_bound: float
    terms_used: int

    def scaled(self, factor: float) -> "EvalResult":
        value = self.value * factor
        # the extra term covers the float rounding of this very multiplication
        err = self.error_bound * abs(factor) * (1 + 1e-12) + 1e-15 * (1 + abs(value))
        return EvalResult(value, err, self.terms_used)


def _check_p(p) -> Fraction:
    p = as_fraction(p)
    if not 0 < p < 1:
        raise ParameterError("p must satisfy 0 < p < 1")
    return p


def _series_sum(series: CoefficientSeries, p: Fraction, tol: float, max_terms: int,
                derivative: bool):
    """Enclosure of sum c_k q^k (or sum k c_k q^(k-1)) with tail <= tol."""
    q = 1 - p
    prec = EVAL_PREC
    one = DyadicInterval.exact_int(1, prec)
    total = DyadicInterval.exact_int(0, prec)
    csum = DyadicInterval.exact_int(0, prec)
    qpow = one if derivative else DyadicInterval.from_fraction(q, prec)  # q^(k-1) or q^k
    k_floor = (1 - p) / p  # tail bound for the derivative needs K >= this
    k = 0
    limit = series.known_limit
    top = min(x for x in (max_terms, limit, series.support_end) if x is not None) \
        if (limit is not None or series.support_end is not None) else max_terms
    while True:
        k += 1
        c = series.coefficient_interval_at(k, prec)
        term = c * qpow if not derivative else c.mul_fraction(Fraction(k)) * qpow
        total = total + term
        csum = csum + c
        qpow = qpow.mul_fraction(q)
        done = series.support_end is not None and k >= series.support_end
        if done or k % 32 == 0 or k >= top:
            if done:
                tail = Fraction(0)
            else:
                rem = one - csum  # >= sum of remaining coefficients
                rem_up = max(rem.upper_fraction(), Fraction(0))
                if derivative:
                    if k < k_floor:
                        tail = None
                    else:
                        # qpow is now q^k; largest remaining factor is (k+1) q^k
                        tail = rem_up * (k + 1) * qpow.upper_fraction()
                else:
                    # qpow is now q^(k+1)
                    tail = rem_up * qpow.upper_fraction()
            if tail is not None:
                err = float(tail) + total.rad_float()
                if err <= tol or done:
                    return total, err, k
        if k >= top:
            raise CoinFactoryError(
                f"tolerance {tol} unachievable within {k} terms of {series.kind}"
            )


def eval_f(series: CoefficientSeries, p, tol: float = DEFAULT_TOL,
           max_terms: int = DEFAULT_MAX_TERMS) -> EvalResult:
    """f(p) = 1 - sum c_k (1-p)^k to within tol."""
    p = _check_p(p)
    total, err, k = _series_sum(series, p, tol, max_terms, derivative=False)
    value = 1.0 - total.mid_float()
    return EvalResult(value, err + 4e-16 * (1 + abs(value)), k)


def eval_f_prime(series: CoefficientSeries, p, tol: float = DEFAULT_TOL,
                 max_terms: int = DEFAULT_MAX_TERMS) -> EvalResult:
    """f'(p) = sum k c_k (1-p)^(k-1) to within tol."""
    p = _check_p(p)
    total, err, k = _series_sum(series, p, tol, max_terms, derivative=True)
    value = total.mid_float()
    return EvalResult(value, err + 4e-16 * (1 + abs(value)), k)


def expected_inputs_alg1(series: CoefficientSeries, p, tol: float = DEFAULT_TOL) -> EvalResult:
    """Mean input count of the sequential-stop sampler: f(p)/p."""
    p = _check_p(p)
    return eval_f(series, p, tol=tol).scaled(1.0 / float(p))


def expected_inputs_alg2(series: CoefficientSeries, p, tol: float = DEFAULT_TOL) -> EvalResult:
    """Mean input count of the non-randomized sampler: (f/p)(1 + 2/(p(1-p)))."""
    p = _check_p(p)
    factor = (1 + 2 / (p * (1 - p))) / p
    return eval_f(series, p, tol=tol).scaled(float(factor))


def cramer_rao_bound(series: CoefficientSeries, p, tol: float = DEFAULT_TOL) -> EvalResult:
    """Lower bound (f')^2 p(1-p) / (f (1-f)) on E[N] for any fast sampler of f."""
    p = _check_p(p)
    f = eval_f(series, p, tol=tol)
    fp = eval_f_prime(series, p, tol=tol)
    f_lo, f_hi = f.value - f.error_bound, f.value + f.error_bound
    if f_lo <= 0 or f_hi >= 1:
        raise CoinFactoryError("f(p) enclosure touches {0, 1}; bound undefined")
    d_lo = f_lo * (1 - f_lo)
    d_hi = f_hi * (1 - f_hi)
    den_min = min(d_lo, d_hi)
    den_max = 0.25 if f_lo <= 0.5 <= f_hi else max(d_lo, d_hi)
    g_lo = max(fp.value - fp.error_bound, 0.0)
    g_hi = fp.value + fp.error_bound
    w = float(p * (1 - p))
    lo = g_lo * g_lo * w / den_max
    hi = g_hi * g_hi * w / den_min
    return EvalResult((lo + hi) / 2, (hi - lo) / 2 + 1e-300, max(f.terms_used, fp.terms_used))
