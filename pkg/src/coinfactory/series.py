"""Coefficient sequences c_k defining target functions f(p) = 1 - sum c_k (1-p)^k.

A series is valid when every c_k >= 0 and sum c_k = 1; the stop probabilities

    d_k = c_k / (1 - sum_{j<k} c_j)

drive both sampling algorithms.  The catalog hosts the built-in functions:

    power(a)      f(p) = p^a, 0 < a < 1          c_k = a (1-a)(2-a)...(k-1-a) / k!
    sqrt          f(p) = sqrt(p)                 c_k = C(2k-2, k-1) / (2^(2k-1) k)
    mobius_sqrt   f(p) = 2 sqrt(p)/(1+sqrt(p))   c_k = 2 * sqrt-series c_{k+1}
    log2_sqrt     f(p) = log2(1+sqrt(p))         c_k = C(2k, k) / (2^(2k+1) k ln 2)
    exp_sqrt      f(p) = (1-e^-sqrt(p))/(1-1/e)  c_k = y_{k-1}(1) / ((e-1) 2^k k!)
    entropy       f(p) = p (1 - log p)           c_1 = 0, c_k = 1/(k(k-1))
    finite(list)  polynomial in (1-p)            explicit list, must sum to 1

where y_j are the Bessel polynomial values y_{-1}(1) = y_0(1) = 1,
y_j(1) = (2j-1) y_{j-1}(1) + y_{j-2}(1).

Coefficients are exact rationals wherever the entry permits; log2_sqrt and
exp_sqrt carry an irrational scale factor and expose rigorous interval
enclosures instead (exactness flag ``exact = False``).  All series additionally
provide an interval *stream* (O(1) ratio recurrences per index) used by the
series evaluator, so deep truncations never touch huge exact rationals.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from typing import Iterator, List, Optional

from .bits import FractionBits, IntervalBits
from .errors import (
    InconsistentSeriesError,
    ParameterError,
    TableDepthError,
)
from .intervals import (
    DyadicInterval,
    e_interval,
    inv_e_minus_1_interval,
    inv_ln2_interval,
    ln2_interval,
)

ZERO = Fraction(0)
ONE = Fraction(1)


def as_fraction(x) -> Fraction:
    """Coerce int/str/float/Fraction to an exact Fraction.

    Strings accept both "1/3" and decimal "0.3" (read as the exact decimal).
    Floats are taken at their exact binary value.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, float):
        return Fraction(x)
    raise ParameterError(f"cannot interpret {x!r} as a rational number")


class CoefficientSeries:
    """Base class; see module docstring for the contract.

    support_end: index of the last non-zero coefficient when the series is a
        polynomial in (1-p) (partial sums reach exactly 1 there); None otherwise.
    known_limit: largest index at which coefficients are computable (composition
        truncation); None when unbounded.
    """

    kind: str = "?"
    exact: bool = True
    support_end: Optional[int] = None
    known_limit: Optional[int] = None

    def __init__(self):
        # reentrant: computing one memo entry may recurse into another on self
        self._lock = threading.RLock()
        self._coeffs: List[Fraction] = []        # exact memo, index k-1
        self._sums: List[Fraction] = []          # exact partial sums memo
        self._iv_cache: dict = {}                # prec -> (coeff ivs, cumsum ivs)

    # -- exact rational path ------------------------------------------------

    def _compute_coefficient(self, k: int) -> Fraction:
        raise NotImplementedError

    def _check_index(self, k: int):
        if k < 1:
            raise ParameterError("coefficient index must be a positive integer")
        if self.known_limit is not None and k > self.known_limit:
            raise TableDepthError(
                f"{self.kind}: coefficient index {k} exceeds the computable "
                f"limit {self.known_limit}"
            )

    def coefficient_at(self, k: int) -> Fraction:
        """Exact c_k; only available when ``exact`` is True."""
        self._check_index(k)
        if not self.exact:
            raise ParameterError(
                f"{self.kind}: coefficients are tracked-precision, "
                "use coefficient_interval_at"
            )
        if k <= len(self._coeffs):
            return self._coeffs[k - 1]
        with self._lock:
            while len(self._coeffs) < k:
                c = self._compute_coefficient(len(self._coeffs) + 1)
                if c < 0:
                    raise InconsistentSeriesError(f"{self.kind}: negative coefficient")
                self._coeffs.append(c)
                prev = self._sums[-1] if self._sums else ZERO
                s = prev + c
                if s > 1:
                    raise InconsistentSeriesError(f"{self.kind}: partial sums exceed 1")
                self._sums.append(s)
        return self._coeffs[k - 1]

    def partial_sum_at(self, K: int) -> Fraction:
        """Exact sum of c_1..c_K."""
        if K == 0:
            return ZERO
        self.coefficient_at(K)
        return self._sums[K - 1]

    # -- rigorous enclosure path ---------------------------------------------

    def _interval_stream(self, prec: int) -> Iterator[DyadicInterval]:
        """Successive enclosures of c_1, c_2, ...; override with a recurrence."""
        k = 1
        while True:
            yield DyadicInterval.from_fraction(self.coefficient_at(k), prec)
            k += 1

    def _iv_lists(self, prec: int, k: int):
        with self._lock:
            entry = self._iv_cache.get(prec)
            if entry is None:
                entry = ([], [], self._interval_stream(prec))
                self._iv_cache[prec] = entry
            coeffs, sums, stream = entry
            while len(coeffs) < k:
                self._check_index(len(coeffs) + 1)
                iv = next(stream)
                coeffs.append(iv)
                sums.append(sums[-1] + iv if sums else iv)
            return coeffs, sums

    def coefficient_interval_at(self, k: int, prec: int) -> DyadicInterval:
        self._check_index(k)
        coeffs, _ = self._iv_lists(prec, k)
        return coeffs[k - 1]

    def partial_sum_interval_at(self, K: int, prec: int) -> DyadicInterval:
        if K == 0:
            return DyadicInterval.exact_int(0, prec)
        _, sums = self._iv_lists(prec, K)
        return sums[K - 1]

    # -- stop probabilities ----------------------------------------------------

    def stop_probability_closed_form(self, k: int) -> Optional[Fraction]:
        """Closed-form d_k where one is known; validated against the generic rule."""
        return None

    def stop_interval_closed(self, k: int, prec: int) -> Optional[DyadicInterval]:
        """Tighter interval route for d_k on tracked entries, if available."""
        return None

    def __repr__(self):
        return f"<series {self.kind}>"


# ---------------------------------------------------------------------------
# catalog entries: exact rational coefficients
# ---------------------------------------------------------------------------


class PowerCoefficients(CoefficientSeries):
    """f(p) = p^a for rational a in (0, 1)."""

    def __init__(self, a):
        super().__init__()
        a = as_fraction(a)
        if not 0 < a < 1:
            raise ParameterError("power exponent must satisfy 0 < a < 1")
        self.a = a
        self.kind = f"power(a={a})"

    def _compute_coefficient(self, k: int) -> Fraction:
        if k == 1:
            return self.a
        # ratio c_k / c_{k-1} = (k - 1 - a) / k
        return self._coeffs[k - 2] * (k - 1 - self.a) / k

    def _interval_stream(self, prec: int):
        c = DyadicInterval.from_fraction(self.a, prec)
        k = 1
        while True:
            yield c
            k += 1
            c = c.mul_fraction(Fraction(k - 1, 1) - self.a).mul_fraction(Fraction(1, k))

    def stop_probability_closed_form(self, k: int) -> Fraction:
        return self.a / k


class SqrtCoefficients(CoefficientSeries):
    """f(p) = sqrt(p), coefficients from the central binomial formula.

    Deliberately not an alias of power(1/2): the two formulas are independent
    and are cross-checked against each other in the test suite.
    """

    kind = "sqrt"

    def _compute_coefficient(self, k: int) -> Fraction:
        return Fraction(math.comb(2 * k - 2, k - 1), (1 << (2 * k - 1)) * k)

    def _interval_stream(self, prec: int):
        c = DyadicInterval.from_fraction(Fraction(1, 2), prec)
        k = 1
        while True:
            yield c
            k += 1
            c = c.mul_fraction(Fraction(2 * k - 3, 2 * k))

    def stop_probability_closed_form(self, k: int) -> Fraction:
        return Fraction(1, 2 * k)


class MobiusSqrtCoefficients(CoefficientSeries):
    """f(p) = 2 sqrt(p) / (1 + sqrt(p)): twice the shifted sqrt coefficients."""

    kind = "mobius_sqrt"

    def _compute_coefficient(self, k: int) -> Fraction:
        return 2 * Fraction(math.comb(2 * k, k), (1 << (2 * k + 1)) * (k + 1))

    def _interval_stream(self, prec: int):
        c = DyadicInterval.from_fraction(Fraction(1, 4), prec)
        k = 1
        while True:
            yield c
            k += 1
            c = c.mul_fraction(Fraction(2 * k - 1, 2 * (k + 1)))

    def stop_probability_closed_form(self, k: int) -> Fraction:
        return Fraction(1, 2 * (k + 1))


class EntropyCoefficients(CoefficientSeries):
    """f(p) = p (1 - log p): c_1 = 0 and c_k = 1/(k(k-1)) for k >= 2."""

    kind = "entropy"

    def _compute_coefficient(self, k: int) -> Fraction:
        if k == 1:
            return ZERO
        return Fraction(1, k * (k - 1))

    def _interval_stream(self, prec: int):
        k = 1
        while True:
            if k == 1:
                yield DyadicInterval.exact_int(0, prec)
            else:
                yield DyadicInterval.from_fraction(Fraction(1, k * (k - 1)), prec)
            k += 1

    def stop_probability_closed_form(self, k: int) -> Fraction:
        # tails telescope: sum_{j>=k} 1/(j(j-1)) = 1/(k-1)
        if k == 1:
            return ZERO
        return Fraction(1, k)


class FiniteCoefficients(CoefficientSeries):
    """Explicit finite list; must be non-negative and sum to exactly 1.

    Lists summing below 1 are rejected here: scaling is the factory's scale
    transform and is never applied silently.
    """

    def __init__(self, values):
        super().__init__()
        vals = [as_fraction(v) for v in values]
        if not vals:
            raise ParameterError("finite series needs at least one coefficient")
        if any(v < 0 for v in vals):
            raise ParameterError("finite series coefficients must be non-negative")
        total = sum(vals, ZERO)
        if total > 1:
            raise ParameterError("finite series coefficients sum above 1")
        if total < 1:
            raise ParameterError(
                "finite series coefficients sum below 1; normalize the list and "
                "apply the scale transform instead"
            )
        while vals and vals[-1] == 0:
            vals.pop()
        if not vals:
            raise ParameterError("finite series must have a positive coefficient")
        self.values = vals
        self.support_end = len(vals)
        self.kind = f"finite[{len(vals)}]"

    def _compute_coefficient(self, k: int) -> Fraction:
        return self.values[k - 1] if k <= len(self.values) else ZERO


# ---------------------------------------------------------------------------
# catalog entries: tracked precision (irrational scale factor)
# ---------------------------------------------------------------------------


class _TrackedScaled(CoefficientSeries):
    """c_k = q_k * kappa with q_k exact rational and kappa a known constant.

    Subclasses provide the rational parts and enclosures of kappa and 1/kappa.
    The d_k have the tight closed route q_k / (1/kappa - sum_{j<k} q_j).
    """

    exact = False

    def __init__(self):
        super().__init__()
        self._q: List[Fraction] = []
        self._qsums: List[Fraction] = []

    def _compute_q(self, k: int) -> Fraction:
        raise NotImplementedError

    def _kappa_interval(self, prec: int) -> DyadicInterval:
        raise NotImplementedError

    def _inv_kappa_interval(self, prec: int) -> DyadicInterval:
        raise NotImplementedError

    def rational_part(self, k: int) -> Fraction:
        if k < 1:
            raise ParameterError("coefficient index must be a positive integer")
        with self._lock:
            while len(self._q) < k:
                q = self._compute_q(len(self._q) + 1)
                self._q.append(q)
                self._qsums.append((self._qsums[-1] if self._qsums else ZERO) + q)
        return self._q[k - 1]

    def rational_partial_sum(self, K: int) -> Fraction:
        if K == 0:
            return ZERO
        self.rational_part(K)
        return self._qsums[K - 1]

    def stop_interval_closed(self, k: int, prec: int) -> DyadicInterval:
        # exact rational parts; meant for the moderate depths the digit oracle
        # and threshold tables need, deep evaluation goes through the streams
        g = prec + 16
        den = self._inv_kappa_interval(g) - DyadicInterval.from_fraction(
            self.rational_partial_sum(k - 1), g
        )
        num = DyadicInterval.from_fraction(self.rational_part(k), g)
        return num.divide(den).rescale(prec)


class Log2SqrtCoefficients(_TrackedScaled):
    """f(p) = log2(1 + sqrt(p)); kappa = 1/ln 2."""

    kind = "log2_sqrt"

    def _compute_q(self, k: int) -> Fraction:
        return Fraction(math.comb(2 * k, k), (1 << (2 * k + 1)) * k)

    def _kappa_interval(self, prec: int) -> DyadicInterval:
        return inv_ln2_interval(prec)

    def _inv_kappa_interval(self, prec: int) -> DyadicInterval:
        return ln2_interval(prec)

    def _interval_stream(self, prec: int):
        c = self._kappa_interval(prec + 16).mul_fraction(Fraction(1, 4)).rescale(prec)
        k = 1
        while True:
            yield c
            k += 1
            # q ratio: q_k / q_{k-1} = (k-1)(2k-1) / (2 k^2)
            c = c.mul_fraction(Fraction((k - 1) * (2 * k - 1), 2 * k * k))


class ExpSqrtCoefficients(_TrackedScaled):
    """f(p) = (1 - e^{-sqrt p}) / (1 - e^{-1}); kappa = 1/(e-1)."""

    kind = "exp_sqrt"

    def __init__(self):
        super().__init__()
        self._bessel = [1, 1]  # y_{-1}(1), y_0(1)

    def bessel_value(self, j: int) -> int:
        """y_j(1) for j >= -1."""
        with self._lock:
            while len(self._bessel) < j + 2:
                m = len(self._bessel) - 1  # next j to fill
                self._bessel.append((2 * m - 1) * self._bessel[-1] + self._bessel[-2])
        return self._bessel[j + 1]

    def _compute_q(self, k: int) -> Fraction:
        return Fraction(self.bessel_value(k - 1), (1 << k) * math.factorial(k))

    def _kappa_interval(self, prec: int) -> DyadicInterval:
        return inv_e_minus_1_interval(prec)

    def _inv_kappa_interval(self, prec: int) -> DyadicInterval:
        return e_interval(prec) - DyadicInterval.exact_int(1, prec)

    def _interval_stream(self, prec: int):
        g = prec + 16
        c = self._kappa_interval(g).mul_fraction(Fraction(1, 2)).rescale(prec)
        t = DyadicInterval.exact_int(2, g)  # t_1 = y_1/y_0 = 2
        k = 1
        while True:
            yield c
            # c_{k+1} = c_k * t_k / (2 (k+1)),  t_{k+1} = (2k+1) + 1/t_k
            c = (c.rescale(g) * t).mul_fraction(Fraction(1, 2 * (k + 1))).rescale(prec)
            t = DyadicInterval.exact_int(2 * k + 1, g) + t.reciprocal().rescale(g)
            k += 1


# ---------------------------------------------------------------------------
# combinators
# ---------------------------------------------------------------------------


def _limit_min(*limits):
    vals = [l for l in limits if l is not None]
    return min(vals) if vals else None


class ConvexCombination(CoefficientSeries):
    """alpha * c1 + (1 - alpha) * c2, alpha strictly inside (0, 1)."""

    def __init__(self, c1: CoefficientSeries, c2: CoefficientSeries, alpha):
        super().__init__()
        alpha = as_fraction(alpha)
        if not 0 < alpha < 1:
            raise ParameterError("convex combination weight must satisfy 0 < alpha < 1")
        self.c1, self.c2, self.alpha = c1, c2, alpha
        self.exact = c1.exact and c2.exact
        if c1.support_end is not None and c2.support_end is not None:
            self.support_end = max(c1.support_end, c2.support_end)
        self.known_limit = _limit_min(c1.known_limit, c2.known_limit)
        self.kind = f"convex({c1.kind},{c2.kind},{alpha})"

    def _compute_coefficient(self, k: int) -> Fraction:
        return self.alpha * self.c1.coefficient_at(k) + (1 - self.alpha) * self.c2.coefficient_at(k)

    def _interval_stream(self, prec: int):
        k = 1
        while True:
            a = self.c1.coefficient_interval_at(k, prec).mul_fraction(self.alpha)
            b = self.c2.coefficient_interval_at(k, prec).mul_fraction(1 - self.alpha)
            yield a + b
            k += 1


class ProductComplement(CoefficientSeries):
    """Series of g with 1 - g = (1 - f1)(1 - f2): the Cauchy convolution."""

    def __init__(self, c1: CoefficientSeries, c2: CoefficientSeries):
        super().__init__()
        self.c1, self.c2 = c1, c2
        self.exact = c1.exact and c2.exact
        if c1.support_end is not None and c2.support_end is not None:
            self.support_end = c1.support_end + c2.support_end
        lim = _limit_min(c1.known_limit, c2.known_limit)
        self.known_limit = None if lim is None else lim + 1
        self.kind = f"pc({c1.kind},{c2.kind})"

    def _compute_coefficient(self, k: int) -> Fraction:
        return sum(
            (self.c1.coefficient_at(i) * self.c2.coefficient_at(k - i) for i in range(1, k)),
            ZERO,
        )

    def _interval_stream(self, prec: int):
        k = 1
        while True:
            acc = DyadicInterval.exact_int(0, prec)
            for i in range(1, k):
                acc = acc + self.c1.coefficient_interval_at(i, prec) * \
                    self.c2.coefficient_interval_at(k - i, prec)
            yield acc
            k += 1


class Composition(CoefficientSeries):
    """Series of outer(inner(p)), truncated exactly at a caller-chosen order.

    Indices up to `order` are exact: every inner factor contributes degree >= 1
    in (1-p), so inner terms beyond `order` cannot reach the retained indices.
    """

    def __init__(self, inner: CoefficientSeries, outer: CoefficientSeries, order: int):
        super().__init__()
        if order < 1:
            raise ParameterError("composition order must be >= 1")
        for c in (inner, outer):
            if c.known_limit is not None and c.known_limit < order:
                raise ParameterError(
                    f"composition order {order} exceeds input limit {c.known_limit}"
                )
        self.inner, self.outer, self.order = inner, outer, order
        self.exact = inner.exact and outer.exact
        if (inner.support_end is not None and outer.support_end is not None
                and inner.support_end * outer.support_end <= order):
            # polynomial of a polynomial fully inside the truncation window:
            # coefficients beyond the degree bound are exactly zero
            self.support_end = inner.support_end * outer.support_end
            self.known_limit = None
        else:
            self.known_limit = order
        self._exact_table: Optional[List[Fraction]] = None
        self.kind = f"compose({inner.kind},{outer.kind},order={order})"

    def _build_exact(self) -> List[Fraction]:
        if self._exact_table is None:
            n = self.order
            inner = [ZERO] + [self.inner.coefficient_at(k) for k in range(1, n + 1)]
            table = [ZERO] * (n + 1)
            power = inner[:]  # inner^j truncated at degree n, starting j = 1
            j = 1
            while True:
                cj = self.outer.coefficient_at(j)
                if cj != 0:
                    for k in range(j, n + 1):
                        table[k] += cj * power[k]
                j += 1
                if j > n:
                    break
                nxt = [ZERO] * (n + 1)
                for d1 in range(j - 1, n):  # previous power has min degree j-1
                    if power[d1] == 0:
                        continue
                    for d2 in range(1, n - d1 + 1):
                        if inner[d2] != 0:
                            nxt[d1 + d2] += power[d1] * inner[d2]
                power = nxt
            self._exact_table = table
        return self._exact_table

    def _compute_coefficient(self, k: int) -> Fraction:
        return self._build_exact()[k] if k <= self.order else ZERO

    def _interval_stream(self, prec: int):
        n = self.order
        zero = DyadicInterval.exact_int(0, prec)
        inner = [zero] + [self.inner.coefficient_interval_at(k, prec) for k in range(1, n + 1)]
        table = [zero] * (n + 1)
        power = inner[:]
        j = 1
        while True:
            cj = self.outer.coefficient_interval_at(j, prec)
            for k in range(j, n + 1):
                table[k] = table[k] + cj * power[k]
            j += 1
            if j > n:
                break
            nxt = [zero] * (n + 1)
            for d1 in range(j - 1, n):
                for d2 in range(1, n - d1 + 1):
                    nxt[d1 + d2] = nxt[d1 + d2] + power[d1] * inner[d2]
            power = nxt
        for k in range(1, n + 1):
            yield table[k]


# ---------------------------------------------------------------------------
# stop probabilities
# ---------------------------------------------------------------------------


class StoppingSequence:
    """The d_k sequence of a coefficient series.

    d_at(k) returns an exact Fraction on the rational path and a float midpoint
    on the tracked path (use d_interval_at for rigorous enclosures there).
    Indices beyond terminal_index are undefined and raise.
    """

    def __init__(self, source: CoefficientSeries):
        self.source = source
        self.exact = source.exact
        self.terminal_index: Optional[int] = source.support_end
        self._lock = threading.Lock()
        self._d: List[Fraction] = []

    def max_defined_index(self) -> Optional[int]:
        limits = [x for x in (self.terminal_index, self.source.known_limit) if x is not None]
        return min(limits) if limits else None

    def _check(self, k: int):
        if k < 1:
            raise ParameterError("stop probability index must be a positive integer")
        if self.terminal_index is not None and k > self.terminal_index:
            raise ParameterError(
                f"d_{k} is undefined: series terminates at index {self.terminal_index}"
            )

    def d_fraction_at(self, k: int) -> Fraction:
        """Exact d_k (rational path only)."""
        self._check(k)
        if not self.exact:
            raise ParameterError(f"{self.source.kind}: no exact rational d_k")
        if k <= len(self._d):
            return self._d[k - 1]
        with self._lock:
            while len(self._d) < k:
                j = len(self._d) + 1
                closed = self.source.stop_probability_closed_form(j)
                d = derive_stop_probability(self.source, j) if closed is None else closed
                if not 0 <= d <= 1:
                    raise InconsistentSeriesError(
                        f"{self.source.kind}: d_{j} = {d} outside [0, 1]"
                    )
                self._d.append(d)
        return self._d[k - 1]

    def d_interval_at(self, k: int, prec: int) -> DyadicInterval:
        """Rigorous enclosure of d_k at the requested precision."""
        self._check(k)
        if self.exact:
            return DyadicInterval.from_fraction(self.d_fraction_at(k), prec)
        closed = self.source.stop_interval_closed(k, prec)
        if closed is not None:
            return closed
        num = self.source.coefficient_interval_at(k, prec)
        den = DyadicInterval.exact_int(1, prec) - self.source.partial_sum_interval_at(k - 1, prec)
        return num.divide(den)

    def d_at(self, k: int):
        if self.exact:
            return self.d_fraction_at(k)
        return self.d_interval_at(k, 128).mid_float()

    def bits_at(self, k: int, ceiling: int = 4096):
        """Binary-expansion provider for d_k (exact or interval-backed)."""
        if self.exact:
            return FractionBits(self.d_fraction_at(k))
        return IntervalBits(lambda prec: self.d_interval_at(k, prec), ceiling=ceiling)


def derive_stop_probability(series: CoefficientSeries, k: int) -> Fraction:
    """Generic rule d_k = c_k / (1 - sum_{j<k} c_j) on the exact path."""
    c = series.coefficient_at(k)
    den = ONE - series.partial_sum_at(k - 1)
    if den == 0:
        if c > 0:
            raise InconsistentSeriesError(
                f"{series.kind}: coefficient mass at index {k} after the series "
                "already summed to 1"
            )
        raise ParameterError(f"d_{k} is undefined: series exhausted before index {k}")
    return c / den


def stopping_from_coefficients(series: CoefficientSeries) -> StoppingSequence:
    """Derive the stop-probability sequence of a valid coefficient series."""
    return StoppingSequence(series)


class _DerivedFromStopping(CoefficientSeries):
    """Series reconstructed from stop probabilities: c_k = d_k * prod_{j<k}(1-d_j)."""

    def __init__(self, d: StoppingSequence):
        super().__init__()
        self.d = d
        self.exact = d.exact
        self.support_end = d.terminal_index
        self.known_limit = None if d.terminal_index is not None else d.source.known_limit
        self.kind = f"from_stopping({d.source.kind})"
        self._prefix: List[Fraction] = [ONE]  # prod_{j<=i}(1-d_j), index i

    def _compute_coefficient(self, k: int) -> Fraction:
        if self.support_end is not None and k > self.support_end:
            return ZERO
        while len(self._prefix) <= k - 1:
            j = len(self._prefix)
            self._prefix.append(self._prefix[-1] * (1 - self.d.d_fraction_at(j)))
        return self.d.d_fraction_at(k) * self._prefix[k - 1]

    def _interval_stream(self, prec: int):
        one = DyadicInterval.exact_int(1, prec)
        prefix = one
        k = 1
        while True:
            dk = self.d.d_interval_at(k, prec)
            yield prefix * dk
            prefix = prefix * (one - dk)
            k += 1


def coefficients_from_stopping(d: StoppingSequence) -> CoefficientSeries:
    """Rebuild the coefficient series a stopping sequence came from."""
    return _DerivedFromStopping(d)


# ---------------------------------------------------------------------------
# catalog front door and combinator constructors
# ---------------------------------------------------------------------------


def compose(inner: CoefficientSeries, outer: CoefficientSeries, order: int) -> CoefficientSeries:
    return Composition(inner, outer, order)


def product_complement(c1: CoefficientSeries, c2: CoefficientSeries) -> CoefficientSeries:
    return ProductComplement(c1, c2)


def convex_combination(c1: CoefficientSeries, c2: CoefficientSeries, alpha) -> CoefficientSeries:
    return ConvexCombination(c1, c2, alpha)


CATALOG_NAMES = ("power", "sqrt", "mobius_sqrt", "log2_sqrt", "exp_sqrt", "entropy", "finite")


def catalog(entry: str, **params) -> CoefficientSeries:
    """Construct a built-in series by name.

    power needs a=<rational in (0,1)>; finite needs values=<list summing to 1>;
    the rest take no parameters.
    """
    if entry == "power":
        if "a" not in params:
            raise ParameterError("power requires parameter a")
        return PowerCoefficients(params.pop("a"))
    if entry == "finite":
        if "values" not in params:
            raise ParameterError("finite requires parameter values")
        return FiniteCoefficients(params.pop("values"))
    simple = {
        "sqrt": SqrtCoefficients,
        "mobius_sqrt": MobiusSqrtCoefficients,
        "log2_sqrt": Log2SqrtCoefficients,
        "exp_sqrt": ExpSqrtCoefficients,
        "entropy": EntropyCoefficients,
    }
    if entry not in simple:
        raise ParameterError(f"unknown catalog entry {entry!r}; choose from {CATALOG_NAMES}")
    if params:
        raise ParameterError(f"{entry} takes no parameters, got {sorted(params)}")
    return simple[entry]()


class _RawSeries(CoefficientSeries):
    """Unvalidated series from an arbitrary coefficient function (tests only)."""

    def __init__(self, fn, kind="raw", support_end=None):
        super().__init__()
        self._fn = fn
        self.kind = kind
        self.support_end = support_end

    def _compute_coefficient(self, k: int) -> Fraction:
        return as_fraction(self._fn(k))

    def coefficient_at(self, k: int) -> Fraction:  # skip the sum<=1 guard
        self._check_index(k)
        with self._lock:
            while len(self._coeffs) < k:
                c = self._compute_coefficient(len(self._coeffs) + 1)
                self._coeffs.append(c)
                self._sums.append((self._sums[-1] if self._sums else ZERO) + c)
        return self._coeffs[k - 1]
