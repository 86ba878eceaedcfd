"""Dyadic interval arithmetic with outward rounding.

Supports the tracked-precision coefficient path: every quantity is enclosed in
[lo/2^prec, hi/2^prec] with integer endpoints, all operations round outward, so
enclosures are rigorous.  The only irrational constants the catalog needs are
ln 2 and e; both are computed from integer series with explicit tail bounds.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import lru_cache

from .errors import InsufficientPrecisionError


def _fdiv(n: int, d: int) -> int:
    return n // d


def _cdiv(n: int, d: int) -> int:
    return -((-n) // d)


class DyadicInterval:
    """Closed interval [lo/2^prec, hi/2^prec] with integer endpoints."""

    __slots__ = ("lo", "hi", "prec")

    def __init__(self, lo: int, hi: int, prec: int):
        if lo > hi:
            raise ValueError("interval endpoints out of order")
        self.lo = lo
        self.hi = hi
        self.prec = prec

    @classmethod
    def from_fraction(cls, fr: Fraction, prec: int) -> "DyadicInterval":
        num, den = fr.numerator, fr.denominator
        lo = _fdiv(num << prec, den)
        hi = _cdiv(num << prec, den)
        return cls(lo, hi, prec)

    @classmethod
    def exact_int(cls, n: int, prec: int) -> "DyadicInterval":
        return cls(n << prec, n << prec, prec)

    def rescale(self, prec: int) -> "DyadicInterval":
        if prec == self.prec:
            return self
        if prec > self.prec:
            s = prec - self.prec
            return DyadicInterval(self.lo << s, self.hi << s, prec)
        s = self.prec - prec
        return DyadicInterval(self.lo >> s, _cdiv(self.hi, 1 << s), prec)

    def __add__(self, other: "DyadicInterval") -> "DyadicInterval":
        p = max(self.prec, other.prec)
        a, b = self.rescale(p), other.rescale(p)
        return DyadicInterval(a.lo + b.lo, a.hi + b.hi, p)

    def __sub__(self, other: "DyadicInterval") -> "DyadicInterval":
        p = max(self.prec, other.prec)
        a, b = self.rescale(p), other.rescale(p)
        return DyadicInterval(a.lo - b.hi, a.hi - b.lo, p)

    def __mul__(self, other: "DyadicInterval") -> "DyadicInterval":
        p = max(self.prec, other.prec)
        a, b = self.rescale(p), other.rescale(p)
        prods = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
        scale = 1 << p
        return DyadicInterval(_fdiv(min(prods), scale), _cdiv(max(prods), scale), p)

    def mul_fraction(self, fr: Fraction) -> "DyadicInterval":
        num, den = fr.numerator, fr.denominator
        if num >= 0:
            return DyadicInterval(_fdiv(self.lo * num, den), _cdiv(self.hi * num, den), self.prec)
        return DyadicInterval(_fdiv(self.hi * num, den), _cdiv(self.lo * num, den), self.prec)

    def divide(self, other: "DyadicInterval") -> "DyadicInterval":
        """Self / other; other must be strictly positive."""
        if other.lo <= 0:
            raise InsufficientPrecisionError(
                "division by an interval whose lower bound is not positive"
            )
        p = max(self.prec, other.prec)
        a, b = self.rescale(p), other.rescale(p)
        if a.lo >= 0:
            lo = _fdiv(a.lo << p, b.hi)
        else:
            lo = _fdiv(a.lo << p, b.lo)
        if a.hi >= 0:
            hi = _cdiv(a.hi << p, b.lo)
        else:
            hi = _cdiv(a.hi << p, b.hi)
        return DyadicInterval(lo, hi, p)

    def reciprocal(self) -> "DyadicInterval":
        return DyadicInterval.exact_int(1, self.prec).divide(self)

    # -- queries ---------------------------------------------------------

    def width_leq(self, bits: int) -> bool:
        """True when the interval width is at most 2^-bits."""
        return (self.hi - self.lo) << bits <= (1 << self.prec)

    def is_positive(self) -> bool:
        return self.lo > 0

    def floor_at_bits(self, bits: int):
        """Certified floor(value * 2^bits), or None when the enclosure straddles one.

        Returns n such that n <= value * 2^bits < n + 1 for every value in the
        interval; None if no single n works.
        """
        if self.prec >= bits:
            n = self.lo >> (self.prec - bits)
            # need hi/2^prec < (n+1)/2^bits strictly
            if self.hi < (n + 1) << (self.prec - bits):
                return n
            return None
        s = bits - self.prec
        n = self.lo << s
        if self.hi << s < n + 1:
            return n
        return None

    def mid_float(self) -> float:
        m = (self.lo + self.hi) / 2
        try:
            return math.ldexp(m, -self.prec)
        except OverflowError:  # huge integer midpoint; go through Fraction
            return float(Fraction(self.lo + self.hi, 2 ** (self.prec + 1)))

    def rad_float(self) -> float:
        """Upper bound on the distance from mid_float() to any enclosed value."""
        # +2 absorbs the float rounding of the midpoint and of this conversion
        return math.ldexp(self.hi - self.lo + 2, -self.prec)

    def lower_fraction(self) -> Fraction:
        return Fraction(self.lo, 1 << self.prec)

    def upper_fraction(self) -> Fraction:
        return Fraction(self.hi, 1 << self.prec)

    def __repr__(self):
        return f"DyadicInterval({self.mid_float():.17g} ± {self.rad_float():.3g})"


@lru_cache(maxsize=None)
def ln2_interval(prec: int) -> DyadicInterval:
    """Enclosure of ln 2 via sum_{k>=1} 1/(k 2^k), tail < 2^-K/(K+1)."""
    guard = prec + 32
    terms = guard  # 2^-K tail with K = guard is below one output ulp
    s = 0
    for k in range(1, terms + 1):
        s += _fdiv(1 << guard, k << k)
    # each floored term loses < 1; tail at this scale is < 2
    return DyadicInterval(s, s + terms + 2, guard).rescale(prec)


@lru_cache(maxsize=None)
def e_interval(prec: int) -> DyadicInterval:
    """Enclosure of e via sum 1/k!, stopping once k! exceeds the guard scale."""
    guard = prec + 32
    s = 0
    fact = 1
    k = 0
    count = 0
    while fact <= (1 << (guard + 1)):
        s += _fdiv(1 << guard, fact)
        count += 1
        k += 1
        fact *= k
    # remaining tail < 2/k! < 2 at this scale; floored terms lose < count
    return DyadicInterval(s, s + count + 2, guard).rescale(prec)


@lru_cache(maxsize=None)
def inv_ln2_interval(prec: int) -> DyadicInterval:
    return ln2_interval(prec + 8).reciprocal().rescale(prec)


@lru_cache(maxsize=None)
def inv_e_minus_1_interval(prec: int) -> DyadicInterval:
    em1 = e_interval(prec + 8) - DyadicInterval.exact_int(1, prec + 8)
    return em1.reciprocal().rescale(prec)
