"""Binary expansions of probabilities, in 64-bit chunks.

Both sampling algorithms reduce to comparing an ideal uniform bit stream
against a fixed value in [0, 1].  A value is served as chunks: chunk i holds
fractional binary digits 64i+1 .. 64(i+1) packed into one integer.  The
expansion convention is terminate-with-zeros for dyadic rationals, except the
value 1 whose expansion is all ones.

Providers: FractionBits for exact rationals, IntervalBits for values only
known through interval enclosures (digits are certified by refining the
enclosure, escalating precision up to a ceiling).
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable, Optional, Tuple

from .errors import InsufficientPrecisionError
from .intervals import DyadicInterval

CHUNK_BITS = 64
CHUNK_MASK = (1 << 64) - 1


class FractionBits:
    """Chunked binary expansion of a rational in [0, 1]."""

    __slots__ = ("fraction", "_chunks", "_rem", "_den")

    def __init__(self, fraction: Fraction):
        if not 0 <= fraction <= 1:
            raise ValueError("value must lie in [0, 1]")
        self.fraction = fraction
        self._den = fraction.denominator
        self._rem = fraction.numerator  # remainder after the chunks served so far
        self._chunks: list[int] = []

    def chunk64(self, i: int) -> int:
        if self.fraction == 1:
            return CHUNK_MASK
        while len(self._chunks) <= i:
            self._rem <<= CHUNK_BITS
            self._chunks.append(self._rem // self._den)
            self._rem %= self._den
        return self._chunks[i]

    def exact_to_chunk(self, i: int) -> bool:
        """True when the value equals its expansion truncated after chunk i."""
        if self.fraction == 1:
            return False
        den = self.fraction.denominator
        return den & (den - 1) == 0 and den.bit_length() - 1 <= CHUNK_BITS * (i + 1)

    def digit(self, j: int) -> int:
        """Fractional binary digit j (1-based)."""
        if self.fraction == 1:
            return 1
        i, off = divmod(j - 1, CHUNK_BITS)
        return (self.chunk64(i) >> (CHUNK_BITS - 1 - off)) & 1

    def eventually_constant(self) -> Optional[Tuple[int, int]]:
        """(m, bit) such that every digit at position >= m equals bit, or None."""
        if self.fraction == 1:
            return (1, 1)
        den = self.fraction.denominator
        if den & (den - 1) == 0:  # power of two: terminates with zeros
            return (den.bit_length(), 0)
        return None


class IntervalBits:
    """Chunked expansion of a value pinned down only by interval enclosures.

    `refine(prec)` must return an enclosure of the value at the requested
    precision.  Digits are certified by escalating the precision (doubling)
    until the relevant floor is decided; values reachable here are irrational,
    so this terminates below any reasonable ceiling.
    """

    __slots__ = ("refine", "ceiling", "_prec", "_cached")

    def __init__(self, refine: Callable[[int], DyadicInterval], ceiling: int = 4096,
                 start_prec: int = 128):
        self.refine = refine
        self.ceiling = ceiling
        self._prec = start_prec
        self._cached = refine(start_prec)

    def _floor_certified(self, bits: int) -> int:
        iv = self._cached
        while True:
            n = iv.floor_at_bits(bits)
            if n is not None:
                return n
            if self._prec >= self.ceiling:
                raise InsufficientPrecisionError(
                    f"binary digit at {bits} bits unresolved at the "
                    f"{self.ceiling}-bit precision ceiling"
                )
            self._prec = min(self._prec * 2, self.ceiling)
            iv = self.refine(self._prec)
            self._cached = iv

    def chunk64(self, i: int) -> int:
        return self._floor_certified(CHUNK_BITS * (i + 1)) & CHUNK_MASK

    def exact_to_chunk(self, i: int) -> bool:
        return False

    def digit(self, j: int) -> int:
        return self._floor_certified(j) & 1

    def eventually_constant(self) -> Optional[Tuple[int, int]]:
        return None


def uniform_less_than(chunk_source, bits) -> bool:
    """Decide U < v for an ideal uniform U served as 64-bit chunks.

    `chunk_source()` yields successive chunks of U; `bits` provides the value's
    expansion.  The comparison is exact: ties on a prefix recurse into the next
    chunk, and a prefix that equals a terminating (dyadic) expansion decides
    U >= v since the remaining bits of U are not all zero with probability one.
    """
    i = 0
    while True:
        u = chunk_source()
        t = bits.chunk64(i)
        if u < t:
            return True
        if u > t:
            return False
        if bits.exact_to_chunk(i):
            return False
        i += 1
