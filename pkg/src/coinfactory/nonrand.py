"""Non-randomized sampling: V_i from fair bits and the binary digits of d_i.

The auxiliary uniform of the randomized sampler is replaced by extra coin
inputs: fair bits come from von Neumann extraction (take pairs until they
differ, keep the first of the pair), and V_i ~ Bernoulli(d_i) is produced by
walking positions j = 1, 2, ... — each fair bit decides whether to move on
(bit 0) or to emit digit j of d_i's binary expansion (bit 1).  Expansions use
the terminate-with-zeros convention for dyadic values, except d_i = 1 which is
all ones, e.g. 0 -> .000..., 0.75 -> .11000..., 1 -> .11111...

Total input cost averages (f(p)/p) * (1 + 2/(p(1-p))): each of the f(p)/p
outer iterations spends its own coin plus, on average, two fair bits at
1/(2p(1-p)) coin pairs each.

The dyadic shortcut (off by default so the cost formula above is reproduced
exactly) skips the fair-bit loop once the remaining digits are known to be
constant; it changes the input-count distribution, never the output law.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .errors import ParameterError
from .factory import CoinSource, Factory, FactoryOutcome
from .series import StoppingSequence

DEFAULT_DIGIT_CEILING = 4096
TERMINATE_ZEROS = "terminate-zeros"


def von_neumann_bit(coins: CoinSource) -> Tuple[int, int]:
    """An exactly fair bit from a biased coin: (bit, pairs consumed)."""
    pairs = 0
    while True:
        a = coins.next_bit()
        b = coins.next_bit()
        pairs += 1
        if a != b:
            return a, pairs


class DigitOracle:
    """Binary digits of the d_k sequence, exact or certified via intervals.

    digit_at(k, j) is the j-th fractional digit (1-based) of d_k.  On the
    interval-backed path digits are certified by escalating precision up to
    `precision_ceiling` bits; an unresolved digit raises rather than guessing.
    """

    def __init__(self, stopping: StoppingSequence,
                 convention: str = TERMINATE_ZEROS,
                 precision_ceiling: int = DEFAULT_DIGIT_CEILING):
        if convention != TERMINATE_ZEROS:
            raise ParameterError(
                f"unsupported dyadic convention {convention!r}; "
                f"only {TERMINATE_ZEROS!r} is implemented"
            )
        self.stopping = stopping
        self.convention = convention
        self.precision_ceiling = precision_ceiling
        self._lock = threading.RLock()
        self._bits: dict = {}

    def _provider(self, k: int):
        prov = self._bits.get(k)
        if prov is None:
            with self._lock:
                prov = self._bits.get(k)
                if prov is None:
                    prov = self.stopping.bits_at(k, ceiling=self.precision_ceiling)
                    self._bits[k] = prov
        return prov

    def digit_at(self, k: int, j: int) -> int:
        if j < 1:
            raise ParameterError("digit positions are 1-based")
        with self._lock:
            return self._provider(k).digit(j)

    def chunk64(self, k: int, i: int) -> int:
        with self._lock:
            return self._provider(k).chunk64(i)

    def eventually_constant_from(self, k: int) -> Optional[Tuple[int, int]]:
        """(m, bit) with digit_at(k, j) == bit for all j >= m, when certifiable."""
        return self._provider(k).eventually_constant()


def digit_oracle_from(d: StoppingSequence, convention: str = TERMINATE_ZEROS,
                      precision_ceiling: int = DEFAULT_DIGIT_CEILING) -> DigitOracle:
    return DigitOracle(d, convention, precision_ceiling)


@dataclass(frozen=True)
class NonRandOutcome:
    """y plus the cost split: n_total = n_outer + 2 * sum(pair_counts)."""

    y: int
    n_total: int
    n_outer: int
    pair_counts: Optional[List[int]] = None


def bernoulli_from_fair_bits(coins: CoinSource, digit_at, eventually_constant,
                             shortcut: bool = False) -> Tuple[int, int]:
    """Bernoulli(v) from fair bits and the digits of v: (bit, pairs consumed).

    digit_at(j) serves v's binary digits; eventually_constant is (m, bit) or
    None and is only consulted when the shortcut is enabled.
    """
    j = 1
    pairs_total = 0
    while True:
        if shortcut and eventually_constant is not None and j >= eventually_constant[0]:
            return eventually_constant[1], pairs_total
        t, pairs = von_neumann_bit(coins)
        pairs_total += pairs
        if t == 0:
            j += 1
            continue
        return digit_at(j), pairs_total


def sample_algorithm2(d: StoppingSequence, oracle: DigitOracle, coins: CoinSource,
                      dyadic_shortcut: bool = False,
                      collect_pairs: bool = False) -> NonRandOutcome:
    """One exact Bernoulli(f(p)) sample without any auxiliary uniforms."""
    i = 1
    pairs_per_iter: Optional[List[int]] = [] if collect_pairs else None
    total_pairs = 0
    while True:
        x = coins.next_bit()
        const = oracle.eventually_constant_from(i) if dyadic_shortcut else None
        v, pairs = bernoulli_from_fair_bits(
            coins, lambda j, k=i: oracle.digit_at(k, j), const, shortcut=dyadic_shortcut
        )
        total_pairs += pairs
        if pairs_per_iter is not None:
            pairs_per_iter.append(pairs)
        if v or x:
            return NonRandOutcome(
                y=x, n_total=i + 2 * total_pairs, n_outer=i, pair_counts=pairs_per_iter
            )
        i += 1


class AlgorithmTwoFactory(Factory):
    uses_uniforms = False

    def __init__(self, stopping: StoppingSequence, dyadic_shortcut: bool = False,
                 precision_ceiling: int = DEFAULT_DIGIT_CEILING):
        self.stopping = stopping
        self.dyadic_shortcut = dyadic_shortcut
        self.oracle = digit_oracle_from(stopping, precision_ceiling=precision_ceiling)

    def sample(self, coins, uniforms, trace=False):
        out = sample_algorithm2(self.stopping, self.oracle, coins,
                                dyadic_shortcut=self.dyadic_shortcut)
        return FactoryOutcome(y=out.y, n=out.n_total, trace=None)

    def sample_detailed(self, coins, collect_pairs: bool = False) -> NonRandOutcome:
        return sample_algorithm2(self.stopping, self.oracle, coins,
                                 dyadic_shortcut=self.dyadic_shortcut,
                                 collect_pairs=collect_pairs)


class FairBitScaleFactory(Factory):
    """Scale transform for the non-randomized mode: the alpha-coin comes from
    fair bits and alpha's binary digits, so no uniform source is ever touched."""

    def __init__(self, inner: Factory, alpha, dyadic_shortcut: bool = False):
        from .bits import FractionBits
        from .series import as_fraction

        alpha = as_fraction(alpha)
        if not 0 < alpha <= 1:
            raise ParameterError("scale weight must satisfy 0 < alpha <= 1")
        self.inner = inner
        self.alpha = alpha
        self.dyadic_shortcut = dyadic_shortcut
        self._bits = FractionBits(alpha) if alpha != 1 else None
        self.uses_uniforms = inner.uses_uniforms

    def sample(self, coins, uniforms, trace=False):
        extra = 0
        if self._bits is not None:
            b, pairs = bernoulli_from_fair_bits(
                coins, self._bits.digit, self._bits.eventually_constant(),
                shortcut=self.dyadic_shortcut,
            )
            extra = 2 * pairs
            if b == 0:
                return FactoryOutcome(y=0, n=extra, trace=None)
        out = self.inner.sample(coins, uniforms, trace=False)
        return FactoryOutcome(y=out.y, n=out.n + extra, trace=None)
