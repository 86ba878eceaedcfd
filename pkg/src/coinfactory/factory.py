"""Randomized sampling: the sequential-stop algorithm, the two-phase baseline,
and the factory-level transforms.

The sequential-stop sampler consumes one coin X_i per iteration, draws an
auxiliary uniform U_i and sets V_i = 1 when U_i < d_i, and stops with output
Y = X_i as soon as V_i or X_i is 1.  Its output is exactly Bernoulli(f(p)) and
it consumes f(p)/p coins on average.  The baseline splits the work in two
phases: first draw the number of inputs L with Pr[L = k] = c_k (via the same
d_k, read as conditional stop probabilities), then spend exactly L coins and
output 1 unless all of them came up 0.  Same output law, no early stopping, so
it is strictly costlier whenever the series has mass beyond index 1.

All comparisons against d_k and against the input bias p are exact: uniforms
are lazy bit streams compared chunk-wise against binary expansions (see bits).
One uniform word is consumed per comparison except with probability 2^-64 per
draw, when the tie forces another chunk.  When d_i is exactly 0 or 1 the value
of V_i is forced and no uniform is consumed at all.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Protocol, Tuple

from .bits import FractionBits
from .errors import ParameterError, TruncationLimitError
from .rng import DOMAIN_COIN, DOMAIN_UNIFORM, Stream
from .series import StoppingSequence, as_fraction

DEFAULT_BASELINE_CAP = 1_000_000
DEFAULT_DIGIT_CEILING = 4096


class CoinSource(Protocol):
    draws: int

    def next_bit(self) -> int: ...


class SimulatedCoin:
    """I.i.d. Bernoulli(p) bits with exactly rational bias p."""

    def __init__(self, p, stream: Stream):
        p = as_fraction(p)
        if not 0 < p < 1:
            raise ParameterError("coin bias must satisfy 0 < p < 1")
        self.p = p
        self._bits = FractionBits(p)
        self._stream = stream
        self.draws = 0

    def next_bit(self) -> int:
        self.draws += 1
        i = 0
        while True:
            u = self._stream.next_u64()
            t = self._bits.chunk64(i)
            if u < t:
                return 1
            if u > t:
                return 0
            if self._bits.exact_to_chunk(i):
                return 0
            i += 1


class FlippedCoin:
    """View of a coin source with every bit complemented (input complement)."""

    def __init__(self, inner: CoinSource):
        self.inner = inner

    @property
    def draws(self) -> int:
        return self.inner.draws

    def next_bit(self) -> int:
        return 1 - self.inner.next_bit()


class ListCoin:
    """Deterministic bit sequence, for mechanical traces in tests."""

    def __init__(self, bits):
        self._bits = list(bits)
        self._i = 0
        self.draws = 0

    def next_bit(self) -> int:
        b = self._bits[self._i]
        self._i += 1
        self.draws += 1
        return b


class LazyUniform:
    """A uniform on (0, 1) materialized as 64-bit chunks on demand."""

    def __init__(self, stream: Stream):
        self._stream = stream
        self._chunks: List[int] = [stream.next_u64()]

    def _chunk(self, i: int) -> int:
        while len(self._chunks) <= i:
            self._chunks.append(self._stream.next_u64())
        return self._chunks[i]

    def as_float(self) -> float:
        return ((self._chunk(0) >> 11) + 0.5) * 2.0 ** -53

    def less_than(self, value_bits) -> bool:
        """Exact comparison against a chunked binary expansion."""
        i = 0
        while True:
            u = self._chunk(i)
            t = value_bits.chunk64(i)
            if u < t:
                return True
            if u > t:
                return False
            if value_bits.exact_to_chunk(i):
                return False
            i += 1


class UniformSource:
    """Stream of independent lazy uniforms; independent of any coin source."""

    def __init__(self, stream: Stream):
        self._stream = stream
        self.draws = 0

    def next_uniform(self) -> LazyUniform:
        self.draws += 1
        return LazyUniform(self._stream)


def source_pair(seed: int, rep: int = 0, p=Fraction(1, 2)) -> Tuple[SimulatedCoin, UniformSource]:
    """Independently keyed coin and uniform sources for one replication."""
    coin = SimulatedCoin(p, Stream(seed, rep, DOMAIN_COIN))
    uni = UniformSource(Stream(seed, rep, DOMAIN_UNIFORM))
    return coin, uni


@dataclass(frozen=True)
class FactoryOutcome:
    """One sample: the output bit, coins consumed, optional (X_i, V_i) trace."""

    y: int
    n: int
    trace: Optional[List[Tuple[int, int]]] = None


def _stop_value(d: StoppingSequence, k: int):
    """(forced_v, bits) where forced_v is 0/1 for degenerate d_k, else None."""
    if d.exact:
        dk = d.d_fraction_at(k)
        if dk == 1:
            return 1, None
        if dk == 0:
            return 0, None
        return None, FractionBits(dk)
    return None, d.bits_at(k)


def sample_algorithm1(d: StoppingSequence, coins: CoinSource, uniforms: UniformSource,
                      trace: bool = False) -> FactoryOutcome:
    """One exact Bernoulli(f(p)) sample via the sequential-stop rule."""
    events: Optional[List[Tuple[int, int]]] = [] if trace else None
    i = 1
    while True:
        x = coins.next_bit()
        forced, dbits = _stop_value(d, i)
        if forced is not None:
            v = forced
        else:
            v = 1 if uniforms.next_uniform().less_than(dbits) else 0
        if events is not None:
            events.append((x, v))
        if v or x:
            return FactoryOutcome(y=x, n=i, trace=events)
        i += 1


def sample_two_phase_baseline(d: StoppingSequence, coins: CoinSource,
                              uniforms: UniformSource,
                              cap: int = DEFAULT_BASELINE_CAP) -> FactoryOutcome:
    """Draw L with Pr[L=k] = c_k first, then consume exactly L coins.

    Raises TruncationLimitError when L would exceed `cap` (heavy-tailed series
    have infinite E[L]; the harness reports truncations separately).
    """
    k = 1
    while True:
        if k > cap:
            raise TruncationLimitError(cap)
        forced, dbits = _stop_value(d, k)
        if forced is None:
            stop = uniforms.next_uniform().less_than(dbits)
        else:
            stop = bool(forced)
        if stop:
            break
        k += 1
    y = 0
    for _ in range(k):
        if coins.next_bit():
            y = 1  # no early exit: the baseline always spends all L inputs
    return FactoryOutcome(y=y, n=k, trace=None)


# ---------------------------------------------------------------------------
# factory objects and transforms
# ---------------------------------------------------------------------------


class Factory:
    """A sampler of a fixed target function; sources supplied per sample."""

    uses_uniforms: bool = True

    def sample(self, coins: CoinSource, uniforms: Optional[UniformSource],
               trace: bool = False) -> FactoryOutcome:
        raise NotImplementedError


class AlgorithmOneFactory(Factory):
    def __init__(self, stopping: StoppingSequence):
        self.stopping = stopping

    def sample(self, coins, uniforms, trace=False):
        return sample_algorithm1(self.stopping, coins, uniforms, trace=trace)


class TwoPhaseBaselineFactory(Factory):
    def __init__(self, stopping: StoppingSequence, cap: int = DEFAULT_BASELINE_CAP):
        self.stopping = stopping
        self.cap = cap

    def sample(self, coins, uniforms, trace=False):
        return sample_two_phase_baseline(self.stopping, coins, uniforms, cap=self.cap)


class OutputComplementFactory(Factory):
    """y -> 1 - y: simulates 1 - f(p), input count unchanged."""

    def __init__(self, inner: Factory):
        self.inner = inner
        self.uses_uniforms = inner.uses_uniforms

    def sample(self, coins, uniforms, trace=False):
        out = self.inner.sample(coins, uniforms, trace=trace)
        return FactoryOutcome(y=1 - out.y, n=out.n, trace=out.trace)


class InputComplementFactory(Factory):
    """Flips every input bit: simulates f(1 - p)."""

    def __init__(self, inner: Factory):
        self.inner = inner
        self.uses_uniforms = inner.uses_uniforms

    def sample(self, coins, uniforms, trace=False):
        return self.inner.sample(FlippedCoin(coins), uniforms, trace=trace)


class ScaleFactory(Factory):
    """Multiplies the output by an independent Bernoulli(alpha): simulates alpha*f.

    The alpha-coin is drawn first from the uniform source; when it comes up 0
    the inner factory is skipped entirely, so n = 0 for those samples.  This
    lowers E[N] to alpha * E[N_inner] without touching the output law.
    """

    def __init__(self, inner: Factory, alpha):
        alpha = as_fraction(alpha)
        if not 0 < alpha <= 1:
            raise ParameterError("scale weight must satisfy 0 < alpha <= 1")
        self.inner = inner
        self.alpha = alpha
        self._alpha_bits = FractionBits(alpha) if alpha != 1 else None
        self.uses_uniforms = inner.uses_uniforms or alpha != 1

    def sample(self, coins, uniforms, trace=False):
        if self._alpha_bits is not None:
            if not uniforms.next_uniform().less_than(self._alpha_bits):
                return FactoryOutcome(y=0, n=0, trace=None)
        return self.inner.sample(coins, uniforms, trace=trace)


class ProductFactory(Factory):
    """y = y1 * y2 with short circuit: the second factory only runs when y1 = 1."""

    def __init__(self, f1: Factory, f2: Factory):
        self.f1 = f1
        self.f2 = f2
        self.uses_uniforms = f1.uses_uniforms or f2.uses_uniforms

    def sample(self, coins, uniforms, trace=False):
        first = self.f1.sample(coins, uniforms, trace=False)
        if first.y == 0:
            return FactoryOutcome(y=0, n=first.n, trace=None)
        second = self.f2.sample(coins, uniforms, trace=False)
        return FactoryOutcome(y=second.y, n=first.n + second.n, trace=None)


def transform_output_complement(inner: Factory) -> Factory:
    return OutputComplementFactory(inner)


def transform_input_complement(inner: Factory) -> Factory:
    return InputComplementFactory(inner)


def transform_scale(inner: Factory, alpha) -> Factory:
    return ScaleFactory(inner, alpha)


def transform_product(f1: Factory, f2: Factory) -> Factory:
    return ProductFactory(f1, f2)
