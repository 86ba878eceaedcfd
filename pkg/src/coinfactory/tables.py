"""64-bit threshold tables over stop probabilities, the kernels' working set.

Entry k classifies d_k against its first 64 fractional binary digits t:

    INTERIOR  floor(d * 2^64) = t certain and d strictly inside (t, t+1)/2^64;
              a uniform word u decides V with u < t / u > t, u == t is a tie
              that needs more digits (probability 2^-64, kernels bail).
    DYADIC    d == t/2^64 exactly: u < t decides V = 1, anything else V = 0.
    ONE       d == 1: V forced to 1.
    BAND      unresolved at the precision ceiling: kernels always bail.

Exact rational d_k classify precisely; interval-backed d_k escalate precision
and, being irrational, always land INTERIOR below any sane ceiling.  Tables
extend on demand under a lock.  Depth limits: series with closed-form d_k are
O(1) per entry and extend essentially without limit (the two-phase baseline
walks them up to its input cap); everything else pays per-index evaluation
costs and is capped (TableDepthError past the cap, with the object path as the
slow-but-correct fallback).
"""

from __future__ import annotations

import threading
from array import array

from .errors import InsufficientPrecisionError
from .series import StoppingSequence

KIND_INTERIOR = 0
KIND_DYADIC = 1
KIND_ONE = 2
KIND_BAND = 3

CHUNK = 64
DEEP_LIMIT = 1 << 21          # closed-form d_k: effectively unbounded
GENERIC_LIMIT = 8192          # per-index evaluation: keep the table affordable


class ThresholdTable:
    def __init__(self, stopping: StoppingSequence, digit_ceiling: int = 4096):
        self.stopping = stopping
        self.digit_ceiling = digit_ceiling
        self.kinds = array("B")
        self.t64 = array("Q")
        self._lock = threading.RLock()
        self.terminal = stopping.terminal_index or 0  # 0 = no terminal
        has_closed = (
            stopping.exact
            and stopping.source.stop_probability_closed_form(1) is not None
        )
        self.max_depth = DEEP_LIMIT if (has_closed or self.terminal) else GENERIC_LIMIT
        limit = stopping.max_defined_index()
        if limit is not None:
            self.max_depth = min(self.max_depth, limit)

    def depth(self) -> int:
        return len(self.kinds)

    def ensure(self, depth: int) -> int:
        """Extend to min(depth, terminal, max_depth); returns the new depth.

        Never raises: replications that outrun the table surface as depth
        bail-outs and fall back to the object path, which is unbounded.
        """
        if self.terminal:
            depth = min(depth, self.terminal)
        depth = min(depth, self.max_depth)
        if len(self.kinds) >= depth:
            return len(self.kinds)
        with self._lock:
            while len(self.kinds) < depth:
                self._append_entry(len(self.kinds) + 1)
        return len(self.kinds)

    def at_limit(self) -> bool:
        cap = min(self.terminal or self.max_depth, self.max_depth)
        return self.depth() >= cap

    def _append_entry(self, k: int):
        if self.stopping.exact:
            d = self.stopping.d_fraction_at(k)
            if d == 1:
                self.kinds.append(KIND_ONE)
                self.t64.append(0)
                return
            num, den = d.numerator, d.denominator
            t, rem = divmod(num << CHUNK, den)
            self.kinds.append(KIND_DYADIC if rem == 0 else KIND_INTERIOR)
            self.t64.append(t)
            return
        prec = 128
        while True:
            try:
                iv = self.stopping.d_interval_at(k, prec)
            except InsufficientPrecisionError:
                iv = None
            t = iv.floor_at_bits(CHUNK) if iv is not None else None
            if t is not None:
                self.kinds.append(KIND_INTERIOR)
                self.t64.append(t)
                return
            if prec >= self.digit_ceiling:
                lo = iv.floor_at_bits(0) if iv is not None else 0
                self.kinds.append(KIND_BAND)
                self.t64.append(max(lo or 0, 0))
                return
            prec = min(prec * 2, self.digit_ceiling)


def alg1_depth_for(p: float, reps: int) -> int:
    """Depth with negligible overflow mass for the sequential-stop sampler.

    Pr[N > n] <= (1-p)^n; pick n with reps * (1-p)^n below 2^-40 or so.
    """
    import math

    if p >= 1:
        return 1
    need = (math.log(max(reps, 1)) + 40 * math.log(2)) / -math.log1p(-p)
    return max(64, int(need) + 1)
