"""Bulk replication engine: kernels for the fast path, object samplers for the
rare escalations, merged into one deterministic aggregate.

Replication r of a run draws from counter-derived streams keyed by
(seed, r, domain), so its outcome is a pure function of (plan, p, seed, r):
workers only partition the index range, bail-outs re-run the same indices on a
deeper table or on the exact object path, and every route yields the same
sample.  Aggregates are integer sums and histograms, so merge order cannot
change the report.
"""

from __future__ import annotations

from array import array
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional

from . import _kernels
from ._kernels.plan import KernelPlan, build_plan, p_threshold
from .errors import TruncationLimitError
from .expr import build_factory, parse_expression
from .factory import source_pair
from .rng import DOMAIN_COIN, Stream
from .series import as_fraction

DEFAULT_HIST_LEN = 512

_PLAN_CACHE: dict = {}


def plan_for(tree, algo: str, cap: int, shortcut: bool, digit_ceiling: int) -> KernelPlan:
    key = (tree, algo, cap, shortcut, digit_ceiling)
    plan = _PLAN_CACHE.get(key)
    if plan is None:
        plan = build_plan(tree, algo=algo, cap=cap, dyadic_shortcut=shortcut,
                          digit_ceiling=digit_ceiling)
        _PLAN_CACHE[key] = plan
    return plan


@dataclass
class CellResult:
    """Aggregates of one (expression, algorithm, p) cell."""

    reps: int
    count: int = 0
    sum_y: int = 0
    sum_n: int = 0
    sum_n2: int = 0
    sum_outer: int = 0
    sum_pairs: int = 0
    uniform_draws: int = 0
    trunc: int = 0
    max_n: int = 0
    hist: List[int] = field(default_factory=list)
    hist_y0: List[int] = field(default_factory=list)
    hist_outer: List[int] = field(default_factory=list)
    object_resolved: int = 0
    backend: str = ""

    def merge_kernel(self, out: dict):
        self.count += out["count"]
        self.sum_y += out["sum_y"]
        self.sum_n += out["sum_n"]
        self.sum_n2 += out["sum_n2"]
        self.sum_outer += out["sum_outer"]
        self.sum_pairs += out["sum_pairs"]
        self.uniform_draws += out["uniform_draws"]
        self.trunc += out["trunc"]
        self.max_n = max(self.max_n, out["max_n"])
        for name in ("hist", "hist_y0", "hist_outer"):
            mine = getattr(self, name)
            theirs = out[name]
            if not mine:
                setattr(self, name, list(theirs))
            else:
                for i, v in enumerate(theirs):
                    mine[i] += v

    # -- derived statistics -------------------------------------------------

    def mean_y(self) -> float:
        return self.sum_y / self.count

    def mean_n(self) -> float:
        return self.sum_n / self.count

    def var_n(self) -> float:
        if self.count < 2:
            return 0.0
        m = self.mean_n()
        return max(0.0, (self.sum_n2 - self.count * m * m) / (self.count - 1))

    def mean_outer(self) -> float:
        return self.sum_outer / self.count

    def tail_curve(self, n_max: Optional[int] = None):
        """[(n, Pr[N > n])] for n = 0 .. min(max observed, histogram range)."""
        top = min(self.max_n, len(self.hist) - 2)
        if n_max is not None:
            top = min(top, n_max)
        total = self.count
        out = []
        # hist[i] counts N == i for i < hist_len
        cum = 0
        for n in range(0, top + 1):
            cum += self.hist[n] if n < len(self.hist) else 0
            out.append((n, (total - cum) / total))
        return out


def _hist_pad(length: int) -> List[int]:
    return [0] * (length + 1)


def run_cell(tree, algo: str, p, reps: int, seed: int, *,
             cap: int = 1_000_000, dyadic_shortcut: bool = False,
             digit_ceiling: int = 4096, hist_len: int = DEFAULT_HIST_LEN,
             workers: int = 1, backend: Optional[str] = None) -> CellResult:
    """Run `reps` replications of one expression at one p; deterministic in seed."""
    p = as_fraction(p)
    kern = _kernels.backend_by_name(backend)
    plan = plan_for(tree, algo, cap, dyadic_shortcut, digit_ceiling)
    plan.prepare(p, reps)
    pt, pdy = p_threshold(p)

    result = CellResult(reps=reps)
    result.hist = _hist_pad(hist_len)
    result.hist_y0 = _hist_pad(hist_len)
    result.hist_outer = _hist_pad(hist_len)
    result.backend = getattr(kern, "BACKEND", "?")

    chunk = (reps + workers - 1) // workers if workers > 0 else reps
    spans = [(lo, min(lo + chunk, reps)) for lo in range(0, reps, chunk)]

    def kernel_pass(indices):
        return kern.run(plan.flatten(), pt, pdy, seed, indices, hist_len)

    pending_exact: List[int] = []
    pending_depth: List[int] = []

    def absorb(out):
        result.merge_kernel(out)
        pending_exact.extend(out["bails_exact"])
        pending_depth.extend(out["bails_depth"])

    if len(spans) > 1 and _kernels.compiled is not None and kern is _kernels.compiled:
        with ThreadPoolExecutor(max_workers=len(spans)) as pool:
            outs = list(pool.map(
                lambda span: kernel_pass(array("q", range(span[0], span[1]))), spans))
        for out in outs:
            absorb(out)
    else:
        for lo, hi in spans:
            absorb(kernel_pass(array("q", range(lo, hi))))

    # depth bail-outs: grow the tables and re-run just those replications
    while pending_depth:
        if not plan.extend_tables():
            break
        retry = array("q", sorted(pending_depth))
        pending_depth = []
        absorb(kernel_pass(retry))

    # anything left goes through the exact object path, one replication at a time
    leftovers = sorted(pending_exact) + sorted(pending_depth)
    if leftovers:
        factory = build_factory(tree, algo=algo, cap=cap,
                                dyadic_shortcut=dyadic_shortcut,
                                digit_ceiling=digit_ceiling)
        for rep in leftovers:
            _object_resolve(result, factory, plan, p, seed, rep, hist_len)
            result.object_resolved += 1
    return result


def _object_resolve(result: CellResult, factory, plan: KernelPlan, p: Fraction,
                    seed: int, rep: int, hist_len: int):
    coins, uniforms = source_pair(seed, rep, p=p)
    try:
        if plan.pure_alg2:
            detailed = factory.sample_detailed(coins)
            y, n = detailed.y, detailed.n_total
            outer = detailed.n_outer
            pairs = (n - outer) // 2
        else:
            out = factory.sample(coins, uniforms)
            y, n = out.y, out.n
            outer = pairs = 0
    except TruncationLimitError:
        result.trunc += 1
        return
    result.count += 1
    result.sum_y += y
    result.sum_n += n
    result.sum_n2 += n * n
    result.sum_outer += outer
    result.sum_pairs += pairs
    result.uniform_draws += uniforms.draws
    result.max_n = max(result.max_n, n)
    result.hist[n if n < hist_len else hist_len] += 1
    if y == 0:
        result.hist_y0[n if n < hist_len else hist_len] += 1
    result.hist_outer[outer if outer < hist_len else hist_len] += 1


def run_expression(expression: str, algo: str, p, reps: int, seed: int, **kw) -> CellResult:
    return run_cell(parse_expression(expression), algo, p, reps, seed, **kw)


@dataclass
class VonNeumannResult:
    reps: int
    sum_bits: int
    sum_pairs: int
    hist: List[int]

    def mean_bit(self) -> float:
        return self.sum_bits / self.reps

    def mean_pairs(self) -> float:
        return self.sum_pairs / self.reps


def run_von_neumann(p, reps: int, seed: int, hist_len: int = 64,
                    backend: Optional[str] = None) -> VonNeumannResult:
    """Bulk fair-bit extraction: each replication extracts one bit."""
    p = as_fraction(p)
    kern = _kernels.backend_by_name(backend)
    pt, pdy = p_threshold(p)
    out = kern.run_von_neumann(pt, pdy, seed, array("q", range(reps)), hist_len)
    sum_bits, sum_pairs = out["sum_bits"], out["sum_pairs"]
    hist = list(out["hist"])
    for rep in out["bails"]:
        # undecidable coin comparison (2^-64): resolve exactly
        coins = _exact_coin(p, seed, rep)
        from .nonrand import von_neumann_bit

        bit, pairs = von_neumann_bit(coins)
        sum_bits += bit
        sum_pairs += pairs
        hist[pairs if pairs < hist_len else hist_len] += 1
    return VonNeumannResult(reps=reps, sum_bits=sum_bits, sum_pairs=sum_pairs, hist=hist)


def _exact_coin(p: Fraction, seed: int, rep: int):
    from .factory import SimulatedCoin

    return SimulatedCoin(p, Stream(seed, rep, DOMAIN_COIN))
