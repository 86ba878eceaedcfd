"""Compilation of factory expressions into flat kernel programs.

A plan is a postorder array of nodes (opcode + children + per-node payload)
plus the threshold tables its leaves sample from.  Both kernel backends (the
compiled extension and the pure-Python twin) interpret the same arrays with
identical semantics, and the object-level samplers consume the same stream
positions, so any replication can be re-run on any path with the same result.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List

from ..errors import ParameterError
from ..expr import (
    BaselineExpr,
    ComplementExpr,
    FlipInputExpr,
    ProdExpr,
    ScaleExpr,
    SeriesExpr,
    stopping_for,
)
from ..tables import ThresholdTable, alg1_depth_for

OP_ALG1 = 0
OP_ALG2 = 1
OP_BASELINE = 2
OP_COMPLEMENT = 3
OP_FLIP = 4
OP_SCALE = 5
OP_PROD = 6

FLAG_ALPHA_DYADIC = 1
FLAG_ALPHA_FAIRBIT = 2

# replication status codes shared with the kernels
ST_OK = 0
ST_BAIL_EXACT = 1
ST_BAIL_DEPTH = 2
ST_TRUNCATED = 3

# initial table depth for baseline runs; deeper needs extend on demand
BASELINE_PREPARE_DEPTH = 65536


@dataclass
class KernelPlan:
    ops: array
    child1: array
    child2: array
    table_id: array
    aux: array
    flags: array
    root: int
    tables: List[ThresholdTable]
    uses_uniforms: bool
    pure_alg2: bool
    shortcut: bool
    cap: int
    has_baseline: bool = field(default=False)

    def prepare(self, p: Fraction, reps: int):
        """Pre-extend tables to depths the run will almost surely stay inside."""
        pf = float(min(p, 1 - p))  # input-complement subtrees see 1-p
        depth = alg1_depth_for(pf, reps)
        for i, op in enumerate(self.ops):
            t = self.tables[self.table_id[i]] if self.table_id[i] >= 0 else None
            if op in (OP_ALG1, OP_ALG2) and t is not None:
                t.ensure(depth)
            elif op == OP_BASELINE and t is not None:
                t.ensure(min(int(self.aux[i]), BASELINE_PREPARE_DEPTH))

    def extend_tables(self, factor: int = 4) -> bool:
        """Grow every table; returns False when nothing could grow further."""
        grew = False
        for i, op in enumerate(self.ops):
            if op == OP_BASELINE:
                t = self.tables[self.table_id[i]]
                before = t.depth()
                target = min(int(self.aux[i]), max(before * factor, 1024))
                if t.ensure(target) > before:
                    grew = True
            elif op in (OP_ALG1, OP_ALG2):
                t = self.tables[self.table_id[i]]
                before = t.depth()
                if t.ensure(max(before * factor, 64)) > before:
                    grew = True
        return grew

    def flatten(self) -> dict:
        """Contiguous table arrays for one kernel invocation."""
        off = array("q")
        depth = array("q")
        terminal = array("q")
        kinds = array("B")
        t64 = array("Q")
        pos = 0
        for t in self.tables:
            off.append(pos)
            depth.append(t.depth())
            terminal.append(t.terminal)
            kinds.extend(t.kinds)
            t64.extend(t.t64)
            pos += t.depth()
        if not kinds:  # zero-length buffers upset memoryview casts
            kinds.append(0)
            t64.append(0)
        return {
            "ops": self.ops, "child1": self.child1, "child2": self.child2,
            "table_id": self.table_id, "aux": self.aux, "flags": self.flags,
            "root": self.root, "tab_off": off, "tab_depth": depth,
            "tab_terminal": terminal, "kinds": kinds, "t64": t64,
            "shortcut": 1 if self.shortcut else 0,
        }


def build_plan(tree, algo: str = "rand", cap: int = 1_000_000,
               dyadic_shortcut: bool = False, digit_ceiling: int = 4096) -> KernelPlan:
    ops = array("B")
    child1 = array("i")
    child2 = array("i")
    table_id = array("i")
    aux = array("Q")
    flags = array("B")
    tables: List[ThresholdTable] = []
    table_index: dict = {}
    state = {"uniforms": False, "baseline": False}

    def add_node(op, c1=-1, c2=-1, tid=-1, aux_val=0, flag=0) -> int:
        ops.append(op)
        child1.append(c1)
        child2.append(c2)
        table_id.append(tid)
        aux.append(aux_val)
        flags.append(flag)
        return len(ops) - 1

    def table_for(series_tree) -> int:
        d = stopping_for(series_tree)
        key = id(d)
        if key not in table_index:
            tables.append(ThresholdTable(d, digit_ceiling=digit_ceiling))
            table_index[key] = len(tables) - 1
        return table_index[key]

    def emit(node) -> int:
        if isinstance(node, SeriesExpr):
            tid = table_for(node)
            if algo == "rand":
                state["uniforms"] = True
                return add_node(OP_ALG1, tid=tid)
            if algo == "baseline":
                state["uniforms"] = True
                state["baseline"] = True
                return add_node(OP_BASELINE, tid=tid, aux_val=cap)
            return add_node(OP_ALG2, tid=tid)
        if isinstance(node, BaselineExpr):
            if algo == "nonrand":
                raise ParameterError("baseline(...) requires the randomized mode")
            state["uniforms"] = True
            state["baseline"] = True
            return add_node(OP_BASELINE, tid=table_for(node.series), aux_val=cap)
        if isinstance(node, ComplementExpr):
            return add_node(OP_COMPLEMENT, c1=emit(node.child))
        if isinstance(node, FlipInputExpr):
            return add_node(OP_FLIP, c1=emit(node.child))
        if isinstance(node, ScaleExpr):
            c = emit(node.child)
            if node.alpha == 1:
                return c
            num, den = node.alpha.numerator, node.alpha.denominator
            t, rem = divmod(num << 64, den)
            flag = FLAG_ALPHA_DYADIC if rem == 0 else 0
            if algo == "nonrand":
                flag |= FLAG_ALPHA_FAIRBIT
            else:
                state["uniforms"] = True
            return add_node(OP_SCALE, c1=c, aux_val=t, flag=flag)
        if isinstance(node, ProdExpr):
            a = emit(node.f1)
            return add_node(OP_PROD, c1=a, c2=emit(node.f2))
        raise ParameterError(f"cannot compile {node!r}")

    root = emit(tree)
    pure_alg2 = len(ops) == 1 and ops[0] == OP_ALG2
    return KernelPlan(
        ops=ops, child1=child1, child2=child2, table_id=table_id, aux=aux,
        flags=flags, root=root, tables=tables, uses_uniforms=state["uniforms"],
        pure_alg2=pure_alg2, shortcut=dyadic_shortcut, cap=cap,
        has_baseline=state["baseline"],
    )


def p_threshold(p: Fraction):
    """(t64, dyadic) of the coin bias."""
    t, rem = divmod(p.numerator << 64, p.denominator)
    return t, rem == 0
