"""Factory/series expression grammar: the naming authority for CLI, config
files and reports.

    factory  := "complement" "(" factory ")"
              | "flip_input" "(" factory ")"
              | "scale" "(" factory "," ["alpha" "="] number ")"
              | "prod" "(" factory "," factory ")"
              | "baseline" "(" series ")"
              | series
    series   := "compose" "(" series "," series "," ["order" "="] integer ")"
              | "pc" "(" series "," series ")"
              | "convex" "(" series "," series "," ["alpha" "="] number ")"
              | "power" ":" "a" "=" number
              | "finite" ":" "[" number {"," number} "]"
              | "sqrt" | "mobius_sqrt" | "log2_sqrt" | "exp_sqrt" | "entropy"
    number   := integer | integer "/" integer | decimal

(Formal EBNF with the lexical details lives in docs/expressions.md.)  The
canonical printer normalizes numbers to reduced fractions and always names the
trailing parameters, so parse -> print -> parse is the identity.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Tuple

from .errors import ExpressionError, ParameterError
from .factory import (
    AlgorithmOneFactory,
    Factory,
    TwoPhaseBaselineFactory,
    transform_input_complement,
    transform_output_complement,
    transform_product,
    transform_scale,
)
from .nonrand import AlgorithmTwoFactory, FairBitScaleFactory
from .series import (
    CoefficientSeries,
    catalog,
    compose,
    convex_combination,
    product_complement,
    stopping_from_coefficients,
)

SIMPLE_ENTRIES = ("sqrt", "mobius_sqrt", "log2_sqrt", "exp_sqrt", "entropy")


# -- AST ----------------------------------------------------------------------


@dataclass(frozen=True)
class CatalogExpr:
    name: str
    a: Optional[Fraction] = None
    values: Optional[Tuple[Fraction, ...]] = None


@dataclass(frozen=True)
class ComposeExpr:
    inner: "SeriesExpr"
    outer: "SeriesExpr"
    order: int


@dataclass(frozen=True)
class PCExpr:
    c1: "SeriesExpr"
    c2: "SeriesExpr"


@dataclass(frozen=True)
class ConvexExpr:
    c1: "SeriesExpr"
    c2: "SeriesExpr"
    alpha: Fraction


SeriesExpr = (CatalogExpr, ComposeExpr, PCExpr, ConvexExpr)


@dataclass(frozen=True)
class ComplementExpr:
    child: "FactoryExpr"


@dataclass(frozen=True)
class FlipInputExpr:
    child: "FactoryExpr"


@dataclass(frozen=True)
class ScaleExpr:
    child: "FactoryExpr"
    alpha: Fraction


@dataclass(frozen=True)
class ProdExpr:
    f1: "FactoryExpr"
    f2: "FactoryExpr"


@dataclass(frozen=True)
class BaselineExpr:
    series: "SeriesExpr"


FactoryExpr = SeriesExpr + (ComplementExpr, FlipInputExpr, ScaleExpr, ProdExpr, BaselineExpr)


# -- tokenizer / parser ---------------------------------------------------------

_TOKEN = re.compile(r"\s*([A-Za-z_][A-Za-z_0-9]*|\d+\.\d+|\d+|[():,=\[\]/])")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens = []
        self.positions = []
        i = 0
        while i < len(text):
            m = _TOKEN.match(text, i)
            if not m:
                if text[i:].strip() == "":
                    break
                raise ExpressionError(f"unexpected character {text[i]!r}", i)
            self.tokens.append(m.group(1))
            self.positions.append(m.start(1))
            i = m.end()
        self.idx = 0

    def _where(self) -> int:
        return self.positions[self.idx] if self.idx < len(self.tokens) else len(self.text)

    def peek(self) -> Optional[str]:
        return self.tokens[self.idx] if self.idx < len(self.tokens) else None

    def take(self, expected: Optional[str] = None) -> str:
        tok = self.peek()
        if tok is None:
            raise ExpressionError(
                f"unexpected end of expression (wanted {expected!r})" if expected
                else "unexpected end of expression", len(self.text))
        if expected is not None and tok != expected:
            raise ExpressionError(f"expected {expected!r}, found {tok!r}", self._where())
        self.idx += 1
        return tok

    def number(self) -> Fraction:
        where = self._where()
        tok = self.take()
        if not re.fullmatch(r"\d+\.\d+|\d+", tok):
            raise ExpressionError(f"expected a number, found {tok!r}", where)
        if self.peek() == "/":
            self.take("/")
            den = self.take()
            if not den.isdigit():
                raise ExpressionError(f"expected a denominator, found {den!r}", self._where())
            return Fraction(int(tok), int(den))
        return Fraction(tok)

    def named_number(self, name: str) -> Fraction:
        # accepts both "alpha=1/2" and a bare "1/2"
        if self.peek() == name:
            self.take(name)
            self.take("=")
        return self.number()

    def series(self):
        where = self._where()
        tok = self.take()
        if tok == "power":
            self.take(":")
            self.take("a")
            self.take("=")
            a = self.number()
            try:
                return CatalogExpr("power", a=a)
            except Exception as exc:
                raise ExpressionError(str(exc), where)
        if tok == "finite":
            self.take(":")
            self.take("[")
            vals = [self.number()]
            while self.peek() == ",":
                self.take(",")
                vals.append(self.number())
            self.take("]")
            return CatalogExpr("finite", values=tuple(vals))
        if tok in SIMPLE_ENTRIES:
            return CatalogExpr(tok)
        if tok == "compose":
            self.take("(")
            inner = self.series()
            self.take(",")
            outer = self.series()
            self.take(",")
            if self.peek() == "order":
                self.take("order")
                self.take("=")
            order_tok = self.take()
            if not order_tok.isdigit():
                raise ExpressionError(f"expected an integer order, found {order_tok!r}",
                                      self._where())
            self.take(")")
            return ComposeExpr(inner, outer, int(order_tok))
        if tok == "pc":
            self.take("(")
            c1 = self.series()
            self.take(",")
            c2 = self.series()
            self.take(")")
            return PCExpr(c1, c2)
        if tok == "convex":
            self.take("(")
            c1 = self.series()
            self.take(",")
            c2 = self.series()
            self.take(",")
            alpha = self.named_number("alpha")
            self.take(")")
            return ConvexExpr(c1, c2, alpha)
        raise ExpressionError(f"unknown series {tok!r}", where)

    def factory(self):
        tok = self.peek()
        if tok == "complement":
            self.take(tok)
            self.take("(")
            child = self.factory()
            self.take(")")
            return ComplementExpr(child)
        if tok == "flip_input":
            self.take(tok)
            self.take("(")
            child = self.factory()
            self.take(")")
            return FlipInputExpr(child)
        if tok == "scale":
            self.take(tok)
            self.take("(")
            child = self.factory()
            self.take(",")
            alpha = self.named_number("alpha")
            self.take(")")
            return ScaleExpr(child, alpha)
        if tok == "prod":
            self.take(tok)
            self.take("(")
            f1 = self.factory()
            self.take(",")
            f2 = self.factory()
            self.take(")")
            return ProdExpr(f1, f2)
        if tok == "baseline":
            self.take(tok)
            self.take("(")
            s = self.series()
            self.take(")")
            return BaselineExpr(s)
        return self.series()


def parse_expression(text: str):
    """Parse a factory expression; raises ExpressionError with a position."""
    if not text or not text.strip():
        raise ExpressionError("empty expression", 0)
    parser = _Parser(text)
    tree = parser.factory()
    if parser.peek() is not None:
        raise ExpressionError(f"trailing input {parser.peek()!r}", parser._where())
    _validate(tree)
    return tree


def parse_series_expression(text: str):
    parser = _Parser(text)
    tree = parser.series()
    if parser.peek() is not None:
        raise ExpressionError(f"trailing input {parser.peek()!r}", parser._where())
    _validate(tree)
    return tree


def _validate(tree):
    # construct the series objects once: all range checks happen there
    build_factory_probe(tree)


def is_series(tree) -> bool:
    return isinstance(tree, SeriesExpr)


def build_factory_probe(tree):
    """Range-check a factory tree without committing to an algorithm."""
    if isinstance(tree, SeriesExpr):
        build_series(tree)
        return
    if isinstance(tree, (ComplementExpr, FlipInputExpr)):
        build_factory_probe(tree.child)
        return
    if isinstance(tree, ScaleExpr):
        if not 0 < tree.alpha <= 1:
            raise ParameterError("scale weight must satisfy 0 < alpha <= 1")
        build_factory_probe(tree.child)
        return
    if isinstance(tree, ProdExpr):
        build_factory_probe(tree.f1)
        build_factory_probe(tree.f2)
        return
    if isinstance(tree, BaselineExpr):
        build_series(tree.series)
        return
    raise ExpressionError(f"unknown node {tree!r}")


# -- canonical printer -----------------------------------------------------------


def _fmt_number(fr: Fraction) -> str:
    return str(fr.numerator) if fr.denominator == 1 else f"{fr.numerator}/{fr.denominator}"


def print_expression(tree) -> str:
    if isinstance(tree, CatalogExpr):
        if tree.name == "power":
            return f"power:a={_fmt_number(tree.a)}"
        if tree.name == "finite":
            return "finite:[" + ",".join(_fmt_number(v) for v in tree.values) + "]"
        return tree.name
    if isinstance(tree, ComposeExpr):
        return (f"compose({print_expression(tree.inner)},{print_expression(tree.outer)},"
                f"order={tree.order})")
    if isinstance(tree, PCExpr):
        return f"pc({print_expression(tree.c1)},{print_expression(tree.c2)})"
    if isinstance(tree, ConvexExpr):
        return (f"convex({print_expression(tree.c1)},{print_expression(tree.c2)},"
                f"alpha={_fmt_number(tree.alpha)})")
    if isinstance(tree, ComplementExpr):
        return f"complement({print_expression(tree.child)})"
    if isinstance(tree, FlipInputExpr):
        return f"flip_input({print_expression(tree.child)})"
    if isinstance(tree, ScaleExpr):
        return f"scale({print_expression(tree.child)},alpha={_fmt_number(tree.alpha)})"
    if isinstance(tree, ProdExpr):
        return f"prod({print_expression(tree.f1)},{print_expression(tree.f2)})"
    if isinstance(tree, BaselineExpr):
        return f"baseline({print_expression(tree.series)})"
    raise ExpressionError(f"unknown node {tree!r}")


# -- builders ---------------------------------------------------------------------

_SERIES_CACHE: dict = {}


def build_series(tree) -> CoefficientSeries:
    """Construct (and cache) the coefficient series of a series expression."""
    key = tree
    got = _SERIES_CACHE.get(key)
    if got is not None:
        return got
    if isinstance(tree, CatalogExpr):
        if tree.name == "power":
            out = catalog("power", a=tree.a)
        elif tree.name == "finite":
            out = catalog("finite", values=list(tree.values))
        else:
            out = catalog(tree.name)
    elif isinstance(tree, ComposeExpr):
        out = compose(build_series(tree.inner), build_series(tree.outer), tree.order)
    elif isinstance(tree, PCExpr):
        out = product_complement(build_series(tree.c1), build_series(tree.c2))
    elif isinstance(tree, ConvexExpr):
        out = convex_combination(build_series(tree.c1), build_series(tree.c2), tree.alpha)
    else:
        raise ExpressionError(f"not a series expression: {tree!r}")
    _SERIES_CACHE[key] = out
    return out


ALGORITHMS = ("rand", "nonrand", "baseline")

_STOPPING_CACHE: dict = {}


def stopping_for(tree):
    key = tree
    got = _STOPPING_CACHE.get(key)
    if got is None:
        got = stopping_from_coefficients(build_series(tree))
        _STOPPING_CACHE[key] = got
    return got


def build_factory(tree, algo: str = "rand", cap: int = 1_000_000,
                  dyadic_shortcut: bool = False, digit_ceiling: int = 4096) -> Factory:
    """Object-level sampler for a factory expression under the chosen algorithm.

    `algo` decides how bare series are sampled; `baseline(...)` nodes force the
    two-phase baseline for their subtree regardless.  Under `nonrand`, scale
    nodes draw their alpha-coin from fair bits so no uniforms are ever used,
    and baseline nodes are rejected (there is no non-randomized two-phase
    variant).
    """
    if algo not in ALGORITHMS:
        raise ParameterError(f"unknown algorithm {algo!r}; choose from {ALGORITHMS}")
    if isinstance(tree, SeriesExpr):
        d = stopping_for(tree)
        if algo == "rand":
            return AlgorithmOneFactory(d)
        if algo == "baseline":
            return TwoPhaseBaselineFactory(d, cap=cap)
        return AlgorithmTwoFactory(d, dyadic_shortcut=dyadic_shortcut,
                                   precision_ceiling=digit_ceiling)
    if isinstance(tree, BaselineExpr):
        if algo == "nonrand":
            raise ParameterError("baseline(...) requires the randomized mode")
        return TwoPhaseBaselineFactory(stopping_for(tree.series), cap=cap)
    kw = dict(algo=algo, cap=cap, dyadic_shortcut=dyadic_shortcut,
              digit_ceiling=digit_ceiling)
    if isinstance(tree, ComplementExpr):
        return transform_output_complement(build_factory(tree.child, **kw))
    if isinstance(tree, FlipInputExpr):
        return transform_input_complement(build_factory(tree.child, **kw))
    if isinstance(tree, ScaleExpr):
        inner = build_factory(tree.child, **kw)
        if algo == "nonrand":
            return FairBitScaleFactory(inner, tree.alpha, dyadic_shortcut=dyadic_shortcut)
        return transform_scale(inner, tree.alpha)
    if isinstance(tree, ProdExpr):
        return transform_product(build_factory(tree.f1, **kw), build_factory(tree.f2, **kw))
    raise ExpressionError(f"unknown node {tree!r}")
