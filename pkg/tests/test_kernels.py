"""Backend equivalence: object path, pure kernel, compiled kernel must agree
bit-for-bit on matched streams."""

import math
from fractions import Fraction

import pytest

import coinfactory._kernels as kernels
import coinfactory._kernels.plan as plan_module
import coinfactory.engine as engine
from coinfactory.engine import run_cell, run_von_neumann
from coinfactory.errors import TruncationLimitError
from coinfactory.expr import build_factory, parse_expression
from coinfactory.factory import source_pair
from coinfactory.tables import KIND_BAND

F = Fraction

HAS_COMPILED = kernels.compiled is not None

CASES = [
    ("sqrt", "rand", F(1, 4), {}),
    ("power:a=1/3", "rand", F(9, 10), {}),
    ("entropy", "rand", F(1, 2), {}),
    ("finite:[1/2,1/4,1/4]", "rand", F(1, 3), {}),
    ("log2_sqrt", "rand", F(1, 4), {}),
    ("exp_sqrt", "rand", F(3, 4), {}),
    ("mobius_sqrt", "nonrand", F(1, 2), {}),
    ("finite:[3/4,1/4]", "nonrand", F(1, 2), {}),
    ("finite:[3/4,1/4]", "nonrand", F(1, 2), {"dyadic_shortcut": True}),
    ("sqrt", "baseline", F(1, 2), {"cap": 1000}),
    ("entropy", "baseline", F(1, 2), {"cap": 100}),
    ("complement(flip_input(sqrt))", "rand", F(1, 4), {}),
    ("scale(prod(sqrt,entropy),alpha=1/3)", "rand", F(1, 2), {}),
    ("scale(sqrt,alpha=1/3)", "nonrand", F(1, 2), {}),
    ("scale(mobius_sqrt,alpha=1/4)", "nonrand", F(1, 3), {"dyadic_shortcut": True}),
    ("convex(power:a=1/2,entropy,alpha=3/10)", "rand", F(2, 5), {}),
    ("pc(finite:[1],sqrt)", "rand", F(1, 2), {}),
    ("compose(sqrt,sqrt,order=32)", "rand", F(1, 2), {}),
]

REPS = 1500
SEED = 20240817


def object_aggregates(expression, algo, p, reps, seed, cap=1_000_000,
                      dyadic_shortcut=False):
    tree = parse_expression(expression)
    factory = build_factory(tree, algo=algo, cap=cap, dyadic_shortcut=dyadic_shortcut)
    agg = {"count": 0, "sum_y": 0, "sum_n": 0, "sum_n2": 0, "trunc": 0,
           "uniform_draws": 0}
    for rep in range(reps):
        coins, uniforms = source_pair(seed, rep, p=p)
        try:
            out = factory.sample(coins, uniforms)
        except TruncationLimitError:
            agg["trunc"] += 1
            continue
        agg["count"] += 1
        agg["sum_y"] += out.y
        agg["sum_n"] += out.n
        agg["sum_n2"] += out.n * out.n
        agg["uniform_draws"] += uniforms.draws
        assert out.n == coins.draws
    return agg


@pytest.mark.parametrize("expression,algo,p,opts", CASES)
def test_pure_kernel_matches_object_path(expression, algo, p, opts):
    tree = parse_expression(expression)
    cell = run_cell(tree, algo, p, REPS, SEED, backend="pure", **opts)
    obj = object_aggregates(expression, algo, p, REPS, SEED,
                            cap=opts.get("cap", 1_000_000),
                            dyadic_shortcut=opts.get("dyadic_shortcut", False))
    assert cell.count == obj["count"]
    assert cell.sum_y == obj["sum_y"]
    assert cell.sum_n == obj["sum_n"]
    assert cell.sum_n2 == obj["sum_n2"]
    assert cell.trunc == obj["trunc"]
    assert cell.uniform_draws == obj["uniform_draws"]


@pytest.mark.skipif(not HAS_COMPILED, reason="compiled kernel unavailable")
@pytest.mark.parametrize("expression,algo,p,opts", CASES)
def test_compiled_kernel_matches_pure(expression, algo, p, opts):
    tree = parse_expression(expression)
    a = run_cell(tree, algo, p, REPS, SEED, backend="pure", **opts)
    b = run_cell(tree, algo, p, REPS, SEED, backend="compiled", **opts)
    assert (a.count, a.sum_y, a.sum_n, a.sum_n2) == (b.count, b.sum_y, b.sum_n, b.sum_n2)
    assert (a.sum_outer, a.sum_pairs, a.trunc, a.max_n) == \
        (b.sum_outer, b.sum_pairs, b.trunc, b.max_n)
    assert a.uniform_draws == b.uniform_draws
    assert a.hist == b.hist
    assert a.hist_y0 == b.hist_y0
    assert a.hist_outer == b.hist_outer


def test_worker_count_does_not_change_report():
    tree = parse_expression("sqrt")
    one = run_cell(tree, "rand", F(1, 4), 5000, 99, workers=1)
    three = run_cell(tree, "rand", F(1, 4), 5000, 99, workers=3)
    seven = run_cell(tree, "rand", F(1, 4), 5000, 99, workers=7)
    for other in (three, seven):
        assert one.sum_y == other.sum_y
        assert one.sum_n == other.sum_n
        assert one.hist == other.hist
        assert one.hist_y0 == other.hist_y0


def test_seed_changes_results():
    tree = parse_expression("sqrt")
    a = run_cell(tree, "rand", F(1, 4), 3000, 1)
    b = run_cell(tree, "rand", F(1, 4), 3000, 2)
    assert (a.sum_y, a.sum_n) != (b.sum_y, b.sum_n)


def test_von_neumann_backends_agree():
    a = run_von_neumann(F(1, 10), 5000, 7, backend="pure")
    if HAS_COMPILED:
        b = run_von_neumann(F(1, 10), 5000, 7, backend="compiled")
        assert (a.sum_bits, a.sum_pairs, a.hist) == (b.sum_bits, b.sum_pairs, b.hist)
    assert abs(a.mean_bit() - 0.5) < 5 * math.sqrt(0.25 / 5000)
    theta = 2 * 0.1 * 0.9
    assert abs(a.mean_pairs() - 1 / theta) < 5 * math.sqrt((1 - theta) / theta ** 2 / 5000)


def test_depth_bail_extension_loop(monkeypatch):
    # start the baseline table tiny so replications outrun it and the driver
    # must extend + re-run; the final aggregates must match a clean run
    engine._PLAN_CACHE.clear()
    tree = parse_expression("baseline(sqrt)")
    clean = run_cell(tree, "rand", F(1, 2), 2000, 5, cap=50000)
    engine._PLAN_CACHE.clear()
    monkeypatch.setattr(plan_module, "BASELINE_PREPARE_DEPTH", 4)
    forced = run_cell(tree, "rand", F(1, 2), 2000, 5, cap=50000)
    engine._PLAN_CACHE.clear()
    assert (forced.sum_y, forced.sum_n, forced.trunc) == (clean.sum_y, clean.sum_n, clean.trunc)
    assert forced.hist == clean.hist


def test_band_entries_fall_back_to_object_path():
    # corrupt one table entry into an unresolved band: every replication must
    # bail out of the kernel and come back identical through the object path
    engine._PLAN_CACHE.clear()
    tree = parse_expression("sqrt")
    clean = run_cell(tree, "rand", F(1, 4), 800, 13)
    plan = engine.plan_for(tree, "rand", 1_000_000, False, 4096)
    original = plan.tables[0].kinds[0]
    plan.tables[0].kinds[0] = KIND_BAND
    try:
        forced = run_cell(tree, "rand", F(1, 4), 800, 13)
    finally:
        plan.tables[0].kinds[0] = original
        engine._PLAN_CACHE.clear()
    assert forced.object_resolved == 800
    assert (forced.sum_y, forced.sum_n) == (clean.sum_y, clean.sum_n)
    assert forced.uniform_draws == clean.uniform_draws
