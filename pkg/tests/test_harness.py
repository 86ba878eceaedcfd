import json
import math
from fractions import Fraction

import pytest

from coinfactory.engine import run_cell
from coinfactory.expr import parse_expression
from coinfactory.harness import (
    ExperimentSpec,
    exact_expected_inputs,
    exact_function_value,
    run,
    sweep_optimality,
    tail_bound_gates,
    test_joint_law as joint_law_check,
)
from coinfactory.series import catalog

F = Fraction


def spec(expression, ps, reps=20000, seed=2024, **kw):
    return ExperimentSpec(expression=expression, p_grid=ps, reps=reps, seed=seed, **kw)


def test_report_is_deterministic_and_serializable():
    s = spec("sqrt", [F(1, 4), F(1, 2)], reps=5000)
    r1, r2 = run(s), run(spec("sqrt", [F(1, 4), F(1, 2)], reps=5000))
    assert r1.to_json() == r2.to_json()
    assert r1.to_csv() == r2.to_csv()
    payload = json.loads(r1.to_json())
    assert payload["schema_version"] == 1
    assert payload["generator"] == "splitmix64-counter/v1"
    assert len(payload["rows"]) == 2
    header = r1.to_csv().splitlines()[0]
    assert header.split(",")[:3] == ["p", "reps", "count"]


def test_grid_order_does_not_matter():
    a = run(spec("sqrt", [F(1, 4), F(1, 2)], reps=3000))
    b = run(spec("sqrt", [F(1, 2), F(1, 4)], reps=3000))
    row_a = {r.p: (r.mean_y, r.mean_n) for r in a.rows}
    row_b = {r.p: (r.mean_y, r.mean_n) for r in b.rows}
    assert row_a == row_b


def test_worker_invariance_at_report_level():
    a = run(spec("sqrt", [F(1, 4)], reps=6000, workers=1))
    b = run(spec("sqrt", [F(1, 4)], reps=6000, workers=3))
    assert a.to_json() == b.to_json()


def test_identity_series_row():
    r = run(spec("finite:[1]", [F(3, 10)], reps=20000))
    row = r.rows[0]
    assert row.mean_n == 1.0
    assert row.pass_y and row.pass_n
    assert abs(row.mean_y - 0.3) < 5 * math.sqrt(0.3 * 0.7 / 20000)
    assert row.expected_n == pytest.approx(1.0)


def test_sqrt_gates_pass():
    r = run(spec("sqrt", [F(1, 4)], reps=50000))
    row = r.rows[0]
    assert row.pass_y and row.pass_n
    assert row.y_ci[0] <= 0.5 <= row.y_ci[1]
    assert row.n_ci[0] <= 2.0 <= row.n_ci[1]
    assert row.exact_f == pytest.approx(0.5, abs=1e-9)
    assert row.expected_n == pytest.approx(2.0, abs=1e-9)


def test_nonrand_run_reports_zero_uniforms():
    r = run(spec("sqrt", [F(1, 2)], reps=10000, algorithm="nonrand"))
    row = r.rows[0]
    assert row.uniform_draws == 0
    assert row.expected_n == pytest.approx(9 * math.sqrt(2), abs=1e-8)
    assert row.pass_n
    assert row.mean_n_outer == pytest.approx(math.sqrt(0.5) / 0.5, abs=0.1)


def test_baseline_run_reports_truncations_separately():
    r = run(spec("sqrt", [F(1, 2)], reps=5000, algorithm="baseline", cap=500))
    row = r.rows[0]
    assert row.expected_n is None and row.pass_n is None
    assert row.truncated > 0
    assert row.count + row.truncated == 5000
    csv_text = r.to_csv()
    assert csv_text.count("\n") == 2


def test_exact_reference_algebra():
    quarter = F(1, 4)
    three_quarters = F(3, 4)
    assert exact_function_value(parse_expression("complement(sqrt)"), quarter).value \
        == pytest.approx(0.5, abs=1e-9)
    assert exact_function_value(parse_expression("flip_input(sqrt)"), three_quarters).value \
        == pytest.approx(0.5, abs=1e-9)
    assert exact_function_value(parse_expression("scale(sqrt,alpha=1/2)"), quarter).value \
        == pytest.approx(0.25, abs=1e-9)
    assert exact_function_value(parse_expression("prod(sqrt,sqrt)"), quarter).value \
        == pytest.approx(0.25, abs=1e-9)
    en = exact_expected_inputs(parse_expression("prod(sqrt,sqrt)"), "rand", quarter)
    assert en.value == pytest.approx(2 + 0.5 * 2, abs=1e-8)
    en_scale = exact_expected_inputs(parse_expression("scale(sqrt,alpha=1/2)"), "rand", quarter)
    assert en_scale.value == pytest.approx(1.0, abs=1e-8)
    assert exact_expected_inputs(parse_expression("baseline(sqrt)"), "rand", quarter) is None


def test_transform_rows_pass_gates():
    for expr, algo in [
        ("complement(sqrt)", "rand"),
        ("flip_input(sqrt)", "rand"),
        ("scale(sqrt,alpha=1/2)", "rand"),
        ("prod(sqrt,entropy)", "rand"),
        ("complement(sqrt)", "nonrand"),
    ]:
        r = run(spec(expr, [F(1, 4), F(3, 5)], reps=20000, algorithm=algo))
        for row in r.rows:
            assert row.pass_y, (expr, algo, row.p)
            assert row.pass_n is not False, (expr, algo, row.p)


def test_joint_law_sqrt():
    tree = parse_expression("sqrt")
    cell = run_cell(tree, "rand", F(1, 4), 100000, 31337)
    result = joint_law_check(cell, catalog("sqrt"), F(1, 4))
    assert result.passed
    first = result.cells[0]
    assert first.n == 1
    assert first.expected == pytest.approx(100000 * 0.375, rel=1e-12)
    assert result.chi2_p_value >= 1e-3


def test_joint_law_entropy_zero_cell():
    tree = parse_expression("entropy")
    cell = run_cell(tree, "rand", F(1, 2), 50000, 7)
    assert cell.hist_y0[1] == 0  # d_1 = 0: stopping with Y=0 at n=1 impossible
    result = joint_law_check(cell, catalog("entropy"), F(1, 2))
    assert result.passed
    assert result.cells[0].expected == 0.0


def test_tail_envelope_gates():
    for name in ("sqrt", "entropy", "mobius_sqrt"):
        tree = parse_expression(name)
        cell = run_cell(tree, "rand", F(1, 4), 50000, 99)
        gates = tail_bound_gates(cell, F(1, 4))
        assert len(gates) == 30
        assert all(g.passed for g in gates), name


def test_sweep_optimality_ratio_and_slope():
    grid = [F(1, 2 ** k) for k in range(2, 7)]
    report = sweep_optimality(["sqrt"], grid, reps=20000, seed=5)
    assert report.all_pass()
    assert report.slopes["sqrt"] == pytest.approx(-0.5, abs=0.05)
    for row in report.rows:
        assert row.ratio == pytest.approx(1.0, abs=0.05)
