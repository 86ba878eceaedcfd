"""Distributional invariants of the non-randomized sampler at module scale:
law equivalence with the randomized sampler, the geometric inner law, the
outer-loop law, exponential tails, and the cost grid over all catalog entries."""

import math
from fractions import Fraction

import pytest

from coinfactory.analysis import eval_f, expected_inputs_alg2
from coinfactory.engine import run_cell, run_von_neumann
from coinfactory.expr import build_series, parse_expression
from coinfactory.harness import cell_seed
from coinfactory.stats import chi2_goodness, chi2_two_sample, fit_loglog_slope, two_proportion_z

F = Fraction
SEED = 424242
M = 100_000

ENTRIES = [
    "power:a=1/3", "sqrt", "mobius_sqrt", "log2_sqrt", "exp_sqrt", "entropy",
    "finite:[1/2,1/4,1/4]",
]


@pytest.mark.parametrize("p", [F(1, 4), F(1, 2), F(3, 4)])
def test_law_equivalence_with_randomized_sampler(p):
    tree = parse_expression("sqrt")
    a = run_cell(tree, "rand", p, M, cell_seed(SEED, p))
    b = run_cell(tree, "nonrand", p, M, cell_seed(SEED + 1, p))
    z = two_proportion_z(a.sum_y, a.count, b.sum_y, b.count)
    assert abs(z) < 4, (str(p), z)


def test_nonrand_cost_grid_all_entries():
    for expression in ENTRIES:
        series = build_series(parse_expression(expression))
        for p in (F(1, 10), F(1, 2), F(9, 10)):
            cell = run_cell(parse_expression(expression), "nonrand", p, M,
                            cell_seed(SEED + 2, p))
            en = expected_inputs_alg2(series, p)
            se = math.sqrt(cell.var_n() / cell.count)
            assert abs(cell.mean_n() - en.value) <= 4 * se + en.error_bound, \
                (expression, str(p), cell.mean_n(), en.value)
            assert cell.uniform_draws == 0


def test_rand_law_grid_all_entries():
    # mean Y within 4 sigma of the exact value for every entry at module scale
    for expression in ENTRIES:
        series = build_series(parse_expression(expression))
        for p in (F(1, 10), F(1, 2), F(9, 10)):
            cell = run_cell(parse_expression(expression), "rand", p, M,
                            cell_seed(SEED + 3, p))
            f = eval_f(series, p)
            se = math.sqrt(f.value * (1 - f.value) / cell.count)
            assert abs(cell.mean_y() - f.value) <= 4 * se + f.error_bound, \
                (expression, str(p))


def test_inner_geometric_law():
    # pair counts follow Geometric(2p(1-p)): chi-square over the first 10 cells
    for p in (F(3, 10), F(1, 2)):
        vn = run_von_neumann(p, 1_000_000, cell_seed(SEED + 4, p))
        theta = float(2 * p * (1 - p))
        expected = [vn.reps * theta * (1 - theta) ** (k - 1) for k in range(1, 11)]
        chi = chi2_goodness(vn.hist[1:11], expected, sample_size=vn.reps)
        assert chi.passed(1e-3), (str(p), chi.p_value)


def test_outer_loop_matches_randomized_stopping_time():
    p = F(1, 2)
    a = run_cell(parse_expression("sqrt"), "rand", p, M, cell_seed(SEED + 5, p))
    b = run_cell(parse_expression("sqrt"), "nonrand", p, M, cell_seed(SEED + 6, p))
    chi = chi2_two_sample(a.hist[1:40], b.hist_outer[1:40])
    assert chi.passed(1e-3), chi.p_value


def test_total_inputs_tail_decays_exponentially():
    p = F(1, 2)
    cell = run_cell(parse_expression("sqrt"), "nonrand", p, M, cell_seed(SEED + 7, p))
    tail = cell.tail_curve()
    # log Pr[N > n] against n over the well-populated range: slope must be
    # negative and the fit must track the data (exponential tail, qualitative)
    points = [(n, pr) for n, pr in tail if pr > 50 / M and n >= 1]
    assert len(points) > 20
    ns = [float(n) for n, _ in points]
    prs = [pr for _, pr in points]
    slope_log2, _ = fit_loglog_slope([2.0 ** n for n in ns], prs)  # log2 pr vs n
    assert slope_log2 < -0.01
    # the far tail sits below an envelope extrapolated from the median tail
    mid = points[len(points) // 2]
    envelope = prs[0] * (2.0 ** (slope_log2 * 0.5 * (mid[0] - ns[0])))
    assert mid[1] <= envelope
