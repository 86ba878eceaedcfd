import math
from fractions import Fraction

import pytest

from coinfactory.errors import ParameterError
from coinfactory.factory import ListCoin, SimulatedCoin, source_pair
from coinfactory.nonrand import (
    AlgorithmTwoFactory,
    FairBitScaleFactory,
    digit_oracle_from,
    sample_algorithm2,
    von_neumann_bit,
)
from coinfactory.factory import AlgorithmOneFactory
from coinfactory.rng import DOMAIN_COIN, Stream
from coinfactory.series import catalog, stopping_from_coefficients

F = Fraction


def finite_stopping(*values):
    return stopping_from_coefficients(catalog("finite", values=list(values)))


# -- digit oracle -------------------------------------------------------------


def test_oracle_digits_dyadic_and_one():
    d = finite_stopping(F(3, 4), F(1, 4))  # d_1 = 3/4, d_2 = 1
    oracle = digit_oracle_from(d)
    assert [oracle.digit_at(1, j) for j in range(1, 8)] == [1, 1, 0, 0, 0, 0, 0]
    assert [oracle.digit_at(2, j) for j in range(1, 8)] == [1] * 7
    assert oracle.eventually_constant_from(1) == (3, 0)
    assert oracle.eventually_constant_from(2) == (1, 1)


def test_oracle_digits_one_third():
    d = finite_stopping(F(1, 3), F(2, 3))  # d_1 = 1/3
    oracle = digit_oracle_from(d)
    assert [oracle.digit_at(1, j) for j in range(1, 9)] == [0, 1, 0, 1, 0, 1, 0, 1]
    assert oracle.eventually_constant_from(1) is None


def test_oracle_interval_backed_digits():
    d = stopping_from_coefficients(catalog("log2_sqrt"))
    oracle = digit_oracle_from(d)
    # d_1 = 1/(4 ln 2) ~ 0.36067...; check leading digits against the float
    val = 1 / (4 * math.log(2))
    got = sum(oracle.digit_at(1, j) * 2.0 ** -j for j in range(1, 40))
    assert abs(got - val) < 2.0 ** -38
    assert oracle.eventually_constant_from(1) is None


def test_oracle_rejects_unknown_convention():
    with pytest.raises(ParameterError):
        digit_oracle_from(finite_stopping(F(1)), convention="terminate-ones")


# -- von Neumann extraction -----------------------------------------------------


def test_von_neumann_mechanical_traces():
    bit, pairs = von_neumann_bit(ListCoin([0, 1]))
    assert (bit, pairs) == (0, 1)
    bit, pairs = von_neumann_bit(ListCoin([1, 1, 0, 0, 1, 0]))
    assert (bit, pairs) == (1, 3)


def test_von_neumann_fairness_and_pair_cost():
    for p, seed in ((F(1, 10), 101), (F(1, 2), 102), (F(9, 10), 103)):
        reps = 20000
        ones = 0
        total_pairs = 0
        for rep in range(reps):
            coins = SimulatedCoin(p, Stream(seed, rep, DOMAIN_COIN))
            bit, pairs = von_neumann_bit(coins)
            ones += bit
            total_pairs += pairs
        se_bit = math.sqrt(0.25 / reps)
        assert abs(ones / reps - 0.5) < 5 * se_bit, p
        theta = float(2 * p * (1 - p))
        mean_pairs = 1 / theta
        se_pairs = math.sqrt((1 - theta) / theta ** 2 / reps)
        assert abs(total_pairs / reps - mean_pairs) < 5 * se_pairs, p


# -- the non-randomized sampler ---------------------------------------------------


def test_identity_series_law_preserved():
    d = finite_stopping(F(1))
    reps = 20000
    ones = 0
    for rep in range(reps):
        coins, _ = source_pair(7, rep, p=F(1, 4))
        out = sample_algorithm2(d, digit_oracle_from(d), coins)
        ones += out.y
        assert out.n_total == coins.draws
        assert out.n_total >= 3  # one outer coin plus at least one pair
    assert abs(ones / reps - 0.25) < 5 * math.sqrt(0.25 * 0.75 / reps)


def test_cost_accounting_identity():
    d = stopping_from_coefficients(catalog("sqrt"))
    oracle = digit_oracle_from(d)
    for rep in range(500):
        coins, _ = source_pair(19, rep, p=F(1, 2))
        out = sample_algorithm2(d, oracle, coins, collect_pairs=True)
        assert len(out.pair_counts) == out.n_outer
        assert out.n_total == out.n_outer + 2 * sum(out.pair_counts)
        assert out.n_total == coins.draws


def test_sqrt_cost_formula_at_half():
    # E[n_total] = (f/p)(1 + 2/(p(1-p))) = sqrt(2) * 9 ~ 12.7279
    d = stopping_from_coefficients(catalog("sqrt"))
    fac = AlgorithmTwoFactory(d)
    reps = 20000
    total = 0
    vals = []
    for rep in range(reps):
        coins, _ = source_pair(43, rep, p=F(1, 2))
        out = fac.sample_detailed(coins)
        total += out.n_total
        vals.append(out.n_total)
    mean = total / reps
    target = math.sqrt(2) * 9
    sd = math.sqrt(sum((v - mean) ** 2 for v in vals) / (reps - 1))
    assert abs(mean - target) < 5 * sd / math.sqrt(reps)


def test_law_matches_randomized_sampler():
    series = catalog("sqrt")
    d = stopping_from_coefficients(series)
    reps = 20000
    ones2 = 0
    for rep in range(reps):
        coins, _ = source_pair(61, rep, p=F(1, 4))
        ones2 += sample_algorithm2(d, digit_oracle_from(d), coins).y
    ones1 = 0
    for rep in range(reps):
        coins, uniforms = source_pair(62, rep, p=F(1, 4))
        ones1 += AlgorithmOneFactory(d).sample(coins, uniforms).y
    p1, p2 = ones1 / reps, ones2 / reps
    pooled = (ones1 + ones2) / (2 * reps)
    z = (p1 - p2) / math.sqrt(pooled * (1 - pooled) * 2 / reps)
    assert abs(z) < 5


def test_outcome_uses_no_uniforms():
    # structural: the sampler has no uniform argument, and the factory wrapper
    # never touches the uniform source it is handed
    class Exploding:
        draws = 0

        def next_uniform(self):
            raise AssertionError("uniform source consulted by non-randomized path")

    d = stopping_from_coefficients(catalog("sqrt"))
    fac = AlgorithmTwoFactory(d)
    for rep in range(100):
        coins, _ = source_pair(71, rep, p=F(1, 2))
        fac.sample(coins, Exploding())


def test_dyadic_shortcut_skips_forced_digits():
    d = finite_stopping(F(1))
    fac = AlgorithmTwoFactory(d, dyadic_shortcut=True)
    for rep in range(50):
        coins, _ = source_pair(83, rep, p=F(1, 4))
        out = fac.sample_detailed(coins)
        assert out.n_total == 1  # digits all ones: V_1 = 1 with zero pairs
        assert out.pair_counts is None or sum(out.pair_counts) == 0

    # law unchanged with the shortcut on a dyadic mix
    d2 = finite_stopping(F(3, 4), F(1, 4))
    reps = 20000
    ones_fast = ones_slow = 0
    for rep in range(reps):
        coins, _ = source_pair(91, rep, p=F(1, 2))
        ones_fast += AlgorithmTwoFactory(d2, dyadic_shortcut=True).sample_detailed(coins).y
    for rep in range(reps):
        coins, _ = source_pair(92, rep, p=F(1, 2))
        ones_slow += AlgorithmTwoFactory(d2).sample_detailed(coins).y
    z = (ones_fast - ones_slow) / math.sqrt(2 * reps * 0.25)
    assert abs(z) < 5


def test_fair_bit_scale_preserves_zero_uniforms():
    d = finite_stopping(F(1))
    fac = FairBitScaleFactory(AlgorithmTwoFactory(d), F(1, 2))
    assert fac.uses_uniforms is False
    reps = 20000
    ones = 0
    for rep in range(reps):
        coins, _ = source_pair(87, rep, p=F(1, 2))
        ones += fac.sample(coins, None).y
    # alpha * p = 0.25
    assert abs(ones / reps - 0.25) < 5 * math.sqrt(0.25 * 0.75 / reps)
