import json
import random
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from czweights.geometry import (
    Interval,
    PiecewiseConstant,
    PiecewiseLinear,
    StepFunction,
    as_fraction,
    pc_power_integral,
    pl_derivative,
    pl_sup_norm,
    power,
    prefix_tables,
)
from czweights.sequences import build_table

HALF = Fraction(1, 2)
TWO_PIECE = PiecewiseConstant([0, HALF, 1], [1, HALF])


def one_plus_sqrt2_half():
    # oracle: 1/2 * 1 + 1/2 * (1/2)^(-1/2) = (1 + sqrt 2) / 2
    with mpmath.workprec(113):
        return (1 + mpmath.sqrt(2)) / 2


def test_interval_rejects_empty():
    with pytest.raises(ValueError):
        Interval(Fraction(1), Fraction(1))


def test_constant_weight_power_integral():
    w = PiecewiseConstant([0, 1], [1])
    assert pc_power_integral(w, Interval(0, 1), Fraction(-1, 2)) == 1


def test_two_piece_linear_integral():
    assert pc_power_integral(TWO_PIECE, Interval(0, 1), 1) == Fraction(3, 4)


def test_two_piece_negative_half_power():
    v = pc_power_integral(TWO_PIECE, Interval(0, 1), Fraction(-1, 2))
    with mpmath.workprec(113):
        assert abs(v - one_plus_sqrt2_half()) < mpmath.mpf(2) ** -105


def test_exterior_is_used():
    assert pc_power_integral(TWO_PIECE, Interval(-1, 2), 1) == Fraction(11, 4)


def test_derivative_and_sup_norm():
    u = PiecewiseLinear((0, HALF, 1), (0, Fraction(1, 3), 0))
    assert list(pl_derivative(u).values) == [Fraction(2, 3), Fraction(-2, 3)]
    assert pl_sup_norm(u) == Fraction(1, 3)


def test_zero_function():
    u = PiecewiseLinear((0, 1), (0, 0))
    assert pl_derivative(u).values == (0,)
    assert pl_sup_norm(u) == 0


def test_single_tooth_slopes_n1():
    t = build_table(1)
    u = PiecewiseLinear.from_slopes(0, [t.h_(1), t.b], [t.alpha_(1), t.beta])
    assert list(pl_derivative(u).values) == [t.h_(1), t.b]
    assert u(1) == 0


def test_n1_sup_norm_scales_with_teeth():
    t = build_table(1)
    for m in (1, 2, 8):
        u = PiecewiseLinear.from_slopes(0, [t.h_(1), t.b] * m, [t.alpha_(1) / m, t.beta / m] * m)
        assert pl_sup_norm(u) <= t.alpha_(1) * abs(t.h_(1)) / m


def test_prefix_tables_examples():
    ones = PiecewiseConstant([0, HALF, 1], [1, 2])
    assert prefix_tables(PiecewiseConstant([0, 1, 3], [1, 1]), 1).sums == (0, 3)  # merged to one piece
    assert prefix_tables(ones, 1).sums == (0, HALF, Fraction(3, 2))
    assert prefix_tables(TWO_PIECE, 1).sums == (0, HALF, Fraction(3, 4))
    s = prefix_tables(TWO_PIECE, Fraction(-1, 2)).sums
    with mpmath.workprec(113):
        assert s[1] == HALF
        assert abs(s[2] - (HALF + mpmath.sqrt(2) / 2)) < mpmath.mpf(2) ** -105


def test_piece_merging_is_canonical():
    a = PiecewiseConstant([0, HALF, 1], [3, 3])
    b = PiecewiseConstant([0, 1], [3])
    assert a == b


def test_weights_must_be_positive():
    with pytest.raises(ValueError):
        PiecewiseConstant([0, 1], [0])


def test_as_fraction_forms():
    assert as_fraction("3/8") == Fraction(3, 8)
    assert as_fraction(0.5) == HALF
    assert as_fraction([3, 4]) == Fraction(3, 4)
    with pytest.raises(TypeError):
        as_fraction(True)


def test_power_exact_for_integers():
    assert power(Fraction(2, 3), 3) == Fraction(8, 27)
    assert isinstance(power(Fraction(2), 0.5), mpmath.mpf)


def test_json_roundtrip():
    w = PiecewiseConstant([0, Fraction(1, 3), 1], [Fraction(5, 7), 2])
    assert PiecewiseConstant.from_json(json.loads(json.dumps(w.to_json()))) == w
    u = PiecewiseLinear((0, HALF, 1), (0, Fraction(1, 3), 0))
    assert PiecewiseLinear.from_json(u.to_json()) == u


def _random_weight(rng, pieces):
    xs = sorted({Fraction(rng.randint(0, 1024), 1024) for _ in range(pieces + 1)})
    if len(xs) < 2:
        xs = [Fraction(0), Fraction(1)]
    return PiecewiseConstant(xs, [Fraction(rng.randint(1, 64), 16) for _ in range(len(xs) - 1)])


@given(st.integers(0, 10**6), st.sampled_from([1, 2, -1, Fraction(-1, 2), Fraction(1, 3)]))
@settings(max_examples=40, deadline=None)
def test_additivity(seed, gamma):
    rng = random.Random(seed)
    w = _random_weight(rng, 6)
    cuts = sorted({Fraction(rng.randint(-512, 1536), 1024) for _ in range(5)})
    if len(cuts) < 3:
        return
    whole = pc_power_integral(w, Interval(cuts[0], cuts[-1]), gamma)
    parts = [pc_power_integral(w, Interval(a, b), gamma) for a, b in zip(cuts, cuts[1:])]
    if isinstance(whole, Fraction):
        assert whole == sum(parts)
    else:
        with mpmath.workprec(113):
            assert abs(whole - mpmath.fsum(parts)) <= 2 * len(parts) * mpmath.eps * max(1, abs(whole)) * 8


@given(st.integers(0, 10**6))
@settings(max_examples=30, deadline=None)
def test_derivative_integrates_back(seed):
    rng = random.Random(seed)
    n = rng.randint(1, 8)
    xs = [Fraction(0)]
    for _ in range(n):
        xs.append(xs[-1] + Fraction(rng.randint(1, 64), 64))
    ys = [Fraction(rng.randint(-50, 50), 7) for _ in xs]
    u = PiecewiseLinear(tuple(xs), tuple(ys))
    du = pl_derivative(u)
    for x in u.breakpoints[1:]:
        assert du.integral(Interval(xs[0], x)) == u(x) - u(xs[0])


def test_prefix_consistency_random_intervals():
    rng = random.Random(1)
    w = _random_weight(rng, 40)
    exact = prefix_tables(w, 1)
    approx = prefix_tables(w, Fraction(-1, 2))
    with mpmath.workprec(113):
        for _ in range(1000):
            a, b = sorted(Fraction(rng.randint(-1024, 2048), 1024) for _ in range(2))
            if a == b:
                continue
            Q = Interval(a, b)
            assert exact.integral(Q) == pc_power_integral(w, Q, 1)
            direct = pc_power_integral(w, Q, Fraction(-1, 2))
            assert abs(approx.integral(Q) - direct) <= 4 * mpmath.eps * max(abs(direct), abs(approx.at(b)), 1)
