import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from czweights.geometry import Interval
from czweights.whitney import CUBES_PER_LAYER, component_layout, decompose, depth_for_budget, overlap_constant

UNIT = Interval(Fraction(0), Fraction(1))


def test_first_left_layer():
    f = decompose([UNIT], depth=3)
    layer1_left = [c for c, j in zip(f.cubes, f.layer) if j == 1 and c.b <= Fraction(1, 2)]
    assert len(layer1_left) == CUBES_PER_LAYER
    assert layer1_left[0].a == Fraction(1, 4) and layer1_left[-1].b == Fraction(1, 2)
    assert all(c.length == Fraction(1, 512) for c in layer1_left)


@pytest.mark.parametrize("depth", range(1, 13))
def test_sizing_cover_and_residual(depth):
    f = decompose([UNIT], depth)
    assert f.sizing_ok()
    assert f.disjoint() and f.covers()
    assert f.residual_measure == Fraction(1, 2**depth)
    assert f.residual_measure <= f.residual_budget


def test_layout_sums_to_one():
    for D in (1, 5, 12):
        assert sum(count * rel for _, count, rel in component_layout(D)) == 1


def test_rejects_overlap():
    with pytest.raises(ValueError):
        decompose([Interval(0, Fraction(1, 2)), Interval(Fraction(1, 4), 1)], 2)


def test_overlap_examples():
    f = decompose([UNIT], 6)
    assert overlap_constant(f, [Interval(Fraction(-1, 2), Fraction(3, 2))]) == Fraction(1, 2) - Fraction(1, 2**6) / 2
    assert overlap_constant(f, [Interval(Fraction(-1, 1000), Fraction(1, 1000))]) <= 2
    assert overlap_constant(f, [Interval(Fraction(2), Fraction(3))]) == 0
    with pytest.raises(ValueError):
        overlap_constant(f, [Interval(Fraction(1, 4), Fraction(1, 2))])


def _random_omega(rng):
    pts = sorted({Fraction(rng.randint(0, 4096), 4096) for _ in range(2 * rng.randint(1, 4))})
    comps = [Interval(a, b) for a, b in zip(pts[::2], pts[1::2])]
    return comps or [UNIT]


def _probe_touching_complement(rng, omega):
    comp = rng.choice(omega)
    end = rng.choice([comp.a, comp.b])
    left = Fraction(rng.randint(1, 10**6), 10**6) * comp.length
    right = Fraction(rng.randint(1, 10**6), 10**6) * comp.length
    return Interval(end - left, end + right)


def test_overlap_constant_random_probes():
    rng = random.Random(8)
    worst = Fraction(0)
    for trial in range(10):
        omega = _random_omega(rng)
        f = decompose(omega, depth=rng.randint(1, 8))
        probes = [_probe_touching_complement(rng, omega) for _ in range(100)]
        worst = max(worst, overlap_constant(f, probes))
    assert worst <= 2


@given(st.integers(0, 10**6), st.integers(1, 6))
@settings(max_examples=25, deadline=None)
def test_nesting_inside_parent_cubes(seed, depth):
    rng = random.Random(seed)
    parent = decompose(_random_omega(rng), depth)
    # level 2 open set: random subintervals of a few parent cubes
    chosen = rng.sample(range(len(parent.cubes)), min(5, len(parent.cubes)))
    omega2 = []
    for i in chosen:
        c = parent.cubes[i]
        a = c.a + c.length * Fraction(rng.randint(0, 3), 8)
        b = c.b - c.length * Fraction(rng.randint(0, 3), 8)
        omega2.append(Interval(a, b))
    child = decompose(omega2, depth, level=2, parent=parent)
    assert child.nested_in(parent)
    assert child.sizing_ok()


def test_component_outside_parent_rejected():
    parent = decompose([UNIT], 1)
    c = parent.cubes[0]
    with pytest.raises(ValueError):
        decompose([Interval(c.a, c.b + c.length)], 1, parent=parent)


def test_depth_for_budget():
    assert depth_for_budget(Fraction(1, 8)) == 3
    assert depth_for_budget(Fraction(1, 8), multiplicity=4) == 5
