from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from czweights.construct import (
    AuditError,
    BuildParams,
    Construction,
    audit,
    build,
    sawtooth_replace,
    teeth_count,
)
from czweights.geometry import Interval, pl_derivative, pl_sup_norm
from czweights.sequences import build_table
from czweights.tree import Leaf, Shape

UNIT = Interval(Fraction(0), Fraction(1))


def test_sawtooth_single_tooth():
    frag, labels = sawtooth_replace(UNIT, 0, -2, Fraction(1, 4), Fraction(2, 3), Fraction(3, 4), 1)
    assert frag.breakpoints == (0, Fraction(1, 4), 1)
    assert frag.node_values == (0, Fraction(-1, 2), 0)
    assert [(iv.length, lab) for iv, lab in labels] == [(Fraction(1, 4), 1), (Fraction(3, 4), 2)]


def test_sawtooth_four_teeth_excursion():
    frag, labels = sawtooth_replace(UNIT, 0, -2, Fraction(1, 4), Fraction(2, 3), Fraction(3, 4), 4)
    assert pl_sup_norm(frag) == Fraction(1, 8)
    assert sum(iv.length for iv, lab in labels if lab == 1) == Fraction(1, 4)
    assert frag(0) == frag(1) == 0


def test_sawtooth_rejects_mismatch():
    with pytest.raises(ValueError):
        sawtooth_replace(UNIT, 0, -2, Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), 1)


def test_teeth_count_policies():
    # x = 1 * (2 + 0) * 2 / 2^-10 = 4096
    assert teeth_count(1, -2, 0, 0, Fraction(1, 1024), "exact") == 4096
    assert teeth_count(Fraction(3, 4), -2, 0, 0, Fraction(1, 1024), "exact") == 3072
    assert teeth_count(Fraction(3, 4), -2, 0, 0, Fraction(1, 1024), "pow2") == 4096


def test_n1_construction():
    c = build(BuildParams(1))
    t = build_table(1)
    assert c.labeling.measure("B") == Fraction(3, 4) and c.labeling.measure("G1") == Fraction(1, 4)
    assert {leaf.weight for leaf in c.leaves.values()} == {1, Fraction(1, 2)}
    u = c.u_function()
    assert u(0) == u(1) == 0 and u.exterior_value == 0
    assert set(pl_derivative(u).values) == {t.h_(1), t.b}
    assert pl_sup_norm(u) == c.sup_norm <= c.params.delta
    assert c.labeling.measure("G1") == t.mu_(1) / t.alpha_(1) * t.alpha_(1)


@pytest.mark.parametrize("N", [1, 2, 3, 5, 8])
def test_boundary_and_exterior(N, construction):
    c = construction(N)
    assert c.body.du == 0
    P = c.window()
    assert P.weights()[("X",)] == 1 and P.slopes()[("X",)] == 0
    assert P.u_at(Fraction(2)) == 0


def test_n2_tight_epsilon():
    eps = Fraction(1, 2**20)
    c = build(BuildParams(2, epsilon=eps))
    t = c.table
    g1 = c.labeling.measure("G1")
    assert t.mu_(1) * (1 - eps) <= g1 <= t.mu_(1)


def test_params_guard():
    with pytest.raises(ValueError):
        BuildParams(2, epsilon=1)
    with pytest.raises(ValueError):
        BuildParams(0)
    assert BuildParams(4).epsilon == Fraction(1, 2**18)


@pytest.mark.parametrize("N", [2, 3, 6])
def test_audit_passes(N, construction):
    rep = audit(construction(N))
    assert rep.passed, rep.failures()


def test_n3_level_counts_in_cubes(construction):
    c = construction(3)
    t, eps = c.table, c.params.epsilon
    deep = [(k, s) for k, s in c.cube_shapes() if k == 2]
    assert deep
    for k, shape in deep:
        g3 = sum(m for key, m in shape.measure.items() if key == ("G", 3))
        assert g3 <= (1 + eps) * t.mu_(3) / t.alpha_(2)


def test_cube_without_refinement_has_no_deep_levels(construction):
    c = construction(2)
    for k, shape in c.cube_shapes():
        if k == 1:
            assert all(leaf.weight >= Fraction(1, 4) for leaf in shape.leaves.values())


def test_partition_sums_to_one(construction):
    for N in (2, 5, 9):
        lab = construction(N).labeling
        assert lab.total == 1
        assert lab.error <= construction(N).params.epsilon


def test_determinism_and_json_roundtrip():
    a = build(BuildParams(5)).to_json()
    b = build(BuildParams(5)).to_json()
    assert a == b
    c = Construction.from_json(a)
    assert c.to_json() == a
    assert audit(c, measures_only=True).passed


def test_whitney_forests_match_decompose():
    c = build(BuildParams(3, delta=8, whitney_depth=1), check=False)
    forests = c.whitney_forests(10**6)
    assert [f.level for f in forests] == [1, 2]
    assert all(f.sizing_ok() for f in forests)
    assert forests[1].nested_in(forests[0])


def test_audit_error_raised_on_bad_measures():
    with pytest.raises(AuditError):
        build(BuildParams(3, delta=8, whitney_depth=1))


def test_tampered_fails_leaf_audit(construction):
    c = construction(3).tampered(("G", 2))
    names = {ch.name for ch in audit(c).failures()}
    assert "leaf[G2]" in names


@given(st.integers(1, 12))
@settings(max_examples=12, deadline=None)
def test_leaf_values_exact(N):
    c = build(BuildParams(N))
    t = c.table
    for key, leaf in c.leaves.items():
        if key[0] == "G":
            assert (leaf.weight, leaf.slope) == (Fraction(1, 2 ** key[1]), -(2 ** key[1]))
        elif key[0] == "B":
            assert (leaf.weight, leaf.slope) == (1, t.b)
        else:
            assert (leaf.weight, leaf.slope) == (Fraction(1, 2 ** key[1]), t.h_(key[1] + 1))


def test_shape_basics():
    a, b = Leaf(("a",), 1, 1), Leaf(("b",), 2, -1)
    s = Shape([(a, 2, Fraction(1, 4)), (b, 1, Fraction(1, 2))])
    assert s.measure == {("a",): Fraction(1, 2), ("b",): Fraction(1, 2)}
    assert s.pieces == 3
    assert s.du == 0
    assert s.umax == Fraction(1, 2) and s.umin == 0
    assert s.prefix_measure(Fraction(3, 8)) == {("a",): Fraction(3, 8)}
