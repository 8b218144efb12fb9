from fractions import Fraction

import mpmath
import pytest

from czweights.certify import (
    UNDEFINED,
    blowup_ratio,
    find_N,
    make_forcing,
    pde_residual,
    sweep_csv,
)
from czweights.construct import BuildParams, build
from czweights.tree import Leaf, Shape

REL = mpmath.mpf(10) ** -10


@pytest.fixture(scope="module")
def n2_limit():
    # tiny epsilon: the measures sit within 2^-60 of the idealised ones
    return build(BuildParams(2, epsilon=Fraction(1, 2**60)))


def test_forcing_values(construction):
    c = construction(2)
    F = make_forcing(c)
    for k in (1, 2):
        assert F[("G", k)] == 0
    assert F[("B",)] == Fraction(23, 11)  # oracle: b_2 + 1 = 12/11 + 1
    assert F[("X",)] == 1


@pytest.mark.parametrize("N", [1, 3, 7])
def test_forcing_on_bad_set(N, construction):
    c = construction(N)
    assert make_forcing(c)[("B",)] == c.table.b + 1


def test_pde_residual_exact(construction):
    c = construction(6)
    rep = pde_residual(c, make_forcing(c), test_count=100, seed=3)
    assert rep.per_piece_ok
    assert all(v == -1 for v in rep.flux.values())
    assert rep.max_test_residual == 0 and rep.passed


def test_pde_residual_detects_tampering(construction):
    c = construction(4)
    F = make_forcing(c)
    rep = pde_residual(c.tampered(("G", 2)), F, test_count=20)
    assert not rep.per_piece_ok
    assert not rep.passed


def test_n2_fixture(n2_limit):
    rep = blowup_ratio(n2_limit, 3, 1)
    # oracle: beta_2 b_2^3 + mu_1 2^2 + mu_2 2^4 = 108/121 + 1 + 1
    lhs = Fraction(108, 121) + 2
    rhs_F = Fraction(12167, 1936)  # beta_2 (23/11)^3
    with mpmath.workprec(113):
        assert abs(rep.lhs - mpmath.mpf(lhs.numerator) / lhs.denominator) <= REL * rep.lhs
        assert abs(rep.rhs_F - mpmath.mpf(rhs_F.numerator) / rhs_F.denominator) <= REL * rep.rhs_F


def test_ledger_sums_to_totals(construction):
    rep = blowup_ratio(construction(8), 3, 1)
    with mpmath.workprec(113):
        assert abs(mpmath.fsum(a for _, _, a, _ in rep.ledger) - rep.lhs) <= 8 * mpmath.eps * rep.lhs
        assert abs(mpmath.fsum(b for _, _, _, b in rep.ledger) - rep.rhs_F) <= 8 * mpmath.eps * rep.rhs_F
    assert rep.closed_form_rel_err < REL
    assert rep.error_quarantine_ok
    assert all(v >= 0 for v in (rep.lhs, rep.rhs_F, rep.rhs_u, rep.ratio))


@pytest.mark.parametrize("N", [2, 5, 9])
def test_control_matches_closed_form(N):
    c = build(BuildParams(N, epsilon=Fraction(1, 2**60)))
    t = c.table
    rep = blowup_ratio(c, 2, 1)
    # oracle: (beta b^2 + sum mu_k 2^k) / (beta (b+1)^2 + |u|^2 int w) with the idealised measures
    num = t.beta * t.b**2 + sum(t.mu_(k) * 2**k for k in range(1, N + 1))
    int_w = t.beta + sum(t.mu_(k) / 2**k for k in range(1, N + 1))
    den = t.beta * (t.b + 1) ** 2 + c.sup_norm**2 * int_w
    with mpmath.workprec(113):
        ideal = mpmath.mpf(num.numerator) / num.denominator / (mpmath.mpf(den.numerator) / den.denominator)
        assert abs(rep.ratio - ideal) / ideal < 1e-9


def test_rejects_bad_exponents(construction):
    with pytest.raises(ValueError):
        blowup_ratio(construction(2), 1.5, 1)
    with pytest.raises(ValueError):
        blowup_ratio(construction(2), 3, 0.5)


def test_undefined_ratio():
    from czweights.construct import Construction
    from czweights.sequences import build_table

    flat = Leaf(("B",), 1, 0)
    c = Construction(BuildParams(1), build_table(1), Shape([(flat, 1, Fraction(1))]), 1, 1, [])
    F = make_forcing(c)
    F.values[("B",)] = Fraction(0)
    rep = blowup_ratio(c, 2, 1, F=F)
    assert rep.ratio == UNDEFINED and rep.undefined
    assert rep.passed is None


def test_sweep_finds_threshold_for_p3():
    res = find_N(3, 1, 10, 14, control=False)
    assert res.n_star is not None and res.n_star <= 14
    assert res.rows[res.n_star - 1].ratio > 10
    assert all(r.ratio <= 10 for r in res.rows[: res.n_star - 1])
    assert res.monotone_from(4)


def test_sweep_p2_exhausts():
    res = find_N(2, 1, 1000, 10, control=False)
    assert res.exhausted


def test_sweep_at_s_equal_p_minus_1_reported():
    # behaviour at the threshold is reported, not asserted
    res = find_N(3, 2, 10, 8, control=False)
    assert len(res.rows) == 8


def test_sweep_csv_layout():
    res = find_N(3, 1, 10, 3)
    text = sweep_csv(res, header_lines=["seed=0"])
    lines = text.splitlines()
    assert lines[0] == "# seed=0"
    assert lines[1].split(",") == ["kind", "N", "p", "s", "lhs", "rhs_F", "rhs_u", "ratio", "prec_bits"]
    assert sum(1 for ln in lines if ln.startswith("control,")) == 3
    assert lines[-1].startswith("# n_star=")
