"""Forcing field, distributional residual and the blow-up certificate.

With ``F = u' + 1/w`` the flux ``w u' - w F`` equals ``-1`` everywhere, so
``(w u')' = (w F)'`` in the sense of distributions.  ``F`` vanishes on
every good piece and equals ``b_N + 1`` on the bad set, while ``|u'|`` is
as large as ``2^k`` on the level-``k`` good set; the ratio

    int w^s |u'|^p / (int w^s |F|^p + ||u||_inf^p int w^s)

therefore grows without bound in ``N`` when ``1 <= s < p - 1``.
"""
from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import mpmath

from .construct import BuildParams, Construction, build, label_of
from .geometry import DEFAULT_PREC, StepFunction, power_mp
from .sequences import frac_to_json

__all__ = [
    "ForcingField",
    "ResidualReport",
    "CertificateReport",
    "SweepResult",
    "make_forcing",
    "pde_residual",
    "blowup_ratio",
    "find_N",
    "sweep_csv",
    "UNDEFINED",
]

UNDEFINED = "undefined"
EXTERIOR = ("X",)


@dataclass(frozen=True)
class ForcingField:
    """``F`` per leaf key; the exterior key ``("X",)`` carries ``F = 1``."""

    values: dict

    def __getitem__(self, key) -> Fraction:
        return self.values[key]

    def step_function(self, c: Construction, limit: int = 200_000) -> StepFunction:
        runs = c.placed.leaf_runs(limit)
        xs = [runs[0][0]] + [b for _, b, _ in runs]
        return StepFunction(tuple(xs), tuple(self.values[leaf.key] for _, _, leaf in runs), self.values[EXTERIOR])

    def to_json(self) -> dict:
        return {label_of(k): frac_to_json(v) for k, v in sorted(self.values.items(), key=lambda kv: str(kv[0]))}


def make_forcing(c: Construction) -> ForcingField:
    """``F = u' + 1/w`` on every leaf type, exactly."""
    vals = {key: leaf.slope + 1 / leaf.weight for key, leaf in c.leaves.items()}
    vals[EXTERIOR] = Fraction(1)
    return ForcingField(vals)


@dataclass(frozen=True)
class ResidualReport:
    flux: dict  # label -> w u' - w F
    per_piece_ok: bool
    tests: tuple  # (center, half_width, residual)
    seed: int

    @property
    def max_test_residual(self) -> Fraction:
        return max((abs(t[2]) for t in self.tests), default=Fraction(0))

    @property
    def passed(self) -> bool:
        return self.per_piece_ok and self.max_test_residual == 0


def _flux_values(c: Construction, F: ForcingField) -> dict:
    out = {key: leaf.weight * leaf.slope - leaf.weight * F[key] for key, leaf in c.leaves.items()}
    out[EXTERIOR] = Fraction(0) - F[EXTERIOR]  # w = 1, u' = 0 outside
    return out


def pde_residual(c: Construction, F: ForcingField, test_count: int = 100, seed: int = 0) -> ResidualReport:
    """Exact per-piece flux check plus weak-form tests with random hat functions.

    For a hat of half-width ``h`` centred at ``x0`` the weak form reduces to
    ``(1/h) (int_{x0-h}^{x0} g - int_{x0}^{x0+h} g)`` with ``g = w u' - w F``,
    evaluated from exact measures.
    """
    g = _flux_values(c, F)
    flux = {label_of(k): v for k, v in g.items() if k != EXTERIOR}
    per_piece_ok = all(v == -1 for v in flux.values())
    rng = random.Random(seed)
    P = c.placed
    tests = []
    for _ in range(test_count):
        depth = rng.randint(2, 40)
        x0 = Fraction(rng.randint(1, 2**depth - 1), 2**depth)
        room = min(x0, 1 - x0)
        h = room * Fraction(rng.randint(1, 1024), 1024)
        left = P.integral(x0 - h, x0, g)
        right = P.integral(x0, x0 + h, g)
        tests.append((x0, h, (left - right) / h))
    return ResidualReport(flux, per_piece_ok, tuple(tests), seed)


@dataclass
class CertificateReport:
    N: int
    p: float
    s: float
    lhs: mpmath.mpf
    rhs_F: mpmath.mpf
    rhs_u: mpmath.mpf
    ratio: object  # mpf or UNDEFINED
    ledger: list  # rows (label, measure, lhs part, rhs_F part)
    lhs_good: mpmath.mpf
    lhs_error: mpmath.mpf
    rhs_F_error: mpmath.mpf
    closed_form: mpmath.mpf
    closed_form_rel_err: mpmath.mpf
    error_budget: mpmath.mpf
    gamma_target: Optional[float] = None
    prec: int = DEFAULT_PREC

    @property
    def undefined(self) -> bool:
        return isinstance(self.ratio, str)

    @property
    def passed(self) -> Optional[bool]:
        if self.gamma_target is None or self.undefined:
            return None
        return bool(self.ratio > self.gamma_target)

    @property
    def error_quarantine_ok(self) -> bool:
        return bool(self.rhs_F_error <= self.error_budget)

    def to_json(self) -> dict:
        n = lambda v: mpmath.nstr(v, 30) if not isinstance(v, str) else v
        return {
            "N": self.N,
            "p": self.p,
            "s": self.s,
            "lhs": n(self.lhs),
            "rhs_F": n(self.rhs_F),
            "rhs_u": n(self.rhs_u),
            "ratio": n(self.ratio),
            "lhs_good": n(self.lhs_good),
            "lhs_error": n(self.lhs_error),
            "rhs_F_error": n(self.rhs_F_error),
            "closed_form": n(self.closed_form),
            "closed_form_rel_err": mpmath.nstr(self.closed_form_rel_err, 5),
            "error_quarantine_ok": self.error_quarantine_ok,
            "gamma_target": self.gamma_target,
            "pass": self.passed,
            "precision_bits": self.prec,
            "ledger": [
                {"label": lab, "measure": frac_to_json(m), "lhs": n(a), "rhs_F": n(b)} for lab, m, a, b in self.ledger
            ],
        }


def _mp(x: Fraction):
    return mpmath.mpf(x.numerator) / x.denominator


_pw = power_mp


def blowup_ratio(
    c: Construction,
    p: float,
    s: float,
    gamma_target: Optional[float] = None,
    F: Optional[ForcingField] = None,
    prec: int = DEFAULT_PREC,
) -> CertificateReport:
    """Both sides of the weighted inequality, with a per-label ledger."""
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if s < 1:
        raise ValueError(f"s must be >= 1, got {s}")
    F = F or make_forcing(c)
    t = c.table
    with mpmath.workprec(prec):
        pm, sm = mpmath.mpf(p), mpmath.mpf(s)
        rows = []
        lhs = rhs_F = int_ws = mpmath.mpf(0)
        lhs_good = lhs_err = rhsF_err = mpmath.mpf(0)
        for key, m in sorted(c.body.measure.items(), key=lambda kv: str(kv[0])):
            leaf = c.leaves[key]
            ws = _pw(leaf.weight, s, prec)
            a = _mp(m) * ws * _pw(abs(leaf.slope), p, prec) if leaf.slope else mpmath.mpf(0)
            b = _mp(m) * ws * _pw(abs(F[key]), p, prec) if F[key] else mpmath.mpf(0)
            rows.append((label_of(key), m, a, b))
            lhs += a
            rhs_F += b
            int_ws += _mp(m) * ws
            if key[0] == "E":
                lhs_err += a
                rhsF_err += b
            else:
                lhs_good += a
        sup = _mp(c.sup_norm)
        rhs_u = _pw(c.sup_norm, p, prec) * int_ws if sup else mpmath.mpf(0)
        denom = rhs_F + rhs_u
        if denom == 0:
            ratio = UNDEFINED if lhs == 0 else mpmath.inf
        else:
            ratio = lhs / denom
        lab = c.labeling
        closed = _mp(t.beta) * _pw(abs(t.b), p, prec) + mpmath.fsum(
            _mp(lab.measure(f"G{k}")) * mpmath.power(2, k * (pm - sm)) for k in range(1, t.N + 1)
        )
        rel = abs(lhs_good - closed) / closed if closed else mpmath.mpf(0)
        budget = _mp(c.params.epsilon) * mpmath.power(2, (t.N + 1) * pm)
    return CertificateReport(
        N=t.N,
        p=float(p),
        s=float(s),
        lhs=lhs,
        rhs_F=rhs_F,
        rhs_u=rhs_u,
        ratio=ratio,
        ledger=rows,
        lhs_good=lhs_good,
        lhs_error=lhs_err,
        rhs_F_error=rhsF_err,
        closed_form=closed,
        closed_form_rel_err=rel,
        error_budget=budget,
        gamma_target=gamma_target,
        prec=prec,
    )


@dataclass
class SweepResult:
    p: float
    s: float
    gamma: float
    rows: list  # CertificateReport per N
    n_star: Optional[int]
    control: list  # (p, s) = (2, 1) reports over the same N
    ar: dict = field(default_factory=dict)  # (N, r) -> estimate

    @property
    def exhausted(self) -> bool:
        return self.n_star is None

    def monotone_from(self, start: int = 4) -> bool:
        vals = [r.ratio for r in self.rows if r.N >= start and not r.undefined]
        return all(b >= a for a, b in zip(vals, vals[1:]))


def find_N(
    p: float,
    s: float,
    gamma: float,
    N_max: int,
    delta=Fraction(1, 2**10),
    control: bool = True,
    r_list: Sequence[float] = (),
    prec: int = DEFAULT_PREC,
    stop_at_first: bool = False,
) -> SweepResult:
    """Sweep ``N = 1 .. N_max``; ``n_star`` is the first ``N`` with ratio above ``gamma``."""
    from .muckenhoupt import ar_characteristic

    rows, ctrl = [], []
    ar: dict = {}
    n_star = None
    cache: dict = {}

    def get(N, p_hint):
        key = (N, p_hint)
        if key not in cache:
            cache[key] = build(BuildParams(N, delta=delta, p_hint=p_hint))
        return cache[key]

    for N in range(1, N_max + 1):
        c = get(N, max(p, 2))
        rep = blowup_ratio(c, p, s, gamma, prec=prec)
        rows.append(rep)
        for r in r_list:
            ar[(N, r)] = ar_characteristic(c, r).sup_estimate
        if n_star is None and rep.passed:
            n_star = N
            if stop_at_first:
                break
    if control:
        for N in range(1, N_max + 1):
            ctrl.append(blowup_ratio(get(N, 2), 2, 1, gamma, prec=prec))
    return SweepResult(float(p), float(s), float(gamma), rows, n_star, ctrl, ar)


CSV_COLUMNS = ["kind", "N", "p", "s", "lhs", "rhs_F", "rhs_u", "ratio", "prec_bits"]


def sweep_csv(res: SweepResult, r_list: Sequence[float] = (), digits: int = 25, header_lines: Sequence[str] = ()) -> str:
    """CSV table of a sweep; ``#`` lines carry the resolved configuration."""
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + [f"ar@{r:g}" for r in r_list])
    fmt = lambda v: v if isinstance(v, str) else mpmath.nstr(v, digits)
    for kind, reps in (("certify", res.rows), ("control", res.control)):
        for rep in reps:
            extra = [fmt(res.ar[(rep.N, r)]) if kind == "certify" and (rep.N, r) in res.ar else "" for r in r_list]
            w.writerow([kind, rep.N, f"{rep.p:g}", f"{rep.s:g}", fmt(rep.lhs), fmt(rep.rhs_F), fmt(rep.rhs_u), fmt(rep.ratio), rep.prec] + extra)
    buf.write(f"# n_star={res.n_star if res.n_star is not None else 'exhausted'} gamma={res.gamma:g}\n")
    return buf.getvalue()
