"""Exact solutions of ``(w u')' = (w F)'`` on ``(0, 1)`` with ``u(0) = u(1) = 0``.

In one dimension the flux ``w u' - w F`` is a constant ``c``, and the
boundary condition fixes it: ``c = -(int F) / (int 1/w)``.  Everything is
rational, so ``u`` is recovered exactly.  :func:`cz_check` then evaluates
the interior gradient ratio

    int_(1/4, 3/4) w^s |u'|^p / (int w^s |F|^p + ||u||_inf^p int w^s)

that stays bounded for well-conditioned weights and blows up for the
constructed ones.
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import mpmath

from .geometry import (
    DEFAULT_PREC,
    Interval,
    PiecewiseConstant,
    PiecewiseLinear,
    StepFunction,
    as_fraction,
    pl_sup_norm,
    power_mp,
)

__all__ = [
    "SolveResult",
    "ContrastReport",
    "solve",
    "solve_construction",
    "cz_check",
    "ratio_curve",
    "random_problem",
    "random_trials",
    "contrast_report",
    "INTERIOR",
]

UNIT = Interval(Fraction(0), Fraction(1))
INTERIOR = Interval(Fraction(1, 4), Fraction(3, 4))


@dataclass
class SolveResult:
    """Solution data keyed by piece type.

    ``kinds`` maps a key to ``(w, F, u')``; ``measure`` and ``interior`` give
    the length of each key on ``(0, 1)`` and on ``(1/4, 3/4)``.  ``u`` is
    explicit for flat inputs and ``None`` for constructions too large to
    flatten.
    """

    c: Fraction
    kinds: dict
    measure: dict
    interior: dict
    sup_norm: Fraction
    u: Optional[PiecewiseLinear] = None
    boundary_ok: bool = True
    flux_ok: bool = True
    source: str = "flat"
    cz_ratios: dict = field(default_factory=dict)
    a2_estimate: Optional[mpmath.mpf] = None

    def to_json(self) -> dict:
        from .sequences import frac_to_json

        return {
            "source": self.source,
            "flux_constant": frac_to_json(self.c),
            "sup_norm": frac_to_json(self.sup_norm),
            "boundary_ok": self.boundary_ok,
            "flux_ok": self.flux_ok,
            "cz_ratios": {f"p={p:g},s={s:g}": mpmath.nstr(v, 30) for (p, s), v in sorted(self.cz_ratios.items())},
            "a2_estimate": None if self.a2_estimate is None else mpmath.nstr(self.a2_estimate, 20),
            "u": None if self.u is None else self.u.to_json(),
        }


def _pieces_on(f: StepFunction, xs: Sequence[Fraction]) -> list[Fraction]:
    return [f((xs[i] + xs[i + 1]) / 2) for i in range(len(xs) - 1)]


def _keyed(xs, keys, Q: Interval) -> dict:
    out: dict = {}
    for i, k in enumerate(keys):
        a, b = max(xs[i], Q.a), min(xs[i + 1], Q.b)
        if b > a:
            out[k] = out.get(k, Fraction(0)) + (b - a)
    return out


def solve(w: StepFunction, F: StepFunction) -> SolveResult:
    """Solve on the common refinement of ``w`` and ``F`` restricted to ``(0, 1)``."""
    cuts = {Fraction(0), Fraction(1)}
    cuts.update(x for x in w.breakpoints if 0 < x < 1)
    cuts.update(x for x in F.breakpoints if 0 < x < 1)
    xs = sorted(cuts)
    wv = _pieces_on(w, xs)
    fv = _pieces_on(F, xs)
    if any(v <= 0 for v in wv):
        raise ValueError("the weight must be strictly positive on (0, 1)")
    lengths = [xs[i + 1] - xs[i] for i in range(len(xs) - 1)]
    int_F = sum((f * ln for f, ln in zip(fv, lengths)), Fraction(0))
    int_winv = sum((ln / v for v, ln in zip(wv, lengths)), Fraction(0))
    c = -int_F / int_winv
    du = [f + c / v for f, v in zip(fv, wv)]
    u = PiecewiseLinear.from_slopes(Fraction(0), du, lengths)
    boundary_ok = u(0) == 0 and u(1) == 0
    flux_ok = all(v * d - v * f == c for v, d, f in zip(wv, du, fv))
    keys = list(zip(wv, fv))
    kinds = {k: (k[0], k[1], k[1] + c / k[0]) for k in keys}
    return SolveResult(
        c=c,
        kinds=kinds,
        measure=_keyed(xs, keys, UNIT),
        interior=_keyed(xs, keys, INTERIOR),
        sup_norm=pl_sup_norm(u),
        u=u,
        boundary_ok=boundary_ok,
        flux_ok=flux_ok,
    )


def solve_construction(c, F=None) -> SolveResult:
    """Solve with a constructed weight and its own forcing field.

    The recovered flux constant is ``-1`` and the recovered slopes are the
    construction's own, so the solution is the constructed ``u``.
    """
    from .certify import make_forcing

    F = F or make_forcing(c)
    P = c.placed
    full = P.measure_between(0, 1)
    leaves = c.leaves
    int_F = sum((m * F[k] for k, m in full.items()), Fraction(0))
    int_winv = sum((m / leaves[k].weight for k, m in full.items()), Fraction(0))
    flux = -int_F / int_winv
    kinds = {k: (leaves[k].weight, F[k], F[k] + flux / leaves[k].weight) for k in full}
    flux_ok = all(kinds[k][2] == leaves[k].slope for k in full)
    boundary_ok = sum((m * kinds[k][2] for k, m in full.items()), Fraction(0)) == 0
    return SolveResult(
        c=flux,
        kinds=kinds,
        measure=full,
        interior=P.measure_between(INTERIOR.a, INTERIOR.b),
        sup_norm=c.sup_norm,
        boundary_ok=boundary_ok,
        flux_ok=flux_ok,
        source=f"construction N={c.N}",
    )


def cz_check(res: SolveResult, p, s, allow_other_s: bool = False, prec: int = DEFAULT_PREC) -> mpmath.mpf:
    """Interior gradient ratio at exponent ``p`` and weight power ``s``.

    ``s`` must be ``1`` or ``p/2`` unless ``allow_other_s`` is set.  A ratio
    ``0/0`` (no forcing at all) is reported as 0.
    """
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if not allow_other_s and s != 1 and Fraction(s) != Fraction(p) / 2:
        raise ValueError(f"s must be 1 or p/2 (got s={s}); pass allow_other_s=True to override")
    with mpmath.workprec(prec):
        num = mpmath.mpf(0)
        for k, m in res.interior.items():
            w, _, d = res.kinds[k]
            if d:
                num += power_mp(m, 1, prec) * power_mp(w, s, prec) * power_mp(abs(d), p, prec)
        rhs_F = mpmath.mpf(0)
        int_ws = mpmath.mpf(0)
        for k, m in res.measure.items():
            w, f, _ = res.kinds[k]
            ws = power_mp(w, s, prec) * power_mp(m, 1, prec)
            int_ws += ws
            if f:
                rhs_F += ws * power_mp(abs(f), p, prec)
        den = rhs_F + (power_mp(res.sup_norm, p, prec) * int_ws if res.sup_norm else 0)
        ratio = num / den if den else mpmath.mpf(0)
    res.cz_ratios[(float(p), float(s))] = ratio
    return ratio


def ratio_curve(res: SolveResult, ps: Sequence[float], s_rule: str = "1", prec: int = DEFAULT_PREC):
    """``[(p, ratio)]`` over ``ps`` and the observed knee.

    ``s_rule`` is ``"1"`` or ``"p/2"``.  The knee is the ``p`` where the
    slope of ``log ratio`` jumps the most; it is ``None`` with fewer than
    three positive points.
    """
    rows = []
    for p in ps:
        s = 1 if s_rule == "1" else Fraction(p) / 2
        rows.append((float(p), cz_check(res, p, s, prec=prec)))
    pts = [(p, float(mpmath.log(v))) for p, v in rows if v > 0]
    knee = None
    if len(pts) >= 3:
        slopes = [(pts[i + 1][1] - pts[i][1]) / (pts[i + 1][0] - pts[i][0]) for i in range(len(pts) - 1)]
        jumps = [(slopes[i + 1] - slopes[i], pts[i + 1][0]) for i in range(len(slopes) - 1)]
        knee = max(jumps)[1]
    return rows, knee


def random_problem(rng: random.Random, max_pieces: int = 8, wlo=Fraction(1, 4), whi=Fraction(4), depth: int = 6):
    """Random dyadic step weight in ``[wlo, whi]`` and forcing in ``[-1, 1]`` on ``(0, 1)``."""
    wlo, whi = as_fraction(wlo), as_fraction(whi)
    den = 2**depth

    def grid(n):
        return [Fraction(0)] + sorted(Fraction(x, den) for x in rng.sample(range(1, den), n - 1)) + [Fraction(1)]

    nw, nf = rng.randint(1, max_pieces), rng.randint(1, max_pieces)
    w = PiecewiseConstant(grid(nw), [wlo + (whi - wlo) * Fraction(rng.randint(0, 64), 64) for _ in range(nw)])
    F = StepFunction(tuple(grid(nf)), tuple(Fraction(rng.randint(-64, 64), 64) for _ in range(nf)))
    return w, F


def random_trials(trials: int = 200, seed: int = 0, p=2, s=1):
    """Solve ``trials`` random problems; returns ``(results, ratios)``."""
    rng = random.Random(seed)
    results, ratios = [], []
    for _ in range(trials):
        w, F = random_problem(rng)
        res = solve(w, F)
        results.append(res)
        ratios.append(cz_check(res, p, s))
    return results, ratios


@dataclass
class ContrastReport:
    cap: float
    trials_max: mpmath.mpf
    counterexample_N: int
    counterexample_ratio: mpmath.mpf
    curve: list
    knee: Optional[float]

    @property
    def factor(self) -> float:
        return float(self.counterexample_ratio) / self.cap

    def to_json(self) -> dict:
        return {
            "cap_p2_s1": self.cap,
            "random_trials_max": mpmath.nstr(self.trials_max, 20),
            "counterexample_N": self.counterexample_N,
            "counterexample_ratio_p3_s1": mpmath.nstr(self.counterexample_ratio, 20),
            "factor_over_cap": self.factor,
            "curve": [[p, mpmath.nstr(v, 20)] for p, v in self.curve],
            "knee": self.knee,
        }


def contrast_report(cap: float, N: int = 16, trials: int = 200, seed: int = 0, ps=(2, 2.5, 3, 3.5, 4)) -> ContrastReport:
    """Random well-conditioned trials at ``(2, 1)`` next to the level-``N`` counterexample at ``(3, 1)``."""
    from .construct import BuildParams, build

    _, ratios = random_trials(trials, seed)
    res = solve_construction(build(BuildParams(N)))
    curve, knee = ratio_curve(res, ps)
    ratio = cz_check(res, 3, 1)
    return ContrastReport(float(cap), max(ratios), N, ratio, curve, knee)
