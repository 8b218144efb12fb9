"""Tensor extension of a one-dimensional weight to the unit square.

``W(x, y) = w(x)``, ``U(x, y) = u(x)`` and ``F2(x, y) = (F(x), 0)``.  For an
axis-parallel square ``S = (a, a+h) x (c, c+h)`` the ``y`` integrals factor
out, so every square average of ``W`` (or of any power of ``W``) is the
average of ``w`` over ``(a, a+h)``.  The sampled two-dimensional ``A_r``
value is computed through that factorisation and cross-checked against the
one-dimensional evaluator.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import mpmath

from .geometry import DEFAULT_PREC, Interval, as_fraction, power_mp
from .muckenhoupt import as_placed, phi_exact

__all__ = [
    "PlanarExtension",
    "Square",
    "Ar2Report",
    "WeakFormReport",
    "extend",
    "lattice_squares",
    "ar2_sampled",
    "weak_form_residual",
]


@dataclass(frozen=True)
class Square:
    x: Fraction
    y: Fraction
    side: Fraction

    @property
    def x_interval(self) -> Interval:
        return Interval(self.x, self.x + self.side)

    @property
    def y_interval(self) -> Interval:
        return Interval(self.y, self.y + self.side)


@dataclass
class PlanarExtension:
    """``base`` is a construction or an explicit weight on ``[0, 1]``.

    ``F`` is a forcing field keyed like the base leaves; it defaults to the
    construction's own and is ``None`` for plain weights.
    """

    base: object
    F: Optional[object] = None

    def __post_init__(self):
        self.P = as_placed(self.base, (Fraction(-1), Fraction(2)))
        if self.F is None and hasattr(self.base, "leaves"):
            from .certify import make_forcing

            self.F = make_forcing(self.base)

    def W(self, x, y) -> Fraction:
        return self.P.weights()[self._key(x)]

    def grad_U(self, x, y) -> tuple[Fraction, Fraction]:
        return (self.P.slopes()[self._key(x)], Fraction(0))

    def F2(self, x, y) -> tuple[Fraction, Fraction]:
        if self.F is None:
            raise ValueError("no forcing field attached")
        return (self.F[self._key(x)], Fraction(0))

    def _key(self, x) -> tuple:
        """Leaf key of the piece containing ``x`` (right-hand piece at a breakpoint)."""
        P = self.P
        t = (as_fraction(x) - P.origin) / P.length
        if not 0 <= t < 1:
            return ("X",)
        node = P.shape
        while not node.is_leaf:
            i, _, t = node.locate(t)
            node = node.runs[i][0]
        return node.key


def extend(base, F=None) -> PlanarExtension:
    return PlanarExtension(base, F)


def lattice_squares(grid: int, lo=Fraction(-1), hi=Fraction(2), dyadic_levels: int = 6) -> list[Square]:
    """Squares with corners on a ``(grid+1) x (grid+1)`` lattice of ``[lo, hi]^2``,
    plus squares of side ``2^-m`` at the dyadic points ``j 2^-m`` of ``[0, 1)``.
    """
    lo, hi = as_fraction(lo), as_fraction(hi)
    step = (hi - lo) / grid
    nodes = [lo + i * step for i in range(grid + 1)]
    out = []
    for i, x in enumerate(nodes):
        for j, y in enumerate(nodes):
            for k in range(1, grid + 1 - max(i, j)):
                out.append(Square(x, y, k * step))
    for m in range(1, dyadic_levels + 1):
        side = Fraction(1, 2**m)
        for j in range(2**m):
            out.append(Square(j * side, Fraction(0), side))
    return out


@dataclass
class Ar2Report:
    r: float
    sup_sampled: mpmath.mpf
    argmax: Square
    squares: int
    max_reduction_gap: mpmath.mpf  # largest relative gap to the 1-D evaluator
    exact_linear_matches: bool  # square averages of W equal 1-D averages as rationals
    prec: int = DEFAULT_PREC

    def to_json(self) -> dict:
        sq = self.argmax
        return {
            "dimension": 2,
            "r": self.r,
            "sup_sampled": mpmath.nstr(self.sup_sampled, 30),
            "argmax": {"x": str(sq.x), "y": str(sq.y), "side": str(sq.side)},
            "squares": self.squares,
            "max_reduction_gap": mpmath.nstr(self.max_reduction_gap, 5),
            "exact_linear_matches": self.exact_linear_matches,
            "precision_bits": self.prec,
        }


def _square_value(ext: PlanarExtension, S: Square, r, prec: int):
    """``A_r`` product of ``W`` on ``S`` via the product structure; also the exact ``W`` average."""
    P = ext.P
    weights = P.weights()
    xm = P.measure_between(S.x, S.x + S.side)
    ym = S.side  # the y section of S
    area = S.side * S.side
    lin = sum((ym * m * weights[k] for k, m in xm.items()), Fraction(0)) / area
    with mpmath.workprec(prec):
        gamma = -1 / (mpmath.mpf(r) - 1)
        g = mpmath.fsum(power_mp(ym * m, 1, prec) * mpmath.power(power_mp(weights[k], 1, prec), gamma) for k, m in xm.items())
        g = g / power_mp(area, 1, prec)
        val = power_mp(lin, 1, prec) * mpmath.power(g, mpmath.mpf(r) - 1)
    return val, lin


def ar2_sampled(ext: PlanarExtension, r: float, grid: int = 8, dyadic_levels: int = 6, prec: int = DEFAULT_PREC) -> Ar2Report:
    """Largest ``A_r`` product over the sampled squares, each cross-checked against 1-D."""
    if not r > 1:
        raise ValueError(f"r must exceed 1, got {r}")
    if grid < 8:
        raise ValueError("grid must be at least 8")
    squares = lattice_squares(grid, dyadic_levels=dyadic_levels)
    P = ext.P
    weights = P.weights()
    best, arg = None, None
    gap = mpmath.mpf(0)
    linear_ok = True
    seen: dict = {}
    with mpmath.workprec(prec):
        for S in squares:
            val, lin = _square_value(ext, S, r, prec)
            I = S.x_interval
            if (I.a, I.b) not in seen:
                one_d = phi_exact(P, I.a, I.b, r, prec)
                lin_1d = P.integral(I.a, I.b, weights) / I.length
                seen[(I.a, I.b)] = (one_d, lin_1d)
            one_d, lin_1d = seen[(I.a, I.b)]
            linear_ok = linear_ok and lin == lin_1d
            gap = max(gap, abs(val - one_d) / one_d)
            if best is None or val > best:
                best, arg = val, S
    return Ar2Report(float(r), best, arg, len(squares), gap, linear_ok, prec)


@dataclass
class WeakFormReport:
    tests: tuple  # (kind, residual)
    seed: int

    @property
    def max_residual(self) -> Fraction:
        return max((abs(v) for _, v in self.tests), default=Fraction(0))

    @property
    def passed(self) -> bool:
        return self.max_residual == 0


def _random_pl(rng: random.Random, lo: Fraction, hi: Fraction, nodes: int = 4, positive: bool = False):
    """Compactly supported piecewise-linear bump on ``(lo, hi)``: nodes, values."""
    den = 2 ** rng.randint(4, 24)
    pts = sorted({Fraction(rng.randint(1, den - 1), den) for _ in range(nodes)})
    xs = [lo + (hi - lo) * t for t in pts]
    xs = [lo + (xs[0] - lo) / 2] + xs + [hi - (hi - xs[-1]) / 2]
    vals = [Fraction(0)] + [Fraction(rng.randint(1 if positive else -8, 8), 8) for _ in range(len(xs) - 2)] + [Fraction(0)]
    return xs, vals


def _pl_parts(xs, vals):
    """``(a, b, slope, integral of the piece)`` for each linear piece."""
    out = []
    for i in range(len(xs) - 1):
        a, b = xs[i], xs[i + 1]
        out.append((a, b, (vals[i + 1] - vals[i]) / (b - a), (vals[i] + vals[i + 1]) * (b - a) / 2))
    return out


def weak_form_residual(ext: PlanarExtension, tests: int = 100, seed: int = 0, y_only: int = 10) -> WeakFormReport:
    """``int W grad U . grad phi - int W F2 . grad phi`` for tensor tests ``phi = f(x) g(y)``.

    ``f`` and ``g`` are random piecewise-linear bumps compactly supported in
    ``(0, 1)``; ``y_only`` further tests have ``f`` constant on the
    square, so only ``d phi / dy`` is nonzero there.  Everything is exact.
    """
    if ext.F is None:
        raise ValueError("the weak form needs a forcing field")
    P = ext.P
    w, du = P.weights(), P.slopes()
    Fv = ext.F.values
    # x components: W U_x and W F; y components vanish identically
    flux_x = {k: w[k] * du[k] - w[k] * Fv[k] for k in w}
    flux_y = {k: w[k] * 0 - w[k] * 0 for k in w}  # U_y = 0 and the second component of F2 is 0
    y_vanishes = all(v == 0 for v in flux_y.values())
    rng = random.Random(seed)
    out = []
    for i in range(tests + y_only):
        gy = _pl_parts(*_random_pl(rng, Fraction(0), Fraction(1), positive=True))
        int_g = sum((part[3] for part in gy), Fraction(0))
        if i < tests:
            fx = _pl_parts(*_random_pl(rng, Fraction(0), Fraction(1)))
            x_term = sum((slope * P.integral(a, b, flux_x) for a, b, slope, _ in fx), Fraction(0)) * int_g
            kind = "tensor"
        else:
            x_term = Fraction(0)  # d phi / dx = 0
            kind = "y-only"
        if not y_vanishes:
            raise AssertionError("tensor extension has a nonzero y flux")
        out.append((kind, x_term))
    return WeakFormReport(tuple(out), seed)
