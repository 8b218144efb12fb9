"""Exact piecewise-constant and piecewise-linear functions on the line.

Breakpoints, lengths, values and slopes are :class:`~fractions.Fraction`.
Only powers ``w**gamma`` with non-integer ``gamma`` leave the rationals;
those are evaluated with :mod:`mpmath` at a declared working precision
(113 significand bits unless told otherwise).
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence, Union

import mpmath

from .sequences import frac_from_json, frac_to_json

__all__ = [
    "DEFAULT_PREC",
    "Scalar",
    "as_fraction",
    "power",
    "power_mp",
    "Interval",
    "StepFunction",
    "PiecewiseConstant",
    "PiecewiseLinear",
    "PrefixTable",
    "pc_power_integral",
    "pl_derivative",
    "pl_sup_norm",
    "prefix_tables",
    "SCHEMA_PIECEWISE",
]

DEFAULT_PREC = 113
SCHEMA_PIECEWISE = "czweights.piecewise/1"

Scalar = Union[Fraction, mpmath.mpf]


def as_fraction(x) -> Fraction:
    """Coerce ints, Fractions, decimal strings and ``"a/b"`` strings exactly.

    Floats are converted through their exact binary value.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(x, (int, str)):
        return Fraction(x)
    if isinstance(x, float):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x!r}")
        return Fraction(x)
    if isinstance(x, Sequence) and len(x) == 2:
        return frac_from_json(x)
    raise TypeError(f"cannot interpret {x!r} as a rational")


def _is_integral(gamma) -> bool:
    if isinstance(gamma, int):
        return True
    if isinstance(gamma, Fraction):
        return gamma.denominator == 1
    return False


def power(x: Fraction, gamma, prec: int = DEFAULT_PREC) -> Scalar:
    """``x**gamma`` for positive ``x``; exact for integer ``gamma``."""
    if _is_integral(gamma):
        return Fraction(x) ** int(gamma)
    with mpmath.workprec(prec):
        return mpmath.power(mpmath.mpf(x.numerator) / x.denominator, _mp(gamma, prec))


def power_mp(x: Fraction, gamma, prec: int = DEFAULT_PREC) -> mpmath.mpf:
    """``x**gamma`` as an mpf at ``prec`` bits, whatever the type of ``gamma``."""
    v = power(x, gamma, prec)
    return _mp(v, prec) if isinstance(v, Fraction) else v


def _mp(x, prec: int = DEFAULT_PREC) -> mpmath.mpf:
    with mpmath.workprec(prec):
        if isinstance(x, Fraction):
            return mpmath.mpf(x.numerator) / x.denominator
        return mpmath.mpf(x)


@dataclass(frozen=True)
class Interval:
    a: Fraction
    b: Fraction

    def __post_init__(self):
        a, b = as_fraction(self.a), as_fraction(self.b)
        if not a < b:
            raise ValueError(f"empty interval ({a}, {b})")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def length(self) -> Fraction:
        return self.b - self.a

    @property
    def center(self) -> Fraction:
        return (self.a + self.b) / 2

    def dilate(self, factor) -> "Interval":
        half = self.length * as_fraction(factor) / 2
        return Interval(self.center - half, self.center + half)

    def intersect(self, other: "Interval") -> "Interval | None":
        a, b = max(self.a, other.a), min(self.b, other.b)
        return Interval(a, b) if a < b else None

    def contains(self, other: "Interval") -> bool:
        return self.a <= other.a and other.b <= self.b


def _check_breaks(breakpoints: Sequence[Fraction]) -> tuple[Fraction, ...]:
    xs = tuple(as_fraction(x) for x in breakpoints)
    if len(xs) < 2:
        raise ValueError("need at least two breakpoints")
    if any(not xs[i] < xs[i + 1] for i in range(len(xs) - 1)):
        raise ValueError("breakpoints must be strictly increasing")
    return xs


@dataclass(frozen=True)
class StepFunction:
    """Signed step function: ``values[i]`` on ``(x_i, x_{i+1})``, constant outside."""

    breakpoints: tuple[Fraction, ...]
    values: tuple[Fraction, ...]
    exterior_value: Fraction = Fraction(0)

    def __post_init__(self):
        xs = _check_breaks(self.breakpoints)
        vs = tuple(as_fraction(v) for v in self.values)
        if len(vs) != len(xs) - 1:
            raise ValueError("need exactly one value per piece")
        xs, vs = _merge_steps(xs, vs)
        object.__setattr__(self, "breakpoints", xs)
        object.__setattr__(self, "values", vs)
        object.__setattr__(self, "exterior_value", as_fraction(self.exterior_value))
        self._validate()

    def _validate(self) -> None:
        pass

    @property
    def pieces(self) -> int:
        return len(self.values)

    @property
    def window(self) -> Interval:
        return Interval(self.breakpoints[0], self.breakpoints[-1])

    def lengths(self) -> list[Fraction]:
        xs = self.breakpoints
        return [xs[i + 1] - xs[i] for i in range(len(xs) - 1)]

    def __call__(self, x) -> Fraction:
        """Value at ``x``; at a breakpoint the right-hand piece wins."""
        x = as_fraction(x)
        xs = self.breakpoints
        if x < xs[0] or x >= xs[-1]:
            return self.exterior_value
        return self.values[bisect.bisect_right(xs, x) - 1]

    def overlaps(self, Q: Interval) -> list[tuple[Fraction, Fraction]]:
        """``(value, length)`` pairs of ``Q`` intersected with every piece, exterior included."""
        out = []
        xs = self.breakpoints
        left = min(Q.b, xs[0]) - Q.a
        if left > 0:
            out.append((self.exterior_value, left))
        lo = max(bisect.bisect_right(xs, Q.a) - 1, 0)
        for i in range(lo, len(self.values)):
            a, b = max(xs[i], Q.a), min(xs[i + 1], Q.b)
            if a >= Q.b:
                break
            if b > a:
                out.append((self.values[i], b - a))
        right = Q.b - max(Q.a, xs[-1])
        if right > 0:
            out.append((self.exterior_value, right))
        return out

    def integral(self, Q: Interval) -> Fraction:
        return sum((v * ln for v, ln in self.overlaps(Q)), Fraction(0))

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_PIECEWISE,
            "kind": "constant" if isinstance(self, PiecewiseConstant) else "step",
            "breakpoints": [frac_to_json(x) for x in self.breakpoints],
            "values": [frac_to_json(v) for v in self.values],
            "exterior": frac_to_json(self.exterior_value),
        }

    @classmethod
    def from_json(cls, data: dict):
        if data.get("schema") != SCHEMA_PIECEWISE:
            raise ValueError(f"unsupported schema {data.get('schema')!r}")
        return cls(
            breakpoints=[frac_from_json(p) for p in data["breakpoints"]],
            values=[frac_from_json(p) for p in data["values"]],
            exterior_value=frac_from_json(data["exterior"]),
        )


def _merge_steps(xs, vs):
    out_x = [xs[0]]
    out_v: list[Fraction] = []
    for i, v in enumerate(vs):
        if out_v and out_v[-1] == v:
            out_x[-1] = xs[i + 1]
        else:
            out_v.append(v)
            out_x.append(xs[i + 1])
    return tuple(out_x), tuple(out_v)


class PiecewiseConstant(StepFunction):
    """Positive step function, used for weights."""

    def __init__(self, breakpoints, values, exterior_value=Fraction(1)):
        super().__init__(tuple(breakpoints), tuple(values), exterior_value)

    def _validate(self) -> None:
        if any(v <= 0 for v in self.values) or self.exterior_value <= 0:
            raise ValueError("weight values must be strictly positive")

    def reflect(self) -> "PiecewiseConstant":
        """Mirror about the midpoint of the window."""
        x0, x1 = self.breakpoints[0], self.breakpoints[-1]
        xs = [x0 + x1 - x for x in reversed(self.breakpoints)]
        return PiecewiseConstant(xs, list(reversed(self.values)), self.exterior_value)

    def scaled(self, c) -> "PiecewiseConstant":
        c = as_fraction(c)
        return PiecewiseConstant(self.breakpoints, [c * v for v in self.values], c * self.exterior_value)


@dataclass(frozen=True)
class PiecewiseLinear:
    """Continuous piecewise-linear function given by its node values."""

    breakpoints: tuple[Fraction, ...]
    node_values: tuple[Fraction, ...]
    exterior_value: Fraction = Fraction(0)

    def __post_init__(self):
        xs = _check_breaks(self.breakpoints)
        ys = tuple(as_fraction(y) for y in self.node_values)
        if len(ys) != len(xs):
            raise ValueError("need one node value per breakpoint")
        keep = [0]
        for i in range(1, len(xs) - 1):
            s_left = (ys[i] - ys[keep[-1]]) / (xs[i] - xs[keep[-1]])
            s_right = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])
            if s_left != s_right:
                keep.append(i)
        keep.append(len(xs) - 1)
        object.__setattr__(self, "breakpoints", tuple(xs[i] for i in keep))
        object.__setattr__(self, "node_values", tuple(ys[i] for i in keep))
        object.__setattr__(self, "exterior_value", as_fraction(self.exterior_value))

    @classmethod
    def from_slopes(cls, x0, slopes: Iterable, lengths: Iterable, y0=Fraction(0), exterior_value=Fraction(0)):
        xs = [as_fraction(x0)]
        ys = [as_fraction(y0)]
        for s, ln in zip(slopes, lengths):
            s, ln = as_fraction(s), as_fraction(ln)
            xs.append(xs[-1] + ln)
            ys.append(ys[-1] + s * ln)
        return cls(tuple(xs), tuple(ys), exterior_value)

    @property
    def boundary_matches(self) -> bool:
        return self.node_values[0] == self.exterior_value == self.node_values[-1]

    def slopes(self) -> list[Fraction]:
        xs, ys = self.breakpoints, self.node_values
        return [(ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(xs) - 1)]

    def __call__(self, x) -> Fraction:
        x = as_fraction(x)
        xs, ys = self.breakpoints, self.node_values
        if x < xs[0] or x > xs[-1]:
            return self.exterior_value
        i = min(bisect.bisect_right(xs, x) - 1, len(xs) - 2)
        return ys[i] + (ys[i + 1] - ys[i]) * (x - xs[i]) / (xs[i + 1] - xs[i])

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_PIECEWISE,
            "kind": "linear",
            "breakpoints": [frac_to_json(x) for x in self.breakpoints],
            "node_values": [frac_to_json(y) for y in self.node_values],
            "exterior": frac_to_json(self.exterior_value),
        }

    @classmethod
    def from_json(cls, data: dict) -> "PiecewiseLinear":
        if data.get("schema") != SCHEMA_PIECEWISE or data.get("kind") != "linear":
            raise ValueError("not a piecewise-linear document")
        return cls(
            tuple(frac_from_json(p) for p in data["breakpoints"]),
            tuple(frac_from_json(p) for p in data["node_values"]),
            frac_from_json(data["exterior"]),
        )


def pc_power_integral(w: StepFunction, Q: Interval, gamma, prec: int = DEFAULT_PREC) -> Scalar:
    """``∫_Q w**gamma``; a Fraction when ``gamma`` is an integer, else an mpf."""
    if not isinstance(Q, Interval):
        Q = Interval(*Q)
    parts = w.overlaps(Q)
    if _is_integral(gamma):
        g = int(gamma)
        return sum((Fraction(v) ** g * ln for v, ln in parts), Fraction(0))
    with mpmath.workprec(prec):
        total = mpmath.mpf(0)
        for v, ln in parts:
            total += power(v, gamma, prec) * _mp(ln, prec)
        return +total


def pl_derivative(u: PiecewiseLinear) -> StepFunction:
    """Exact slopes of ``u``; zero outside the window."""
    return StepFunction(u.breakpoints, tuple(u.slopes()), Fraction(0))


def pl_sup_norm(u: PiecewiseLinear) -> Fraction:
    return max(max(abs(y) for y in u.node_values), abs(u.exterior_value))


@dataclass(frozen=True)
class PrefixTable:
    """Cumulative integrals ``S[i] = ∫_{x_0}^{x_i} w**gamma``."""

    w: StepFunction
    gamma: object
    sums: tuple
    piece_powers: tuple
    exterior_power: object
    prec: int = DEFAULT_PREC
    exact: bool = field(default=True)

    def at(self, x) -> Scalar:
        """``∫_{x_0}^{x} w**gamma`` (negative for ``x < x_0``)."""
        x = as_fraction(x)
        xs = self.w.breakpoints
        conv = (lambda q: q) if self.exact else (lambda q: _mp(q, self.prec))
        if x <= xs[0]:
            return -self.exterior_power * conv(xs[0] - x)
        if x >= xs[-1]:
            return self.sums[-1] + self.exterior_power * conv(x - xs[-1])
        i = bisect.bisect_right(xs, x) - 1
        return self.sums[i] + self.piece_powers[i] * conv(x - xs[i])

    def integral(self, Q: Interval) -> Scalar:
        if self.exact:
            return self.at(Q.b) - self.at(Q.a)
        with mpmath.workprec(self.prec):
            return self.at(Q.b) - self.at(Q.a)


def prefix_tables(w: StepFunction, gamma, prec: int = DEFAULT_PREC) -> PrefixTable:
    exact = _is_integral(gamma)
    pw = tuple(power(v, gamma, prec) for v in w.values)
    ext = power(w.exterior_value, gamma, prec)
    ctx = mpmath.workprec(prec)
    with ctx:
        acc = Fraction(0) if exact else mpmath.mpf(0)
        sums = [acc]
        for p, ln in zip(pw, w.lengths()):
            acc = acc + p * (ln if exact else _mp(ln, prec))
            sums.append(acc)
    return PrefixTable(w, gamma, tuple(sums), pw, ext, prec, exact)
