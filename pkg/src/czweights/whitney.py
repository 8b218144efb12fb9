"""Truncated one-dimensional Whitney decompositions.

A component ``(a, b)`` of length ``L`` is covered by dyadic distance layers
toward each endpoint: layer ``j`` holds the points whose distance to the
nearer endpoint lies in ``[2^-(j+1) L, 2^-j L]`` and is cut into 128 equal
cubes of length ``2^-(j+8) L``.  Layer 1 on both sides is the central half
of the component.  After ``depth`` layers the two end slivers of length
``2^-(depth+1) L`` are left over as the residual.

With 128 cubes per layer every cube satisfies
``diam(W) <= dist(W, complement) / 100`` exactly; the ratio is 100/128.
"""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .geometry import Interval, as_fraction
from .sequences import frac_to_json

__all__ = [
    "CUBES_PER_LAYER",
    "SIZING",
    "WhitneyForest",
    "component_layout",
    "decompose",
    "overlap_constant",
    "depth_for_budget",
]

CUBES_PER_LAYER = 128
SIZING = Fraction(1, 100)


def component_layout(depth: int) -> list[tuple[str, int, Fraction]]:
    """Runs ``(kind, count, relative length)`` covering a unit component left to right.

    ``kind`` is ``"residual"`` or ``"cube:j"`` for layer ``j``.  Counts times
    lengths sum to one.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    sliver = Fraction(1, 2 ** (depth + 1))
    runs: list[tuple[str, int, Fraction]] = [("residual", 1, sliver)]
    for j in range(depth, 0, -1):
        runs.append((f"cube:{j}", CUBES_PER_LAYER, Fraction(1, 2 ** (j + 8))))
    for j in range(1, depth + 1):
        runs.append((f"cube:{j}", CUBES_PER_LAYER, Fraction(1, 2 ** (j + 8))))
    runs.append(("residual", 1, sliver))
    return runs


def depth_for_budget(epsilon, multiplicity: int = 1) -> int:
    """Smallest ``D >= 1`` with ``multiplicity * 2^-D <= epsilon``."""
    eps = as_fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    D = 1
    while Fraction(multiplicity, 2**D) > eps:
        D += 1
    return D


@dataclass
class WhitneyForest:
    level: int
    depth: int
    omega: tuple[Interval, ...]
    cubes: list[Interval]
    layer: list[int]
    component: list[int]
    parent: list[Optional[int]]
    residual: list[Interval]
    residual_budget: Fraction
    _starts: list[Fraction] = field(default_factory=list, repr=False)

    def __post_init__(self):
        order = sorted(range(len(self.cubes)), key=lambda i: self.cubes[i].a)
        if order != list(range(len(self.cubes))):
            self.cubes = [self.cubes[i] for i in order]
            self.layer = [self.layer[i] for i in order]
            self.component = [self.component[i] for i in order]
            self.parent = [self.parent[i] for i in order]
        self._starts = [c.a for c in self.cubes]

    @property
    def residual_measure(self) -> Fraction:
        return sum((r.length for r in self.residual), Fraction(0))

    def cubes_meeting(self, C: Interval) -> range:
        """Indices of cubes whose open interval meets ``C``."""
        hi = bisect.bisect_left(self._starts, C.b)
        lo = hi
        while lo > 0 and self.cubes[lo - 1].b > C.a:
            lo -= 1
        return range(lo, hi)

    def sizing_ok(self) -> bool:
        return all(_sizing_holds(c, self.omega[k]) for c, k in zip(self.cubes, self.component))

    def disjoint(self) -> bool:
        return all(self.cubes[i].b <= self.cubes[i + 1].a for i in range(len(self.cubes) - 1))

    def covers(self) -> bool:
        """Closures of cubes plus the residual tile every component exactly."""
        tiles = sorted([(c.a, c.b) for c in self.cubes] + [(r.a, r.b) for r in self.residual])
        pos = 0
        for comp in self.omega:
            x = comp.a
            while pos < len(tiles) and tiles[pos][0] < comp.b:
                if tiles[pos][0] != x:
                    return False
                x = tiles[pos][1]
                pos += 1
            if x != comp.b:
                return False
        return pos == len(tiles)

    def nested_in(self, parent: "WhitneyForest") -> bool:
        """Every cube sits inside the parent cube it meets; no cube crosses a parent boundary."""
        for i, c in enumerate(self.cubes):
            hits = list(parent.cubes_meeting(c))
            if len(hits) != 1 or not parent.cubes[hits[0]].contains(c):
                return False
            if self.parent[i] is not None and self.parent[i] != hits[0]:
                return False
        return True

    def to_json(self) -> dict:
        return {
            "level": self.level,
            "depth": self.depth,
            "cubes": [
                {"interval": [frac_to_json(c.a), frac_to_json(c.b)], "layer": lay, "parent": par}
                for c, lay, par in zip(self.cubes, self.layer, self.parent)
            ],
            "residual": [[frac_to_json(r.a), frac_to_json(r.b)] for r in self.residual],
        }


def _sizing_holds(W: Interval, comp: Interval) -> bool:
    dist = min(W.a - comp.a, comp.b - W.b)
    return W.length <= SIZING * dist


def _check_omega(omega: Sequence[Interval]) -> tuple[Interval, ...]:
    comps = sorted((c if isinstance(c, Interval) else Interval(*c) for c in omega), key=lambda c: c.a)
    if not comps:
        raise ValueError("omega must contain at least one interval")
    for left, right in zip(comps, comps[1:]):
        if left.b > right.a:
            raise ValueError(f"overlapping components {left} and {right}")
    return tuple(comps)


def decompose(
    omega: Sequence[Interval],
    depth: int,
    level: int = 1,
    parent: Optional[WhitneyForest] = None,
) -> WhitneyForest:
    """Whitney-decompose a finite disjoint union of open intervals.

    With ``parent`` given, every component must lie inside one parent cube
    and the new cubes record that cube's index.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    comps = _check_omega(omega)
    cubes: list[Interval] = []
    layers: list[int] = []
    owner: list[int] = []
    parents: list[Optional[int]] = []
    residual: list[Interval] = []
    for ci, comp in enumerate(comps):
        par = None
        if parent is not None:
            hits = list(parent.cubes_meeting(comp))
            if len(hits) != 1 or not parent.cubes[hits[0]].contains(comp):
                raise ValueError(f"component {comp} is not inside a single parent cube")
            par = hits[0]
        L = comp.length
        x = comp.a
        for kind, count, rel in component_layout(depth):
            step = rel * L
            if kind == "residual":
                residual.append(Interval(x, x + step))
                x += step
                continue
            j = int(kind.split(":")[1])
            for _ in range(count):
                cubes.append(Interval(x, x + step))
                layers.append(j)
                owner.append(ci)
                parents.append(par)
                x += step
        assert x == comp.b
    budget = sum((c.length for c in comps), Fraction(0)) / 2**depth
    return WhitneyForest(level, depth, comps, cubes, layers, owner, parents, residual, budget)


def overlap_constant(f: WhitneyForest, probes: Sequence[Interval]) -> Fraction:
    """Largest ``sum_{W meets C} |W| / |C|`` over probes touching the complement."""
    best = Fraction(0)
    for C in probes:
        if not isinstance(C, Interval):
            C = Interval(*C)
        if any(comp.contains(C) for comp in f.omega):
            raise ValueError(f"probe {C} lies inside the open set")
        total = sum((f.cubes[i].length for i in f.cubes_meeting(C)), Fraction(0))
        best = max(best, total / C.length)
    return best
