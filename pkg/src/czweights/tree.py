"""Hierarchical exact representation of huge piecewise functions.

The sawtooth/Whitney construction has far too many pieces to list (every
refinement level multiplies the count by several hundred), but it is built
from a handful of repeated patterns.  A :class:`Shape` is such a pattern on
the unit interval: a sequence of runs ``(child, count, rel)`` meaning
``count`` consecutive copies of ``child`` rescaled to length ``rel``.
Children are shapes or :class:`Leaf` pieces carrying a weight and a slope.
Shapes are shared, so the structure is a DAG whose size is polynomial in
the depth while the represented function may have ~10^40 pieces.

Aggregates (label measures, increments and extrema of the primitive,
weight range) are exact and cached per shape.  Because they are stated for
the unit interval they scale linearly with the length of an instance.
"""
from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Optional, Sequence

from .geometry import PiecewiseConstant, PiecewiseLinear, StepFunction, as_fraction
from .sequences import frac_from_json, frac_to_json

__all__ = ["Leaf", "Shape", "Placed", "from_step_function", "SCHEMA_TREE"]

SCHEMA_TREE = "czweights.tree/1"

_uid = itertools.count()


class Leaf:
    """A single piece: constant weight and constant slope, tagged by ``key``.

    ``key`` is a tuple such as ``("G", 3)``; pieces with equal keys are the
    same leaf type throughout one structure.
    """

    __slots__ = ("key", "weight", "slope", "uid")
    is_leaf = True

    def __init__(self, key: tuple, weight, slope=Fraction(0)):
        self.key = tuple(key)
        self.weight = as_fraction(weight)
        self.slope = as_fraction(slope)
        if self.weight <= 0:
            raise ValueError("leaf weight must be positive")
        self.uid = next(_uid)

    def __repr__(self):
        return f"Leaf({self.key}, w={self.weight}, s={self.slope})"

    # unit-interval aggregates, same interface as Shape
    @property
    def measure(self) -> dict:
        return {self.key: Fraction(1)}

    @property
    def leaves(self) -> dict:
        return {self.key: self}

    @property
    def du(self) -> Fraction:
        return self.slope

    @property
    def umax(self) -> Fraction:
        return max(Fraction(0), self.slope)

    @property
    def umin(self) -> Fraction:
        return min(Fraction(0), self.slope)

    @property
    def wmin(self) -> Fraction:
        return self.weight

    @property
    def wmax(self) -> Fraction:
        return self.weight

    @property
    def pieces(self) -> int:
        return 1

    @property
    def first_leaf(self) -> "Leaf":
        return self

    @property
    def last_leaf(self) -> "Leaf":
        return self

    def prefix_measure(self, x: Fraction) -> dict:
        return {self.key: x} if x > 0 else {}


def _add_into(acc: dict, other: dict, factor: Fraction) -> None:
    for k, v in other.items():
        acc[k] = acc.get(k, Fraction(0)) + factor * v


class Shape:
    """Unit-length pattern made of runs of rescaled children."""

    is_leaf = False

    def __init__(self, runs: Sequence[tuple], tag: str = ""):
        merged: list[tuple] = []
        for child, count, rel in runs:
            count = int(count)
            rel = as_fraction(rel)
            if count < 1 or rel <= 0:
                raise ValueError("runs need a positive count and length")
            if merged and merged[-1][0] is child and merged[-1][2] == rel:
                merged[-1] = (child, merged[-1][1] + count, rel)
            else:
                merged.append((child, count, rel))
        total = sum((c * r for _, c, r in merged), Fraction(0))
        if total != 1:
            raise ValueError(f"run lengths sum to {total}, expected 1")
        self.runs: tuple = tuple(merged)
        self.tag = tag
        self.uid = next(_uid)
        starts = [Fraction(0)]
        for _, c, r in self.runs:
            starts.append(starts[-1] + c * r)
        self.starts: tuple = tuple(starts)
        self._cache: dict = {}

    def __repr__(self):
        return f"Shape#{self.uid}({self.tag or len(self.runs)})"

    def _cached(self, name, fn):
        try:
            return self._cache[name]
        except KeyError:
            val = self._cache[name] = fn()
            return val

    @property
    def measure(self) -> dict:
        """Fraction of the unit length taken by each leaf key."""

        def build():
            acc: dict = {}
            for child, count, rel in self.runs:
                _add_into(acc, child.measure, count * rel)
            return acc

        return self._cached("measure", build)

    @property
    def leaves(self) -> dict:
        def build():
            acc: dict = {}
            for child, _, _ in self.runs:
                for k, leaf in child.leaves.items():
                    prev = acc.setdefault(k, leaf)
                    if prev is not leaf and (prev.weight, prev.slope) != (leaf.weight, leaf.slope):
                        raise ValueError(f"conflicting leaves for key {k}")
            return acc

        return self._cached("leaves", build)

    @property
    def du(self) -> Fraction:
        return self._cached("du", lambda: sum((c * r * ch.du for ch, c, r in self.runs), Fraction(0)))

    def _extrema(self):
        y = Fraction(0)
        hi = lo = Fraction(0)
        for child, count, rel in self.runs:
            step = rel * child.du
            last = y + (count - 1) * step
            hi = max(hi, y + rel * child.umax, last + rel * child.umax)
            lo = min(lo, y + rel * child.umin, last + rel * child.umin)
            y += count * step
        return hi, lo

    @property
    def umax(self) -> Fraction:
        return self._cached("ext", self._extrema)[0]

    @property
    def umin(self) -> Fraction:
        return self._cached("ext", self._extrema)[1]

    @property
    def wmin(self) -> Fraction:
        return self._cached("wmin", lambda: min(ch.wmin for ch, _, _ in self.runs))

    @property
    def wmax(self) -> Fraction:
        return self._cached("wmax", lambda: max(ch.wmax for ch, _, _ in self.runs))

    @property
    def pieces(self) -> int:
        """Number of leaf instances (before merging equal neighbours)."""
        return self._cached("pieces", lambda: sum(c * ch.pieces for ch, c, _ in self.runs))

    @property
    def first_leaf(self) -> Leaf:
        return self.runs[0][0].first_leaf

    @property
    def last_leaf(self) -> Leaf:
        return self.runs[-1][0].last_leaf

    def _cum_measure(self) -> list:
        def build():
            acc: dict = {}
            out = [dict(acc)]
            for child, count, rel in self.runs:
                _add_into(acc, child.measure, count * rel)
                out.append(dict(acc))
            return out

        return self._cached("cum", build)

    def locate(self, x: Fraction) -> tuple[int, int, Fraction]:
        """Run index, copy index and local coordinate in [0, 1) of point ``x``."""
        if x >= 1:
            i = len(self.runs) - 1
            return i, self.runs[i][1] - 1, Fraction(1)
        i = bisect.bisect_right(self.starts, x) - 1
        child, count, rel = self.runs[i]
        off = x - self.starts[i]
        copy = min(int(off // rel), count - 1)
        return i, copy, (off - copy * rel) / rel

    def prefix_measure(self, x: Fraction) -> dict:
        """Leaf-key measures of ``[0, x]`` for the unit-length shape."""
        x = as_fraction(x)
        if x <= 0:
            return {}
        if x >= 1:
            return dict(self.measure)
        i, copy, local = self.locate(x)
        child, count, rel = self.runs[i]
        acc = dict(self._cum_measure()[i])
        if copy:
            _add_into(acc, child.measure, copy * rel)
        if local:
            _add_into(acc, child.prefix_measure(local), rel)
        return acc

    def walk(self) -> Iterator["Shape | Leaf"]:
        """Every distinct node reachable from here, children before parents."""
        seen: set[int] = set()
        order: list = []

        def visit(node):
            if node.uid in seen:
                return
            seen.add(node.uid)
            if not node.is_leaf:
                for child, _, _ in node.runs:
                    visit(child)
            order.append(node)

        visit(self)
        return iter(order)

    def depth(self) -> int:
        return 1 + max((0 if ch.is_leaf else ch.depth()) for ch, _, _ in self.runs)

    def replace_leaves(self, mapping: dict) -> "Shape":
        """Copy of the DAG with leaves swapped according to ``{old_key: new_leaf}``."""
        memo: dict[int, object] = {}

        def rebuild(node):
            if node.is_leaf:
                return mapping.get(node.key, node)
            if node.uid in memo:
                return memo[node.uid]
            runs = [(rebuild(ch), c, r) for ch, c, r in node.runs]
            if all(new is old for new, (old, _, _) in zip((r[0] for r in runs), node.runs)):
                out = node
            else:
                out = Shape(runs, node.tag)
            memo[node.uid] = out
            return out

        return rebuild(self)

    def to_json(self) -> dict:
        nodes = []
        ids: dict[int, int] = {}
        for node in self.walk():
            ids[node.uid] = len(nodes)
            if node.is_leaf:
                nodes.append(
                    {
                        "leaf": list(node.key),
                        "weight": frac_to_json(node.weight),
                        "slope": frac_to_json(node.slope),
                    }
                )
            else:
                nodes.append(
                    {
                        "tag": node.tag,
                        "runs": [[ids[ch.uid], c, frac_to_json(r)] for ch, c, r in node.runs],
                    }
                )
        return {"schema": SCHEMA_TREE, "nodes": nodes, "root": len(nodes) - 1}

    @staticmethod
    def from_json(data: dict) -> "Shape":
        if data.get("schema") != SCHEMA_TREE:
            raise ValueError(f"unsupported schema {data.get('schema')!r}")
        built: list = []
        for entry in data["nodes"]:
            if "leaf" in entry:
                key = tuple(entry["leaf"])
                built.append(Leaf(key, frac_from_json(entry["weight"]), frac_from_json(entry["slope"])))
            else:
                runs = [(built[i], c, frac_from_json(r)) for i, c, r in entry["runs"]]
                built.append(Shape(runs, entry.get("tag", "")))
        return built[data["root"]]


@dataclass(frozen=True)
class Placed:
    """A shape laid on ``[origin, origin + length]`` of the real line.

    Outside that window the weight is ``exterior_weight`` and the slope 0.
    """

    shape: Shape
    origin: Fraction = Fraction(0)
    length: Fraction = Fraction(1)
    exterior_weight: Fraction = Fraction(1)

    @property
    def end(self) -> Fraction:
        return self.origin + self.length

    def _local(self, x: Fraction) -> Fraction:
        return (as_fraction(x) - self.origin) / self.length

    def measure_between(self, a, b) -> dict:
        """Leaf-key measures of ``[a, b]``; the exterior is keyed ``("X",)``."""
        a, b = as_fraction(a), as_fraction(b)
        if b < a:
            raise ValueError("need a <= b")
        out: dict = {}
        ext = max(Fraction(0), min(b, self.origin) - a) + max(Fraction(0), b - max(a, self.end))
        if ext:
            out[("X",)] = ext
        lo, hi = max(a, self.origin), min(b, self.end)
        if hi > lo:
            pb = self.shape.prefix_measure(self._local(hi))
            pa = self.shape.prefix_measure(self._local(lo))
            for k, v in pb.items():
                d = (v - pa.get(k, Fraction(0))) * self.length
                if d:
                    out[k] = out.get(k, Fraction(0)) + d
        return out

    def weights(self) -> dict:
        w = {k: leaf.weight for k, leaf in self.shape.leaves.items()}
        w[("X",)] = self.exterior_weight
        return w

    def slopes(self) -> dict:
        s = {k: leaf.slope for k, leaf in self.shape.leaves.items()}
        s[("X",)] = Fraction(0)
        return s

    def integral(self, a, b, values: dict) -> Fraction:
        """Exact ``∫_a^b f`` for a field given per leaf key."""
        return sum((m * values[k] for k, m in self.measure_between(a, b).items()), Fraction(0))

    def u_at(self, x) -> Fraction:
        """Primitive of the slope field, normalised to 0 at the left end."""
        x = as_fraction(x)
        if x <= self.origin:
            return Fraction(0)
        return self.integral(self.origin, min(x, self.end), self.slopes())

    def sup_abs_u(self) -> Fraction:
        return self.length * max(self.shape.umax, -self.shape.umin)

    def leaf_runs(self, limit: int = 200_000) -> list[tuple[Fraction, Fraction, Leaf]]:
        """Explicit ``(a, b, leaf)`` list; refuses when more than ``limit`` pieces."""
        if self.shape.pieces > limit:
            raise OverflowError(f"{self.shape.pieces} pieces exceed the flattening limit {limit}")
        out: list = []

        def emit(node, x0, scale):
            if node.is_leaf:
                out.append((x0, x0 + scale, node))
                return
            x = x0
            for child, count, rel in node.runs:
                step = rel * scale
                for _ in range(count):
                    emit(child, x, step)
                    x += step

        emit(self.shape, self.origin, self.length)
        return out

    def weight_function(self, limit: int = 200_000) -> PiecewiseConstant:
        runs = self.leaf_runs(limit)
        xs = [runs[0][0]] + [b for _, b, _ in runs]
        return PiecewiseConstant(xs, [leaf.weight for _, _, leaf in runs], self.exterior_weight)

    def slope_function(self, limit: int = 200_000) -> StepFunction:
        runs = self.leaf_runs(limit)
        xs = [runs[0][0]] + [b for _, b, _ in runs]
        return StepFunction(tuple(xs), tuple(leaf.slope for _, _, leaf in runs), Fraction(0))

    def primitive(self, limit: int = 200_000) -> PiecewiseLinear:
        runs = self.leaf_runs(limit)
        return PiecewiseLinear.from_slopes(
            self.origin, [leaf.slope for _, _, leaf in runs], [b - a for a, b, _ in runs]
        )


def from_step_function(w: StepFunction, fanout: int = 16, slopes: Optional[StepFunction] = None) -> Placed:
    """Wrap an explicit step function as a balanced shape tree.

    Leaves are keyed by ``("W", value)`` (or ``("W", value, slope)`` when a
    slope field on the same breakpoints is supplied).
    """
    xs = w.breakpoints
    total = xs[-1] - xs[0]
    leaf_cache: dict = {}
    items: list[tuple[object, Fraction]] = []
    slope_vals = None
    if slopes is not None:
        if slopes.breakpoints != xs:
            raise ValueError("slope field must share the weight breakpoints")
        slope_vals = slopes.values
    for i, (v, ln) in enumerate(zip(w.values, w.lengths())):
        s = slope_vals[i] if slope_vals is not None else Fraction(0)
        key = ("W", str(v)) if slope_vals is None else ("W", str(v), str(s))
        leaf = leaf_cache.get(key)
        if leaf is None:
            leaf = leaf_cache[key] = Leaf(key, v, s)
        items.append((leaf, ln))
    while len(items) > fanout or (items and items[0][0].is_leaf):
        grouped = []
        for g in range(0, len(items), fanout):
            chunk = items[g : g + fanout]
            length = sum((ln for _, ln in chunk), Fraction(0))
            node = Shape([(ch, 1, ln / length) for ch, ln in chunk], tag="block")
            grouped.append((node, length))
        items = grouped
        if len(items) == 1:
            break
    if len(items) > 1:
        length = sum((ln for _, ln in items), Fraction(0))
        root = Shape([(ch, 1, ln / length) for ch, ln in items], tag="block")
    else:
        root = items[0][0]
    return Placed(root, xs[0], total, w.exterior_value)
