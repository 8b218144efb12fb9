"""Iterated sawtooth / Whitney construction of the weight ``w`` and profile ``u``.

Level 1 replaces ``u = 0`` on ``(0, 1)`` by a sawtooth with slopes ``h^1``
(fraction ``alpha_1``) and ``b_N`` (fraction ``beta_N``).  For
``k = 1 .. N-1`` every component of the region with slope ``h^k`` is
Whitney-decomposed and each cube gets a sawtooth with slopes ``h^{k+1}``
(fraction ``alpha_{k+1}/alpha_k``) and ``-2^k`` (fraction
``mu_k/alpha_k``).  The weight is ``2^-k`` where the slope ``-2^k`` was
laid down, ``1`` on the ``b_N`` part and outside ``[0, 1]``.  Whitney
truncation leaves slivers that keep the unrefined slope; they are labelled
as error pieces and carry the weight of the level that produced them.
Teeth in the left half of a component start with the ``-2^k`` segment, so
each sliver sits next to a piece of its own weight.

The result is stored as a :class:`~czweights.tree.Shape` DAG; identical
sub-patterns are shared, so ``N = 25`` builds in a few seconds.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import Optional

import mpmath

from .geometry import Interval, PiecewiseLinear, as_fraction
from .sequences import SequenceTable, build_table, frac_from_json, frac_to_json
from .tree import Leaf, Placed, Shape
from .whitney import CUBES_PER_LAYER, SIZING, WhitneyForest, component_layout, decompose, depth_for_budget

__all__ = [
    "AuditError",
    "BuildParams",
    "Construction",
    "PartitionLabeling",
    "DiagnosticsReport",
    "sawtooth_replace",
    "build",
    "audit",
    "teeth_count",
    "SCHEMA_CONSTRUCTION",
]

log = logging.getLogger(__name__)

SCHEMA_CONSTRUCTION = "czweights.construction/1"
DEFAULT_DELTA = Fraction(1, 2**10)


class AuditError(RuntimeError):
    pass


def _pow2_exponent_ceil(x: Fraction) -> int:
    """Smallest ``e >= 0`` with ``2**e >= x``."""
    if x <= 1:
        return 0
    q = -(-x.numerator // x.denominator)  # ceil(x) >= x, and 2^e >= x iff 2^e >= ceil(x)
    return (q - 1).bit_length()


def teeth_count(length, s1, parent, level: int, delta, policy: str = "pow2") -> int:
    """Teeth needed so one sawtooth stays within ``2^-(level+1) delta`` of its parent.

    The deviation of a tooth is at most ``(|s1| + |parent|) * length / m``.
    ``"exact"`` uses the ceiling of the required count, ``"pow2"`` rounds
    it up to a power of two so that equal-shaped regions share a pattern.
    """
    x = as_fraction(length) * (abs(as_fraction(s1)) + abs(as_fraction(parent))) * 2 ** (level + 1) / as_fraction(delta)
    if policy == "exact":
        return max(1, math.ceil(x))
    if policy == "pow2":
        return 2 ** _pow2_exponent_ceil(x)
    raise ValueError(f"unknown teeth policy {policy!r}")


def sawtooth_replace(W: Interval, parent_slope, s1, f1, s2, f2, m: int, u0=Fraction(0)):
    """Replace the affine function with slope ``parent_slope`` on ``W`` by ``m`` teeth.

    Each tooth is a slope-``s1`` segment of length ``f1 |W| / m`` followed
    by a slope-``s2`` segment of length ``f2 |W| / m``.  Returns the
    piecewise-linear fragment (starting at ``u0``) and the list of
    ``(Interval, 1 | 2)`` sublabels.
    """
    parent_slope, s1, f1, s2, f2 = map(as_fraction, (parent_slope, s1, f1, s2, f2))
    if f1 + f2 != 1 or f1 <= 0 or f2 <= 0:
        raise ValueError("fractions must be positive and sum to 1")
    if f1 * s1 + f2 * s2 != parent_slope:
        raise ValueError("f1*s1 + f2*s2 must equal the parent slope")
    if m < 1:
        raise ValueError("need at least one tooth")
    tooth = W.length / m
    slopes, lengths, labels = [], [], []
    x = W.a
    for _ in range(m):
        for s, f, lab in ((s1, f1, 1), (s2, f2, 2)):
            slopes.append(s)
            lengths.append(f * tooth)
            labels.append((Interval(x, x + f * tooth), lab))
            x += f * tooth
    frag = PiecewiseLinear.from_slopes(W.a, slopes, lengths, y0=as_fraction(u0), exterior_value=as_fraction(u0))
    return frag, labels


@dataclass(frozen=True)
class BuildParams:
    N: int
    delta: Fraction = DEFAULT_DELTA
    epsilon: Optional[Fraction] = None
    p_hint: float = 3
    teeth: str = "pow2"
    whitney_depth: Optional[int] = None

    def __post_init__(self):
        if isinstance(self.N, bool) or not isinstance(self.N, int) or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        object.__setattr__(self, "delta", as_fraction(self.delta))
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.p_hint <= 0:
            raise ValueError("p_hint must be positive")
        if self.epsilon is None:
            object.__setattr__(self, "epsilon", Fraction(1, 2 ** math.ceil((self.N + 2) * self.p_hint)))
        object.__setattr__(self, "epsilon", as_fraction(self.epsilon))
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not self.error_rule_ok():
            raise ValueError(
                f"epsilon={self.epsilon} violates 2^((N+1)p) * epsilon <= 1 for N={self.N}, p={self.p_hint}"
            )
        if self.teeth not in ("pow2", "exact"):
            raise ValueError(f"unknown teeth policy {self.teeth!r}")
        if self.whitney_depth is not None and self.whitney_depth < 1:
            raise ValueError("whitney_depth must be >= 1")

    def error_rule_ok(self) -> bool:
        expo = (self.N + 1) * self.p_hint
        if float(expo).is_integer():
            return Fraction(2) ** int(expo) * self.epsilon <= 1
        with mpmath.workprec(113):
            lhs = mpmath.mpf(expo) + mpmath.log(mpmath.mpf(self.epsilon.numerator) / self.epsilon.denominator, 2)
            return lhs <= 0

    @property
    def depth(self) -> int:
        """Whitney depth: smallest ``D`` with ``N 2^-D <= epsilon`` unless overridden."""
        if self.whitney_depth is not None:
            return self.whitney_depth
        return depth_for_budget(self.epsilon, self.N)

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "delta": frac_to_json(self.delta),
            "epsilon": frac_to_json(self.epsilon),
            "p_hint": self.p_hint,
            "teeth": self.teeth,
            "whitney_depth": self.whitney_depth,
        }

    @classmethod
    def from_json(cls, d: dict) -> "BuildParams":
        return cls(
            N=int(d["N"]),
            delta=frac_from_json(d["delta"]),
            epsilon=frac_from_json(d["epsilon"]),
            p_hint=d["p_hint"],
            teeth=d.get("teeth", "pow2"),
            whitney_depth=d.get("whitney_depth"),
        )


def label_of(key: tuple) -> str:
    """Short label for a leaf key: ``G3``, ``B``, ``E0``, ``X``."""
    if key[0] in ("G", "E"):
        return f"{key[0]}{key[1]}"
    return key[0]


@dataclass(frozen=True)
class PartitionLabeling:
    measures: dict
    N: int

    def measure(self, label: str) -> Fraction:
        return self.measures.get(label, Fraction(0))

    @property
    def good(self) -> dict:
        return {k: self.measure(f"G{k}") for k in range(1, self.N + 1)}

    @property
    def error(self) -> Fraction:
        return sum((v for k, v in self.measures.items() if k.startswith("E")), Fraction(0))

    @property
    def total(self) -> Fraction:
        return sum(self.measures.values(), Fraction(0))


@dataclass
class LevelInfo:
    level: int
    components: list = field(default_factory=list)  # (memo key, exact length or None, shape)
    cubes: list = field(default_factory=list)  # (shape, teeth)


@dataclass
class Construction:
    params: BuildParams
    table: SequenceTable
    body: Shape
    root_teeth: int
    whitney_depth: int
    levels: list
    log: list = field(default_factory=list)

    @property
    def N(self) -> int:
        return self.table.N

    @property
    def placed(self) -> Placed:
        return Placed(self.body, Fraction(0), Fraction(1), Fraction(1))

    def window(self, lo=Fraction(-1), hi=Fraction(2)) -> Placed:
        """The weight on ``[lo, hi]`` with the exterior pieces made explicit."""
        lo, hi = as_fraction(lo), as_fraction(hi)
        if not (lo < 0 and hi > 1):
            raise ValueError("window must strictly contain [0, 1]")
        ext = Leaf(("X",), 1, 0)
        span = hi - lo
        shape = Shape([(ext, 1, -lo / span), (self.body, 1, 1 / span), (ext, 1, (hi - 1) / span)], tag="window")
        return Placed(shape, lo, span, Fraction(1))

    @property
    def leaves(self) -> dict:
        return self.body.leaves

    @property
    def labeling(self) -> PartitionLabeling:
        return PartitionLabeling({label_of(k): v for k, v in self.body.measure.items()}, self.N)

    @property
    def sup_norm(self) -> Fraction:
        return max(self.body.umax, -self.body.umin)

    @property
    def piece_count(self) -> int:
        return self.body.pieces

    def cube_shapes(self) -> list[tuple[int, Shape]]:
        out = []
        for node in self.body.walk():
            if not node.is_leaf and node.tag.startswith("cube:"):
                out.append((int(node.tag.split(":")[1]), node))
        return out

    def u_function(self, limit: int = 200_000) -> PiecewiseLinear:
        return self.placed.primitive(limit)

    def whitney_forests(self, limit: int = 100_000) -> list[WhitneyForest]:
        """Explicit forests for every refinement level (small constructions only).

        Each level is recomputed with :func:`~czweights.whitney.decompose`
        from the located components, so comparing with the cubes embedded in
        the construction cross-checks the builder against the Whitney module.
        """
        comps: dict[int, list[Interval]] = {}
        cubes: dict[int, list[Interval]] = {}
        budget = [limit]

        def visit(node, x0, scale):
            if node.is_leaf:
                return
            tag = node.tag
            if tag.startswith("comp:"):
                comps.setdefault(int(tag.split(":")[1]), []).append(Interval(x0, x0 + scale))
            elif tag.startswith("cube:"):
                cubes.setdefault(int(tag.split(":")[1]), []).append(Interval(x0, x0 + scale))
            budget[0] -= 1
            if budget[0] < 0:
                raise OverflowError("construction too large to list its Whitney forests")
            x = x0
            for child, count, rel in node.runs:
                step = rel * scale
                for _ in range(count):
                    visit(child, x, step)
                    x += step

        visit(self.body, Fraction(0), Fraction(1))
        forests: list[WhitneyForest] = []
        parent = None
        for k in sorted(comps):
            f = decompose(comps[k], self.whitney_depth, level=k, parent=parent)
            if [ (c.a, c.b) for c in f.cubes ] != sorted((c.a, c.b) for c in cubes.get(k, [])):
                raise AssertionError(f"level {k}: builder cubes differ from the Whitney decomposition")
            forests.append(f)
            parent = f
        return forests

    def to_json(self) -> dict:
        return {
            "schema": SCHEMA_CONSTRUCTION,
            "params": self.params.to_json(),
            "table": self.table.to_json(),
            "root_teeth": self.root_teeth,
            "whitney_depth": self.whitney_depth,
            "tree": self.body.to_json(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Construction":
        if data.get("schema") != SCHEMA_CONSTRUCTION:
            raise ValueError(f"unsupported schema {data.get('schema')!r}")
        return cls(
            params=BuildParams.from_json(data["params"]),
            table=SequenceTable.from_json(data["table"]),
            body=Shape.from_json(data["tree"]),
            root_teeth=int(data["root_teeth"]),
            whitney_depth=int(data["whitney_depth"]),
            levels=[],
        )

    def tampered(self, key: tuple, slope_delta=Fraction(1, 1000)) -> "Construction":
        """Copy with the slope of one leaf type perturbed (negative testing)."""
        leaf = self.leaves[key]
        new = Leaf(leaf.key, leaf.weight, leaf.slope + as_fraction(slope_delta))
        body = self.body.replace_leaves({key: new})
        return Construction(self.params, self.table, body, self.root_teeth, self.whitney_depth, self.levels, list(self.log))


class _Builder:
    def __init__(self, params: BuildParams):
        self.p = params
        self.t = build_table(params.N)
        self.D = params.depth
        self.layout = component_layout(self.D)
        N, t = params.N, self.t
        self.B = Leaf(("B",), 1, t.b)
        self.G = {k: Leaf(("G", k), Fraction(1, 2**k), -(2**k)) for k in range(1, N + 1)}
        self.E = {k: Leaf(("E", k), Fraction(1, 2**k), t.h_(k + 1)) for k in range(0, N - 1)}
        self.levels = {k: LevelInfo(k) for k in range(1, N)}
        self._comp: dict = {}
        self._cube: dict = {}
        self._free_limit = self._free_limits()

    # split fractions at refinement step k (k -> k+1)
    def fractions(self, k: int) -> tuple[Fraction, Fraction]:
        t = self.t
        return t.alpha_(k + 1) / t.alpha_(k), t.mu_(k) / t.alpha_(k)

    def teeth(self, size: Fraction, k: int) -> int:
        return teeth_count(size, self.t.h_(k + 1), self.t.h_(k), k, self.p.delta, self.p.teeth)

    def is_free(self, k: int, L: Fraction) -> bool:
        """All sawtooth counts below a level-k component of length ``L`` equal 1."""
        return k >= self.p.N or L <= self._free_limit[k]

    def _free_limits(self) -> dict:
        # free(k, L) iff the largest cube (L / 2^9) needs one tooth and its child
        # component (f1 L / 2^9) is free; both conditions are monotone in L
        t, N = self.t, self.p.N
        limits: dict = {}
        below = None
        for k in range(N - 1, 0, -1):
            rate = (abs(t.h_(k + 1)) + abs(t.h_(k))) * 2 ** (k + 1) / self.p.delta
            lim = 2**9 / rate
            if below is not None:
                lim = min(lim, 2**9 * below / self.fractions(k)[0])
            limits[k] = below = lim
        return limits

    def component(self, k: int, L: Fraction):
        """Pattern of one component of the slope-``h^k`` region, of length ``L``."""
        free = self.is_free(k, L)
        key = (k, None if free else L)
        node = self._comp.get(key)
        if node is not None:
            return node
        runs = []
        for idx, (kind, count, rel) in enumerate(self.layout):
            if kind == "residual":
                runs.append((self.E[k - 1], count, rel))
            else:
                # left half mirrored so both truncation slivers border a G_k piece
                runs.append((self.cube(k, rel * L, flip=idx <= self.D), count, rel))
        node = Shape(runs, tag=f"comp:{k}")
        self._comp[key] = node
        self.levels[k].components.append((key, None if free else L, node))
        return node

    def cube(self, k: int, size: Fraction, flip: bool = False):
        m = self.teeth(size, k)
        f1, f2 = self.fractions(k)
        child_len = f1 * size / m
        if k + 1 == self.p.N:
            child, ckey = self.G[self.p.N], ("leaf",)
        else:
            free = self.is_free(k + 1, child_len)
            ckey = (k + 1, None if free else child_len)
            child = None
        key = (k, m, ckey, flip)
        node = self._cube.get(key)
        if node is not None:
            return node
        if child is None:
            child = self.component(k + 1, child_len)
        parts = [(child, 1, f1), (self.G[k], 1, f2)]
        tooth = Shape(parts[::-1] if flip else parts, tag=f"tooth:{k}")
        node = Shape([(tooth, m, Fraction(1, m))], tag=f"cube:{k}:{m}")
        self._cube[key] = node
        self.levels[k].cubes.append((node, m))
        return node

    def run(self) -> Construction:
        t, N = self.t, self.p.N
        m1 = teeth_count(Fraction(1), t.h_(1), 0, 0, self.p.delta, self.p.teeth)
        seg = t.alpha_(1) / m1
        first = self.G[1] if N == 1 else self.component(1, seg)
        tooth = Shape([(first, 1, t.alpha_(1)), (self.B, 1, t.beta)], tag="tooth:0")
        body = Shape([(tooth, m1, Fraction(1, m1))], tag="body")
        msgs = [
            f"N={N} delta={self.p.delta} epsilon={self.p.epsilon} whitney_depth={self.D}",
            f"root teeth={m1}, distinct nodes={sum(1 for _ in body.walk())}, pieces={body.pieces}",
        ]
        for m in msgs:
            log.debug(m)
        return Construction(self.p, t, body, m1, self.D, [self.levels[k] for k in sorted(self.levels)], msgs)


def build(params: BuildParams, check: bool = True) -> Construction:
    """Run the construction; with ``check`` the exact measure audit must pass."""
    c = _Builder(params).run()
    if check:
        rep = audit(c, measures_only=True)
        if not rep.passed:
            raise AuditError("; ".join(f"{x.name}: {x.detail}" for x in rep.failures()))
    return c


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class DiagnosticsReport:
    checks: tuple
    measures: dict
    sup_norm: Fraction
    cubes_checked: int

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
            "measures": {k: frac_to_json(v) for k, v in sorted(self.measures.items())},
            "sup_norm": frac_to_json(self.sup_norm),
            "cubes_checked": self.cubes_checked,
        }


def audit(c: Construction, measures_only: bool = False) -> DiagnosticsReport:
    """Exact verification of measures, labels, sup norm and the nested level counts."""
    t, N, eps = c.table, c.N, c.params.epsilon
    checks: list[Check] = []

    def add(name, ok, detail=""):
        checks.append(Check(name, bool(ok), detail))

    lab = c.labeling
    add("total_measure", lab.total == 1, str(lab.total))
    add("bad_measure", lab.measure("B") == t.beta, f"{lab.measure('B')} vs {t.beta}")
    for k in range(1, N + 1):
        g = lab.measure(f"G{k}")
        add(f"good_measure[{k}]", t.mu_(k) * (1 - eps) <= g <= t.mu_(k), f"{float(g / t.mu_(k))} of mu_k")
    add("error_measure", lab.error <= eps, f"{float(lab.error):.3e} <= {float(eps):.3e}")

    if not measures_only:
        for key, leaf in sorted(c.leaves.items(), key=lambda kv: str(kv[0])):
            if key[0] == "G":
                k = key[1]
                ok = leaf.weight == Fraction(1, 2**k) and leaf.slope == -(2**k)
            elif key[0] == "B":
                ok = leaf.weight == 1 and leaf.slope == t.b
            elif key[0] == "E":
                k = key[1]
                ok = leaf.weight == Fraction(1, 2**k) and leaf.slope == t.h_(k + 1)
            else:
                ok = False
            add(f"leaf[{label_of(key)}]", ok, f"w={leaf.weight} slope={leaf.slope}")
        add("boundary_values", c.body.du == 0, f"u(1)-u(0)={c.body.du}")
        add("sup_norm", c.sup_norm <= c.params.delta, f"{float(c.sup_norm):.3e} <= {float(c.params.delta):.3e}")

        # Whitney sizing of the unit layout (independent of the component length)
        pos = Fraction(0)
        sizing = True
        for kind, count, rel in component_layout(c.whitney_depth):
            if kind != "residual":
                for i in range(count):
                    a = pos + i * rel
                    dist = min(a, 1 - (a + rel))
                    sizing &= rel <= SIZING * dist
            pos += count * rel
        add("whitney_sizing", sizing)

    # per-cube level counts: |{w = 2^-j} ∩ W| <= (1 + eps) mu_j / alpha_k |W|
    cubes = c.cube_shapes()
    worst = Fraction(0)
    ok = True
    for k, shape in cubes:
        by_level: dict[int, Fraction] = {}
        for key, m in shape.measure.items():
            leaf = shape.leaves[key]
            j = leaf.weight.denominator.bit_length() - 1
            by_level[j] = by_level.get(j, Fraction(0)) + m
        for j in range(k, N + 1):
            bound = (1 + eps) * t.mu_(j) / t.alpha_(k)
            got = by_level.get(j, Fraction(0))
            if got > bound:
                ok = False
            worst = max(worst, got / bound)
        if shape.wmax > Fraction(1, 2**k):
            ok = False
    add("nested_level_counts", ok, f"{len(cubes)} cube patterns, worst ratio {float(worst):.6f}")
    return DiagnosticsReport(tuple(checks), dict(lab.measures), c.sup_norm, len(cubes))
