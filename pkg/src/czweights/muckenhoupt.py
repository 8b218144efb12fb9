"""Muckenhoupt characteristic of piecewise-constant weights.

``Phi(a, b) = (avg w) (avg w^(-1/(r-1)))^(r-1)`` over ``Q = (a, b)``.  The
search works on the shape DAG of :mod:`czweights.tree`.  ``Phi`` is
invariant under affine changes of variable, so every distinct node is
searched once in its own unit coordinates:

* each window is flattened to about ``items`` aggregated pieces and every
  pair of piece boundaries is scored with numpy;
* windows are the node itself plus zooms around the boundaries between its
  children at factor-4 scales, deduplicated by their exact local layout;
* the boundary between two adjacent children recurses into the last child
  on the left and the first child on the right, memoized on the pair and
  the size ratio, down to two leaves where ``Phi`` is a 1-D maximisation;
* the best few intervals are refined by grid plus golden-section search,
  with endpoints snapped to nearby breakpoints to cross kinks, and the
  final value is recomputed at ``prec`` bits.

The result is a certified lower bound (every reported value is attained by
an explicit interval); it is a heuristic for the supremum itself.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import mpmath
import numpy as np

from .geometry import DEFAULT_PREC, Interval, StepFunction, as_fraction
from .sequences import SequenceTable, frac_to_json
from .tree import Leaf, Placed, Shape, from_step_function

__all__ = [
    "SearchConfig",
    "ArReport",
    "DoublingReport",
    "ar_characteristic",
    "phi_exact",
    "theoretical_bound",
    "doubling_check",
    "as_placed",
]

PHI = (math.sqrt(5) - 1) / 2
_GOLD = Fraction(2531, 4096)  # dyadic approximation of PHI keeps denominators small


@dataclass(frozen=True)
class SearchConfig:
    items: int = 256  # pieces per flattened window
    zoom_scales: int = 3  # factor-4 zoom levels per boundary
    grid_points: int = 9  # K: grid points per free endpoint in refinement
    golden_passes: int = 3  # L: coordinate-wise golden-section rounds
    refine_top: int = 6
    snap_breakpoints: int = 4  # nearest breakpoints tried per endpoint
    snap_rounds: int = 4
    window: Optional[tuple] = None  # None: [x0 - L, xM + L] of the weight's support
    aux_width: int = 8
    aux_grid: int = 48
    extra_candidates: tuple = ()
    prec: int = DEFAULT_PREC


@dataclass
class ArReport:
    r: float
    sup_estimate: mpmath.mpf
    argmax: Interval
    candidates: int
    refinement_passes: int
    window: Interval
    aux_sup: float
    prec: int = DEFAULT_PREC
    theoretical_bound: Optional[mpmath.mpf] = None
    kind: str = "certified lower bound; heuristic supremum"

    def to_json(self) -> dict:
        d = {
            "r": self.r,
            "sup_estimate": mpmath.nstr(self.sup_estimate, 30),
            "argmax": [frac_to_json(self.argmax.a), frac_to_json(self.argmax.b)],
            "candidates": self.candidates,
            "refinement_passes": self.refinement_passes,
            "window": [frac_to_json(self.window.a), frac_to_json(self.window.b)],
            "aux_sup": self.aux_sup,
            "precision_bits": self.prec,
            "kind": self.kind,
        }
        if self.theoretical_bound is not None:
            d["theoretical_bound"] = mpmath.nstr(self.theoretical_bound, 20)
        return d


def as_placed(w, window: Optional[tuple] = None) -> Placed:
    """Normalise a weight source to a :class:`Placed` covering the search window.

    Accepts a construction (anything with a ``window()`` method), a
    :class:`Placed`, or an explicit step function.
    """
    if hasattr(w, "window") and callable(w.window):
        return w.window(*window) if window else w.window()
    if isinstance(w, StepFunction):
        w = from_step_function(w)
    if not isinstance(w, Placed):
        raise TypeError(f"cannot use {type(w).__name__} as a weight")
    if window is None:
        lo, hi = w.origin - w.length, w.end + w.length
    else:
        lo, hi = map(as_fraction, window)
    if lo > w.origin or hi < w.end:
        raise ValueError("window must contain the weight's support")
    if lo == w.origin and hi == w.end:
        return w
    ext = Leaf(("X",), w.exterior_weight, 0)
    span = hi - lo
    runs = []
    if w.origin > lo:
        runs.append((ext, 1, (w.origin - lo) / span))
    runs.append((w.shape, 1, w.length / span))
    if hi > w.end:
        runs.append((ext, 1, (hi - w.end) / span))
    return Placed(Shape(runs, tag="window"), lo, span, w.exterior_weight)


def phi_exact(P: Placed, a, b, r, prec: int = DEFAULT_PREC) -> mpmath.mpf:
    """``Phi(a, b)`` from exact measures, powers at ``prec`` bits."""
    a, b = as_fraction(a), as_fraction(b)
    if not a < b:
        raise ValueError("empty interval")
    meas = P.measure_between(a, b)
    weights = P.weights()
    L = b - a
    with mpmath.workprec(prec):
        r_mp = mpmath.mpf(r)
        gamma = -1 / (r_mp - 1)
        i1 = sum((m * weights[k] for k, m in meas.items()), Fraction(0)) / L
        ig = mpmath.fsum(
            mpmath.mpf(m.numerator) / m.denominator * mpmath.power(mpmath.mpf(weights[k].numerator) / weights[k].denominator, gamma)
            for k, m in meas.items()
        )
        ig = ig / (mpmath.mpf(L.numerator) / L.denominator)
        return +(mpmath.mpf(i1.numerator) / i1.denominator * mpmath.power(ig, r_mp - 1))


@dataclass(order=True)
class _Cand:
    phi: float
    a: Fraction = field(compare=False)
    b: Fraction = field(compare=False)
    h: Fraction = field(compare=False)


class _Engine:
    def __init__(self, P: Placed, r: float, cfg: SearchConfig):
        self.P = P
        self.r = float(r)
        self.gamma = -1.0 / (self.r - 1.0)
        self.cfg = cfg
        self.T = max(8, int(cfg.items))
        self._dens: dict = {}
        self._leafpow: dict = {}
        self._pair: dict = {}
        self._windows: dict = {}
        self._two: dict = {}
        self._frel: dict = {}
        self._tot: dict = {}
        self.evaluated = 0
        self.top: list[_Cand] = []
        self.best = 1.0
        self.weights = P.weights()

    # per-node unit densities of w and w^gamma
    def density(self, node) -> tuple[float, float]:
        d = self._dens.get(node.uid)
        if d is None:
            s1 = 0.0
            sg = 0.0
            for key, m in node.measure.items():
                w = node.leaves[key].weight if not node.is_leaf else node.weight
                mf = float(m)
                s1 += mf * float(w)
                sg += mf * self.wpow(w)
            d = self._dens[node.uid] = (s1, sg)
        return d

    def wpow(self, w: Fraction) -> float:
        v = self._leafpow.get(w)
        if v is None:
            v = self._leafpow[w] = float(w) ** self.gamma
        return v

    def offer(self, phi: float, a: Fraction, b: Fraction, h: Fraction) -> None:
        self.evaluated += 1
        if phi > self.best:
            self.best = phi
        c = _Cand(phi, a, b, h)
        self.top.append(c)
        if len(self.top) > 4 * self.cfg.refine_top:
            self.top.sort(reverse=True)
            del self.top[self.cfg.refine_top :]

    def frels(self, node) -> list:
        v = self._frel.get(node.uid)
        if v is None:
            v = self._frel[node.uid] = [(child, count, float(rel)) for child, count, rel in node.runs]
        return v

    # flatten the part of the placements inside [lo, hi]
    def flatten(self, placements, lo: Fraction, hi: Fraction):
        """Items covering ``[lo, hi]`` as window-relative floats.

        Nodes much larger than the window are descended exactly; below that
        positions are floats in units of the window, which is accurate since
        only pieces of at least ``1/(64 T)`` of the window are resolved.
        """
        span = hi - lo
        res = 1.0 / self.T
        xs: list[float] = []
        i1: list[float] = []
        ig: list[float] = []

        pend = [0.0, 0.0, 0.0]  # length, int w, int w^gamma of merged small pieces

        def flush():
            if pend[0] > 0.0:
                xs.append(xs[-1] + pend[0])
                i1.append(pend[1])
                ig.append(pend[2])
                pend[0] = pend[1] = pend[2] = 0.0

        def emit(a, b, node):
            d1, dg = self.density(node)
            a = max(a, 0.0)
            b = min(b, 1.0)
            if b <= a:
                return
            if not xs:
                xs.append(a)
            ln = b - a
            if ln < res:
                # pieces below the resolution are merged into one item
                pend[0] += ln
                pend[1] += d1 * ln
                pend[2] += dg * ln
                if pend[0] >= res:
                    flush()
                return
            flush()
            xs.append(xs[-1] + ln)
            i1.append(d1 * ln)
            ig.append(dg * ln)

        def gen(node, x0: float, scale: float):
            b0 = x0 + scale
            if b0 <= 0.0 or x0 >= 1.0:
                return
            inside = x0 >= 0.0 and b0 <= 1.0
            if node.is_leaf or (scale <= res and inside) or scale <= res / 64:
                emit(x0, b0, node)
                return
            x = x0
            for child, count, rel in self.frels(node):
                step = rel * scale
                end = x + count * step
                if end > 0.0 and x < 1.0:
                    gen_run(child, count, x, step)
                x = end

        def gen_run(child, count: int, x: float, step: float):
            """Copies of ``child`` at ``x + i * step``; small inner copies are grouped."""
            i = max(0, math.floor(-x / step))
            i_end = min(count, math.ceil((1.0 - x) / step))
            while i < i_end:
                cx = x + i * step
                if step <= res and cx >= 0.0 and cx + step <= 1.0:
                    g = max(1, int(res / step))
                    j = min(i_end, i + g, int((1.0 - x) / step))
                    if j > i:
                        emit(cx, x + j * step, child)
                        i = j
                        continue
                gen(child, cx, step)
                i += 1

        def gen_exact(node, x0: Fraction, scale: Fraction):
            if x0 + scale <= lo or x0 >= hi:
                return
            if node.is_leaf or scale <= 4 * span:
                gen(node, float((x0 - lo) / span), float(scale / span))
                return
            # only the few children meeting the window
            k = max(0, bisect.bisect_right(node.starts, (lo - x0) / scale) - 1)
            while k < len(node.runs) and x0 + node.starts[k] * scale < hi:
                child, count, rel = node.runs[k]
                step = rel * scale
                base = x0 + node.starts[k] * scale
                i = max(0, math.floor((lo - base) / step))
                i_end = min(count, math.ceil((hi - base) / step))
                if step <= 4 * span:
                    # shift the run origin next to the window so floats stay accurate
                    shifted = base + i * step
                    gen_run(child, i_end - i, float((shifted - lo) / span), float(step / span))
                else:
                    for ii in range(i, i_end):
                        gen_exact(child, base + ii * step, step)
                k += 1

        for node, x0, scale in placements:
            gen_exact(node, x0, scale)
        flush()
        return xs, np.array(i1), np.array(ig)

    def score(self, xs: list, i1: np.ndarray, ig: np.ndarray):
        """Best pair of boundaries: ``(phi, i, j)`` for the interval ``[xs[i], xs[j]]``."""
        n = len(i1)
        if n < 2:
            return 1.0, 0, n
        t = np.asarray(xs)
        m1 = np.triu(np.broadcast_to(i1, (n, n)))
        mg = np.triu(np.broadcast_to(ig, (n, n)))
        s1 = np.cumsum(m1, axis=1)
        sg = np.cumsum(mg, axis=1)
        L = t[None, 1:] - t[:-1, None]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            val = (s1 / L) * np.power(sg / L, self.r - 1.0)
        val[np.tril_indices(n, -1)] = -np.inf
        val[~np.isfinite(val)] = -np.inf
        k = int(np.argmax(val))
        i, j = divmod(k, n)
        return float(val[i, j]), i, j + 1

    def window_search(self, placements, lo: Fraction, hi: Fraction, key=None, place=(Fraction(0), Fraction(1))):
        """Score one window; results are cached by ``key`` in window-relative units.

        ``place = (x0, scale)`` maps the placement coordinates to absolute ones.
        """
        span = hi - lo
        x0, scale = place
        if key is not None and key in self._windows:
            phi, ra, rb = self._windows[key]
        else:
            xs, i1, ig = self.flatten(placements, lo, hi)
            phi, i, j = self.score(xs, i1, ig)
            ra, rb = Fraction(xs[i]), Fraction(xs[j])
            if key is not None:
                self._windows[key] = (phi, ra, rb)
        self.offer(phi, x0 + scale * (lo + ra * span), x0 + scale * (lo + rb * span), scale * span / self.T)
        return phi

    # boundary between adjacent children A | B, in units where |B| = 1
    def two_leaf(self, wa: Fraction, wb: Fraction) -> tuple[float, float]:
        key = (wa, wb)
        if key not in self._two:
            if wa == wb:
                self._two[key] = (1.0, 0.5)
            else:
                fa, fb = float(wa), float(wb)
                ga, gb = self.wpow(wa), self.wpow(wb)
                f = lambda th: (th * fa + (1 - th) * fb) * (th * ga + (1 - th) * gb) ** (self.r - 1)
                th = np.linspace(0.0, 1.0, 401)
                vals = f(th)
                k = int(np.argmax(vals))
                lo_, hi_ = th[max(k - 1, 0)], th[min(k + 1, 400)]
                for _ in range(60):
                    m1 = hi_ - PHI * (hi_ - lo_)
                    m2 = lo_ + PHI * (hi_ - lo_)
                    if f(m1) < f(m2):
                        lo_ = m1
                    else:
                        hi_ = m2
                th_best = (lo_ + hi_) / 2
                self._two[key] = (float(f(th_best)), th_best)
        return self._two[key]

    def prunable(self, *nodes) -> bool:
        wmax = max(n.wmax if not n.is_leaf else n.weight for n in nodes)
        wmin = min(n.wmin if not n.is_leaf else n.weight for n in nodes)
        return float(wmax / wmin) <= self.best

    def pair(self, A, B, ratio: Fraction):
        """Best interval near the boundary of ``A`` (length ``ratio``) and ``B`` (length 1).

        Returns ``(phi, a, b)`` with the boundary at 0.
        """
        key = (A.uid, B.uid, ratio)
        hit = self._pair.get(key)
        if hit is not None:
            return hit
        if self.prunable(A, B):
            out = (1.0, Fraction(0), Fraction(1))
            self._pair[key] = out
            return out
        placements = [(A, -ratio, ratio), (B, Fraction(0), Fraction(1))]
        best = (1.0, Fraction(0), Fraction(1))
        if A.is_leaf and B.is_leaf:
            phi, th = self.two_leaf(A.weight, B.weight)
            ell = min(ratio, Fraction(1)) / 2
            thf = Fraction(th).limit_denominator(2**40)
            best = (phi, -thf * ell, (1 - thf) * ell)
        else:
            rho = min(ratio, Fraction(1))
            for _ in range(self.cfg.zoom_scales):
                xs, i1, ig = self.flatten(placements, -rho, rho)
                phi, i, j = self.score(xs, i1, ig)
                self.evaluated += 1
                if phi > best[0]:
                    best = (phi, -rho + 2 * rho * Fraction(xs[i]), -rho + 2 * rho * Fraction(xs[j]))
                rho /= 4
            A2, ra = (A, ratio) if A.is_leaf else (A.runs[-1][0], ratio * A.runs[-1][2])
            B2, rb = (B, Fraction(1)) if B.is_leaf else (B.runs[0][0], B.runs[0][2])
            sub = self.pair(A2, B2, ra / rb)
            if sub[0] > best[0]:
                best = (sub[0], sub[1] * rb, sub[2] * rb)
        self._pair[key] = best
        if best[0] > self.best:
            self.best = best[0]
        return best

    def boundaries(self, S: Shape):
        """Representative child boundaries of ``S``: ``(position, A, |A|, B, |B|)``."""
        out = []
        runs = S.runs
        for idx, (child, count, rel) in enumerate(runs):
            start = S.starts[idx]
            if count >= 2:
                out.append((start + rel, child, rel, child, rel))
            if count >= 4:
                mid = count // 2
                out.append((start + mid * rel, child, rel, child, rel))
            if idx + 1 < len(runs):
                nxt, _, nrel = runs[idx + 1]
                out.append((S.starts[idx + 1], child, rel, nxt, nrel))
        return out

    def node_search(self, S: Shape, x0: Fraction, scale: Fraction) -> None:
        """All windows of one distinct node, in its first-occurrence placement.

        Windows are evaluated in node-local units and mapped back through
        ``x -> x0 + scale * x``.
        """
        unit = [(S, Fraction(0), Fraction(1))]
        self.window_search(unit, Fraction(0), Fraction(1), key=("node", S.uid), place=(x0, scale))
        for pos, A, sa, B, sb in self.boundaries(S):
            if self.prunable(A, B) and self.prunable(S):
                continue
            # zooms larger than both neighbours, capped by the node itself
            rho = 4 * max(sa, sb)
            for _ in range(self.cfg.zoom_scales):
                if rho >= Fraction(1, 2):
                    break
                lo, hi = max(Fraction(0), pos - rho), min(Fraction(1), pos + rho)
                sig = self._signature(S, pos, lo, hi, rho)
                self.window_search(unit, lo, hi, key=sig, place=(x0, scale))
                rho *= 4
            phi, ra, rb = self.pair(A, B, sa / sb)
            x = x0 + pos * scale
            u = sb * scale
            self.offer(phi, x + ra * u, x + rb * u, u / self.T)

    @staticmethod
    def _signature(S: Shape, pos, lo, hi, rho):
        parts = []
        k = max(0, bisect.bisect_right(S.starts, lo) - 1)
        while k < len(S.runs) and S.starts[k] < hi:
            child, count, rel = S.runs[k]
            parts.append((child.uid, rel / rho, (S.starts[k] - pos) / rho, (S.starts[k + 1] - pos) / rho))
            k += 1
        return ("zoom", (lo - pos) / rho, (hi - pos) / rho, tuple(parts))

    def distinct_nodes(self):
        """First occurrence ``(node, x0, scale)`` of every distinct inner node."""
        seen = set()
        order = []

        def visit(node, x0, scale):
            if node.is_leaf or node.uid in seen:
                return
            seen.add(node.uid)
            order.append((node, x0, scale))
            for idx, (child, _, rel) in enumerate(node.runs):
                visit(child, x0 + node.starts[idx] * scale, rel * scale)

        visit(self.P.shape, self.P.origin, self.P.length)
        return order

    def _totals(self, node):
        """Per-run float integrals of ``w`` and ``w^gamma`` in node units."""
        v = self._tot.get(node.uid)
        if v is None:
            t1, tg = [], []
            for child, count, rel in node.runs:
                d1, dg = self.density(child)
                t1.append(count * float(rel) * d1)
                tg.append(count * float(rel) * dg)
            v = self._tot[node.uid] = (t1, tg)
        return v

    def _prefix(self, node, x: Fraction) -> tuple[float, float]:
        if node.is_leaf or x >= 1:
            d1, dg = self.density(node)
            f = float(x)
            return d1 * f, dg * f
        if x <= 0:
            return 0.0, 0.0
        i, c, loc = node.locate(x)
        child, count, rel = node.runs[i]
        t1, tg = self._totals(node)
        d1, dg = self.density(child)
        p1, pg = self._prefix(child, loc)
        fr = float(rel)
        return (
            math.fsum(t1[:i]) + fr * (c * d1 + p1),
            math.fsum(tg[:i]) + fr * (c * dg + pg),
        )

    def _suffix(self, node, x: Fraction) -> tuple[float, float]:
        if node.is_leaf or x <= 0:
            d1, dg = self.density(node)
            f = float(1 - x)
            return d1 * f, dg * f
        if x >= 1:
            return 0.0, 0.0
        i, c, loc = node.locate(x)
        child, count, rel = node.runs[i]
        t1, tg = self._totals(node)
        d1, dg = self.density(child)
        s1, sg = self._suffix(child, loc)
        fr = float(rel)
        rest = count - c - 1
        return (
            math.fsum(t1[i + 1 :]) + fr * (rest * d1 + s1),
            math.fsum(tg[i + 1 :]) + fr * (rest * dg + sg),
        )

    def phi_float(self, a: Fraction, b: Fraction) -> float:
        """``Phi(a, b)`` in floats, summed below the lowest node containing both ends."""
        P = self.P
        ua = (a - P.origin) / P.length
        ub = (b - P.origin) / P.length
        out1 = out_g = 0.0
        if ua < 0 or ub > 1:
            # exterior parts are exact
            ext = max(Fraction(0), -ua) + max(Fraction(0), ub - 1)
            out1 = float(ext) * float(P.exterior_weight)
            out_g = float(ext) * self.wpow(P.exterior_weight)
            ua, ub = max(ua, Fraction(0)), min(ub, Fraction(1))
            L = float(b - a) / float(P.length)
            if ub > ua:
                i1, ig = self._segment(P.shape, ua, ub)
                out1 += i1
                out_g += ig
            return (out1 / L) * (out_g / L) ** (self.r - 1)
        node = P.shape
        while not node.is_leaf:
            ia, ca, la = node.locate(ua)
            ib, cb, lb = node.locate(ub)
            if (ia, ca) != (ib, cb):
                break
            node = node.runs[ia][0]
            ua, ub = la, lb
        if node.is_leaf:
            return 1.0
        i1, ig = self._segment(node, ua, ub)
        L = float(ub - ua)
        return (i1 / L) * (ig / L) ** (self.r - 1)

    def _segment(self, node, ua: Fraction, ub: Fraction) -> tuple[float, float]:
        if node.is_leaf:
            d1, dg = self.density(node)
            f = float(ub - ua)
            return d1 * f, dg * f
        ia, ca, la = node.locate(ua)
        ib, cb, lb = node.locate(ub)
        if (ia, ca) == (ib, cb):
            child, _, rel = node.runs[ia]
            i1, ig = self._segment(child, la, lb)
            return float(rel) * i1, float(rel) * ig
        ca_child, cnt_a, rel_a = node.runs[ia]
        cb_child, _, rel_b = node.runs[ib]
        s1, sg = self._suffix(ca_child, la)
        p1, pg = self._prefix(cb_child, lb)
        t1, tg = self._totals(node)
        da1, dag = self.density(ca_child)
        db1, dbg = self.density(cb_child)
        if ia == ib:
            mid = cb - ca - 1
            m1 = mid * float(rel_a) * da1
            mg = mid * float(rel_a) * dag
        else:
            ra = cnt_a - ca - 1
            m1 = ra * float(rel_a) * da1 + math.fsum(t1[ia + 1 : ib]) + cb * float(rel_b) * db1
            mg = ra * float(rel_a) * dag + math.fsum(tg[ia + 1 : ib]) + cb * float(rel_b) * dbg
        return (
            float(rel_a) * s1 + m1 + float(rel_b) * p1,
            float(rel_a) * sg + mg + float(rel_b) * pg,
        )

    def _line(self, f, lo: Fraction, hi: Fraction, best: float, cur: Fraction) -> tuple[float, Fraction]:
        """Grid plus golden-section maximisation of ``f`` on ``[lo, hi]``."""
        K = self.cfg.grid_points
        pts = [lo + (hi - lo) * i / (K - 1) for i in range(K)]
        vals = [f(x) for x in pts]
        k = max(range(K), key=lambda i: vals[i])
        if vals[k] > best:
            best, cur = vals[k], pts[k]
        gl = pts[max(k - 1, 0)]
        gh = pts[min(k + 1, K - 1)]
        tol = (hi - lo) * Fraction(1, 2**40)
        for _ in range(80):
            if gh - gl <= tol:
                break
            m1 = gh - (gh - gl) * _GOLD
            m2 = gl + (gh - gl) * _GOLD
            f1, f2 = f(m1), f(m2)
            if f1 > best:
                best, cur = f1, m1
            if f2 > best:
                best, cur = f2, m2
            if f1 < f2:
                gl = m1
            else:
                gh = m2
        return best, cur

    def _climb(self, a: Fraction, b: Fraction, h: Fraction, best: float) -> _Cand:
        K, Lp = self.cfg.grid_points, self.cfg.golden_passes
        shrinks = rounds = 0
        while shrinks < Lp and rounds < 64:
            rounds += 1
            before = best
            for side in (0, 1):
                fixed = b if side == 0 else a
                cur = a if side == 0 else b
                lo, hi = cur - h, cur + h
                if side == 0:
                    hi = min(hi, fixed - (fixed - cur) / 2)
                else:
                    lo = max(lo, fixed + (cur - fixed) / 2)
                if not lo < hi:
                    continue
                f = (lambda x: self.phi_float(x, fixed)) if side == 0 else (lambda x: self.phi_float(fixed, x))
                best, cur = self._line(f, lo, hi, best, cur)
                if side == 0:
                    a = cur
                else:
                    b = cur
            if not best > before * (1 + 1e-13):
                h = h * 2 / (K - 1)
                shrinks += 1
        return _Cand(best, a, b, h)

    def _snap(self, c: _Cand) -> _Cand:
        """Pin one endpoint to each nearby breakpoint and re-optimise the other.

        Coordinate moves stall where the maximiser jumps from one breakpoint
        to the next while the far endpoint moves a long way.
        """
        P = self.P
        L = c.b - c.a
        best = c
        for side in (0, 1):
            x = c.a if side == 0 else c.b
            lo, hi = x - L / 8, x + L / 8
            xs, _, _ = self.flatten([(P.shape, P.origin, P.length)], lo, hi)
            bps = sorted({lo + (hi - lo) * Fraction(t) for t in xs[1:-1]}, key=lambda y: abs(y - x))
            for y in bps[: self.cfg.snap_breakpoints]:
                other = c.b if side == 0 else c.a
                if side == 0:
                    f = lambda z: self.phi_float(y, z)
                    olo, ohi = max(y + (other - y) / 4, other - L / 2), other + L / 2
                else:
                    f = lambda z: self.phi_float(z, y)
                    olo, ohi = other - L / 2, min(y - (y - other) / 4, other + L / 2)
                if not olo < ohi:
                    continue
                v, z = self._line(f, olo, ohi, f(other), other)
                if v > best.phi * (1 + 1e-13):
                    best = _Cand(v, y, z, c.h) if side == 0 else _Cand(v, z, y, c.h)
        return best

    def refine(self, c: _Cand) -> _Cand:
        """Coordinate-wise grid plus golden-section search around a candidate.

        A pass updates each endpoint in turn.  The search window only
        shrinks after a pass that fails to improve, so ridges where both
        endpoints must move together are still climbed; ``golden_passes``
        shrinks end a climb.  Breakpoint snapping then restarts the climb
        while it keeps improving.
        """
        cur = self._climb(c.a, c.b, c.h, self.phi_float(c.a, c.b))
        for _ in range(self.cfg.snap_rounds):
            s = self._snap(cur)
            if not s.phi > cur.phi * (1 + 1e-13):
                break
            cur = self._climb(s.a, s.b, c.h, s.phi)
        return cur

    def aux_grid(self) -> tuple[float, Fraction, Fraction]:
        """Coarse grid over intervals containing the window, up to ``aux_width``."""
        P = self.P
        W = self.cfg.aux_width
        total1 = float(P.integral(P.origin, P.end, self.weights))
        meas = P.measure_between(P.origin, P.end)
        totalg = sum(float(m) * self.wpow(self.weights[k]) for k, m in meas.items())
        span = float(P.length)
        ew = float(P.exterior_weight)
        eg = self.wpow(P.exterior_weight)
        best = (0.0, P.origin, P.end)
        n = self.cfg.aux_grid
        extra = max(0.0, W - span)
        for i in range(n + 1):
            for j in range(n + 1 - i):
                left = extra * i / n
                right = extra * j / n
                L = span + left + right
                v = ((total1 + ew * (left + right)) / L) * ((totalg + eg * (left + right)) / L) ** (self.r - 1)
                if v > best[0]:
                    best = (v, P.origin - Fraction(left), P.end + Fraction(right))
        return best


def ar_characteristic(w, r: float, search: SearchConfig = SearchConfig()) -> ArReport:
    """Estimate ``[w]_{A_r}`` by structured search over intervals in the window."""
    if not r > 1:
        raise ValueError(f"r must exceed 1, got {r}")
    P = as_placed(w, search.window)
    eng = _Engine(P, r, search)
    eng.window_search([(P.shape, P.origin, P.length)], P.origin, P.end)
    for node, x0, scale in eng.distinct_nodes():
        eng.node_search(node, x0, scale)
    aux = eng.aux_grid()

    pool = sorted(eng.top, reverse=True)
    chosen: list[_Cand] = []
    for c in pool:
        if all((c.a, c.b) != (d.a, d.b) for d in chosen):
            chosen.append(c)
        if len(chosen) >= search.refine_top:
            break
    refined = [eng.refine(c) for c in chosen]

    finals: list[tuple[Fraction, Fraction]] = [(c.a, c.b) for c in refined] + [(c.a, c.b) for c in chosen]
    for Q in search.extra_candidates:
        Q = Q if isinstance(Q, Interval) else Interval(*Q)
        finals.append((Q.a, Q.b))
    # a piece of the exterior: Phi = 1 exactly
    finals.append((P.origin - 1, P.origin - Fraction(1, 2)))
    with mpmath.workprec(search.prec):
        best_val = None
        best_iv = None
        for a, b in finals:
            if not a < b:
                continue
            v = phi_exact(P, a, b, r, search.prec)
            if best_val is None or v > best_val:
                best_val, best_iv = v, (a, b)
        aux_v = phi_exact(P, aux[1], aux[2], r, search.prec)
        if aux_v > best_val:
            best_val, best_iv = aux_v, (aux[1], aux[2])
    return ArReport(
        r=float(r),
        sup_estimate=best_val,
        argmax=Interval(*best_iv),
        candidates=eng.evaluated + len(finals),
        refinement_passes=search.golden_passes,
        window=Interval(P.origin, P.end),
        aux_sup=float(aux[0]),
        prec=search.prec,
    )


def theoretical_bound(r: float, N: Optional[int] = None, table: Optional[SequenceTable] = None, prec: int = DEFAULT_PREC):
    """Explicit majorant of the characteristic with tracked constants.

    With ``x = 2^((2-r)/(r-1))`` the uniform-in-``N`` bounds for intervals
    spread over many levels and for intervals inside one deep level are
    ``(1 + 4 sum_k x^k / k)^(r-1)`` (overlap factor 2 times ``1/alpha_1 <= 4``
    halved by ``mu_k``) and ``(2 / (1 - x))^(r-1)``.  With a table the
    ``N``-specific sums are also evaluated and the largest value is returned,
    never below 1.
    """
    if not r > 2:
        raise ValueError(f"the majorant series diverges for r <= 2 (got r={r})")
    with mpmath.workprec(prec):
        rr = mpmath.mpf(r)
        e = rr - 1
        x = mpmath.power(2, (2 - rr) / e)
        spread = mpmath.power(1 + 4 * (-mpmath.log(1 - x)), e)
        local = mpmath.power(2 / (1 - x), e)
        vals = [mpmath.mpf(1), spread, local]
        if table is not None:
            q = lambda k: mpmath.power(2, mpmath.mpf(k) / e)
            fr = lambda v: mpmath.mpf(v.numerator) / v.denominator
            a1 = fr(table.alpha_(1))
            vals.append(mpmath.power(1 + 2 * mpmath.fsum(fr(table.mu_(k)) / a1 * q(k) for k in range(1, table.N + 1)), e))
            for j in range(1, table.N + 1):
                aj = fr(table.alpha_(j))
                s = mpmath.fsum(fr(table.mu_(k)) / aj * q(k) for k in range(j, table.N + 1))
                vals.append(mpmath.power(2, -j) * mpmath.power(2 * s, e))
        return max(vals)


@dataclass(frozen=True)
class DoublingReport:
    r: float
    ar_estimate: float
    constant: float
    worst_ratio: Fraction
    worst_probe: Optional[Interval]
    probes: int

    @property
    def passed(self) -> bool:
        return float(self.worst_ratio) <= self.constant


def doubling_check(w, r: float, probes: Sequence, ar: Optional[float] = None, search: SearchConfig = SearchConfig()) -> DoublingReport:
    """Check ``int_{2Q} w <= 2^r [w]_{A_r} int_Q w`` on every probe, exactly."""
    P = as_placed(w, search.window)
    if ar is None:
        ar = float(ar_characteristic(w, r, search).sup_estimate)
    weights = P.weights()
    worst = Fraction(0)
    worst_q = None
    for Q in probes:
        Q = Q if isinstance(Q, Interval) else Interval(*Q)
        Q2 = Q.dilate(2)
        ratio = P.integral(Q2.a, Q2.b, weights) / P.integral(Q.a, Q.b, weights)
        if ratio > worst:
            worst, worst_q = ratio, Q
    return DoublingReport(float(r), float(ar), 2.0 ** float(r) * float(ar), worst, worst_q, len(probes))
