"""Exact rational sequence tables driving the sawtooth construction.

For a depth ``N`` the table holds

* ``mu[k]   = 1 / (2 k 2^k)``                 measure of the level-k good set
* ``beta    = 1 - sum_{k<=N} mu[k]``          measure of the bad set
* ``b       = (sum 1/k) / (2 - sum 1/(k 2^k))`` slope on the bad set
* ``alpha[j] = sum_{k=j}^N mu[k]``             measure of the level-j refinement region
* ``h[j]    = -(sum_{k=j}^N 1/(2k)) / alpha[j]`` slope on that region

Every entry is a :class:`fractions.Fraction`; lists are 1-indexed through
the accessor methods (``t.mu_(k)``) and 0-indexed as stored tuples.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "SequenceTable",
    "IdentityCheck",
    "IdentityReport",
    "build_table",
    "verify_identities",
    "harmonic",
    "frac_to_json",
    "frac_from_json",
]


def harmonic(n: int) -> Fraction:
    return sum((Fraction(1, k) for k in range(1, n + 1)), Fraction(0))


def frac_to_json(x: Fraction) -> list[int]:
    return [x.numerator, x.denominator]


def frac_from_json(pair) -> Fraction:
    num, den = pair
    return Fraction(int(num), int(den))


@dataclass(frozen=True)
class SequenceTable:
    N: int
    b: Fraction
    mu: tuple[Fraction, ...]
    beta: Fraction
    alpha: tuple[Fraction, ...]
    h: tuple[Fraction, ...]
    g_slope: tuple[Fraction, ...]
    w_level: tuple[Fraction, ...]

    def mu_(self, k: int) -> Fraction:
        return self.mu[k - 1]

    def alpha_(self, j: int) -> Fraction:
        return self.alpha[j - 1]

    def h_(self, j: int) -> Fraction:
        return self.h[j - 1]

    def to_json(self) -> dict:
        return {
            "N": self.N,
            "b": frac_to_json(self.b),
            "beta": frac_to_json(self.beta),
            "mu": [frac_to_json(x) for x in self.mu],
            "alpha": [frac_to_json(x) for x in self.alpha],
            "h": [frac_to_json(x) for x in self.h],
            "g_slope": [frac_to_json(x) for x in self.g_slope],
            "w_level": [frac_to_json(x) for x in self.w_level],
        }

    @classmethod
    def from_json(cls, data: dict) -> "SequenceTable":
        seq = lambda key: tuple(frac_from_json(p) for p in data[key])
        return cls(
            N=int(data["N"]),
            b=frac_from_json(data["b"]),
            mu=seq("mu"),
            beta=frac_from_json(data["beta"]),
            alpha=seq("alpha"),
            h=seq("h"),
            g_slope=seq("g_slope"),
            w_level=seq("w_level"),
        )


def _b(n: int) -> Fraction:
    tail = sum((Fraction(1, k * 2**k) for k in range(1, n + 1)), Fraction(0))
    return harmonic(n) / (2 - tail)


def _beta(n: int) -> Fraction:
    return 1 - sum((Fraction(1, 2 * k * 2**k) for k in range(1, n + 1)), Fraction(0))


def build_table(N: int) -> SequenceTable:
    """Exact sequence table for depth ``N >= 1``."""
    if isinstance(N, bool) or not isinstance(N, int) or N < 1:
        raise ValueError(f"depth N must be a positive integer, got {N!r}")
    mu = [Fraction(1, 2 * k * 2**k) for k in range(1, N + 1)]
    alpha = [Fraction(0)] * N
    half_harm = [Fraction(0)] * N
    acc_a = Fraction(0)
    acc_h = Fraction(0)
    for j in range(N, 0, -1):
        acc_a += mu[j - 1]
        acc_h += Fraction(1, 2 * j)
        alpha[j - 1] = acc_a
        half_harm[j - 1] = acc_h
    h = [-half_harm[j] / alpha[j] for j in range(N)]
    return SequenceTable(
        N=N,
        b=_b(N),
        mu=tuple(mu),
        beta=_beta(N),
        alpha=tuple(alpha),
        h=tuple(h),
        g_slope=tuple(Fraction(-(2**k)) for k in range(1, N + 1)),
        w_level=tuple(Fraction(1, 2**k) for k in range(1, N + 1)),
    )


@dataclass(frozen=True)
class IdentityCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class IdentityReport:
    N: int
    checks: tuple[IdentityCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[IdentityCheck]:
        return [c for c in self.checks if not c.passed]


def verify_identities(t: SequenceTable) -> IdentityReport:
    """Check the basic exact identities of the table; failures are reported."""
    checks: list[IdentityCheck] = []

    def add(name: str, lhs: Fraction, rhs: Fraction) -> None:
        checks.append(IdentityCheck(name, lhs == rhs, f"{lhs} vs {rhs}"))

    N = t.N
    # (1) sum_{k<=n} mu_k (-2^k) + beta_n b_n = 0 for every n <= N
    partial = Fraction(0)
    for n in range(1, N + 1):
        partial += t.mu_(n) * t.g_slope[n - 1]
        if n == N:
            beta_n, b_n = t.beta, t.b
        else:
            beta_n, b_n = _beta(n), _b(n)
        add(f"balance[n={n}]", partial + beta_n * b_n, Fraction(0))

    # (2) alpha_1 + beta_N = 1 and alpha_1 h^1 + beta_N b_N = 0
    add("mass", t.alpha_(1) + t.beta, Fraction(1))
    add("barycenter", t.alpha_(1) * t.h_(1) + t.beta * t.b, Fraction(0))

    # (3) split fractions and slope recursion for k = 1..N-1
    for k in range(1, N):
        a_k, a_next = t.alpha_(k), t.alpha_(k + 1)
        add(f"fractions[k={k}]", a_next / a_k + t.mu_(k) / a_k, Fraction(1))
        add(
            f"slope_recursion[k={k}]",
            (a_next * t.h_(k + 1) + t.mu_(k) * t.g_slope[k - 1]) / a_k,
            t.h_(k),
        )

    add("last_slope", t.h_(N), Fraction(-(2**N)))
    for j in range(1, N + 1):
        bound = Fraction(1, j * 2 ** (j + 1))
        checks.append(IdentityCheck(f"alpha_lower[j={j}]", t.alpha_(j) >= bound, f"{t.alpha_(j)} >= {bound}"))
    for k in range(1, N + 1):
        add(f"mu[k={k}]", t.mu_(k), Fraction(1, 2 * k * 2**k))
    return IdentityReport(N=N, checks=tuple(checks))


def tampered(t: SequenceTable, **changes: Fraction) -> SequenceTable:
    """Copy of ``t`` with scalar fields replaced; for negative testing."""
    from dataclasses import replace

    return replace(t, **changes)
