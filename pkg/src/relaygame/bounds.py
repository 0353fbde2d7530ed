"""Necessary conditions and payment lower bounds for schemes in which full
propagation without duplication is supposed to be a dominant strategy.

The constraint checker tests a reward table against the inequalities any
such scheme must satisfy; the closed-form evaluators give floor values
implied by them; and the minimization oracle independently minimizes over
the constraint polytope with an exact simplex, so the closed forms can be
validated against it.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb, factorial

from .errors import InvalidParameterError, SizeLimitError
from .schemes import RewardTable
from .simplex import solve_min

__all__ = [
    "ConstraintViolation",
    "ConstraintReport",
    "BoundValue",
    "BinomialCheck",
    "OracleResult",
    "check_scheme_constraints",
    "binomial_lower_bound",
    "position_reward_floor",
    "dominant_scheme_payment_bound",
    "min_payment_oracle",
    "e_enclosure",
]

ORACLE_MAX_HEIGHT = 6


@dataclass(frozen=True)
class ConstraintViolation:
    constraint: str  # "pascal" | "dist" | "tail_sum" | "ir"
    indices: tuple[int, ...]
    lhs: Fraction
    rhs: Fraction


@dataclass(frozen=True)
class ConstraintReport:
    violations: tuple[ConstraintViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok

    def by_constraint(self, name: str) -> list[ConstraintViolation]:
        return [v for v in self.violations if v.constraint == name]


@dataclass(frozen=True)
class BoundValue:
    """A bound enclosed in an exact rational interval; lower == upper when
    the value itself is rational."""

    lower: Fraction
    upper: Fraction
    rational_term: Fraction | None = None
    params: tuple[tuple[str, int], ...] = ()

    @property
    def exact(self) -> Fraction | None:
        return self.lower if self.lower == self.upper else None

    @property
    def midpoint(self) -> Fraction:
        return (self.lower + self.upper) / 2

    def __float__(self) -> float:
        return float(self.midpoint)


def check_scheme_constraints(
    table: RewardTable, t: int, height_s: int, dist_w: int | None = None
) -> ConstraintReport:
    """Check every index of the dominant-strategy necessary conditions.

    pascal:    r(i,h) >= r(i,h+1) + r(i+1,h+1)            (1 <= i <= h < Hs)
    dist:      r(1,h)/w <= r(1+j,h+j)                     (w = t by default)
    tail_sum:  r(Hs-h+1,Hs) >= sum_j r(j,h+j) / (t-1)     (1 <= h <= Hs)
               r(1,h) >= 1 + sum_j r(j,h+j) / (t-1)
    ir:        r(1,h) >= 1

    All comparisons exact.
    """
    if t < 2:
        raise InvalidParameterError(f"seed count t={t} must be >= 2")
    if not (1 <= height_s <= table.height):
        raise InvalidParameterError(
            f"height_s={height_s} must be in 1..{table.height}"
        )
    w = t if dist_w is None else dist_w
    if w < 1:
        raise InvalidParameterError(f"dist weight w={w} must be >= 1")
    violations: list[ConstraintViolation] = []
    r = table.reward
    for h in range(1, height_s):
        for i in range(1, h + 1):
            lhs, rhs = r(i, h), r(i, h + 1) + r(i + 1, h + 1)
            if lhs < rhs:
                violations.append(ConstraintViolation("pascal", (i, h), lhs, rhs))
    for h in range(1, height_s):
        for j in range(1, height_s - h + 1):
            lhs, rhs = Fraction(r(1, h), w), r(1 + j, h + j)
            if lhs > rhs:
                violations.append(ConstraintViolation("dist", (h, j), lhs, rhs))
    for h in range(1, height_s + 1):
        tail = sum(
            (r(j, h + j) for j in range(1, height_s - h + 1)), Fraction(0)
        ) / (t - 1)
        lhs = r(height_s - h + 1, height_s)
        if lhs < tail:
            violations.append(ConstraintViolation("tail_sum", (h, 1), lhs, tail))
        lhs = r(1, h)
        if lhs < 1 + tail:
            violations.append(ConstraintViolation("tail_sum", (h, 2), lhs, 1 + tail))
    for h in range(1, height_s + 1):
        lhs = r(1, h)
        if lhs < 1:
            violations.append(ConstraintViolation("ir", (h,), lhs, Fraction(1)))
    return ConstraintReport(tuple(violations))


@dataclass(frozen=True)
class BinomialCheck:
    holds: bool
    lhs: Fraction
    rhs: Fraction

    def __bool__(self) -> bool:
        return self.holds


def binomial_lower_bound(table: RewardTable, height_s: int) -> BinomialCheck:
    """Check r(1,1) >= sum_i C(Hs-1, i) * r(i+1, Hs): expanding the single
    short-chain reward through the recursive splitting inequality puts
    binomial weights on the longest chain's positions."""
    if not (1 <= height_s <= table.height):
        raise InvalidParameterError(
            f"height_s={height_s} must be in 1..{table.height}"
        )
    lhs = table.reward(1, 1)
    rhs = sum(
        (
            comb(height_s - 1, i) * table.reward(i + 1, height_s)
            for i in range(height_s)
        ),
        Fraction(0),
    )
    return BinomialCheck(holds=lhs >= rhs, lhs=lhs, rhs=rhs)


def position_reward_floor(m: int, t: int) -> BoundValue:
    """Exact floor (1/2) * (1/(t-1) + (m-1)!/(t-1)^(m-1)) on the reward of
    the m-th chain position at full depth, implied by the constraints."""
    if m < 1:
        raise InvalidParameterError(f"position m={m} must be >= 1")
    if t < 2:
        raise InvalidParameterError(f"seed count t={t} must be >= 2")
    value = Fraction(1, 2) * (
        Fraction(1, t - 1) + Fraction(factorial(m - 1), (t - 1) ** (m - 1))
    )
    return BoundValue(lower=value, upper=value, params=(("m", m), ("t", t)))


@lru_cache(maxsize=None)
def e_enclosure(terms: int = 56) -> tuple[Fraction, Fraction]:
    """Rational enclosure of e from the factorial series; 56 terms give
    more than 64 decimal digits (tail < 2/(terms+1)!)."""
    partial = sum((Fraction(1, factorial(k)) for k in range(terms + 1)), Fraction(0))
    return partial, partial + Fraction(2, factorial(terms + 1))


def dominant_scheme_payment_bound(t: int, H: int) -> BoundValue:
    """Floor on the expected payment of any dominant-strategy scheme that
    reaches at least half the network:

        (1/10) * ( 2^(H-4)/t^2 + (1/t) * ((H-3)/(t*e))^(H-3) )

    The first summand is exact; the transcendental one is enclosed in a
    rational interval via a 64-digit enclosure of e.
    """
    if t < 2:
        raise InvalidParameterError(f"seed count t={t} must be >= 2")
    if H < 4:
        raise InvalidParameterError(f"height H={H} must be >= 4")
    rational = Fraction(2 ** (H - 4), 10 * t * t)
    e_lo, e_hi = e_enclosure()
    exponent = H - 3
    # decreasing in e, so the upper end uses e_lo
    term_lo = Fraction(1, 10 * t) * (Fraction(H - 3) / (t * e_hi)) ** exponent
    term_hi = Fraction(1, 10 * t) * (Fraction(H - 3) / (t * e_lo)) ** exponent
    return BoundValue(
        lower=rational + term_lo,
        upper=rational + term_hi,
        rational_term=rational,
        params=(("t", t), ("H", H)),
    )


@dataclass(frozen=True)
class OracleResult:
    objective: str
    value: BoundValue
    table: RewardTable
    params: tuple[tuple[str, int], ...]


def _oracle_variables(height_s: int) -> list[tuple[int, int]]:
    return [(i, h) for h in range(1, height_s + 1) for i in range(1, h + 1)]


def min_payment_oracle(
    height_s: int, t: int, objective: str = "root_reward", d: int = 3
) -> OracleResult:
    """Exactly minimize over the polytope {pascal, dist(w=t), ir, r >= 0}.

    objective "root_reward" minimizes the seed's payment on a full-depth
    chain, r(Hs, Hs); "expected_payment" minimizes the expected total
    payment when the authorizer is uniform over one full tree of branching
    d (chain length h has weight d^(h-1)).

    Independent of the closed-form evaluators: the polytope minimum is a
    certificate that the floors are valid.
    """
    if height_s < 1:
        raise InvalidParameterError(f"height_s={height_s} must be >= 1")
    if height_s > ORACLE_MAX_HEIGHT:
        raise SizeLimitError(
            f"height_s={height_s} exceeds oracle limit {ORACLE_MAX_HEIGHT}"
        )
    if t < 2:
        raise InvalidParameterError(f"seed count t={t} must be >= 2")
    if objective not in ("root_reward", "expected_payment"):
        raise InvalidParameterError(f"unknown objective {objective!r}")
    variables = _oracle_variables(height_s)
    index = {v: j for j, v in enumerate(variables)}
    n = len(variables)
    A: list[list[Fraction]] = []
    b: list[Fraction] = []

    def constraint(coeffs: dict[tuple[int, int], Fraction], rhs: Fraction) -> None:
        row = [Fraction(0)] * n
        for key, value in coeffs.items():
            row[index[key]] += value
        A.append(row)
        b.append(rhs)

    for h in range(1, height_s):
        for i in range(1, h + 1):
            constraint(
                {(i, h): Fraction(1), (i, h + 1): Fraction(-1), (i + 1, h + 1): Fraction(-1)},
                Fraction(0),
            )
    for h in range(1, height_s):
        for j in range(1, height_s - h + 1):
            constraint(
                {(1 + j, h + j): Fraction(1), (1, h): Fraction(-1, t)}, Fraction(0)
            )
    for h in range(1, height_s + 1):
        constraint({(1, h): Fraction(1)}, Fraction(1))

    c = [Fraction(0)] * n
    if objective == "root_reward":
        c[index[(height_s, height_s)]] = Fraction(1)
    else:
        if d < 2:
            raise InvalidParameterError(f"branching d={d} must be >= 2")
        total = sum(d ** (h - 1) for h in range(1, height_s + 1))
        for h in range(1, height_s + 1):
            weight = Fraction(d ** (h - 1), total)
            for i in range(1, h + 1):
                c[index[(i, h)]] += weight

    solution = solve_min(c, A, b)
    entries = {v: solution.x[index[v]] for v in variables}
    table = RewardTable(height=height_s, entries=entries)
    value = BoundValue(
        lower=solution.value,
        upper=solution.value,
        params=(("height_s", height_s), ("t", t)),
    )
    return OracleResult(
        objective=objective,
        value=value,
        table=table,
        params=(("height_s", height_s), ("t", t), ("d", d)),
    )
