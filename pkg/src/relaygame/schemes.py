"""Reward tables and scheme constructors.

A reward table assigns an exact rational reward r(i, h) to the i-th
identity (counted from the authorizer) on a winning chain of length h,
for 1 <= i <= h <= height. Chains longer than the table height pay
nothing. All scheme algebra is done in exact rationals so that dominance
comparisons elsewhere are exact strict inequalities.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import InvalidParameterError

__all__ = [
    "RewardTable",
    "SchemeAssignment",
    "IRCheck",
    "make_almost_uniform",
    "make_geometric",
    "make_hybrid",
    "uniform_assignment",
    "total_payment",
    "check_individual_rationality",
    "almost_uniform_parameters",
    "hybrid_expected_payment",
    "exact_log",
    "table_to_json",
    "table_from_json",
]

Rational = Fraction | int

DEFAULT_GEOMETRIC_HORIZON = 32


@dataclass(frozen=True, eq=True)
class RewardTable:
    """Per-position chain rewards up to a height; zero beyond it."""

    height: int
    entries: Mapping[tuple[int, int], Fraction]

    def __post_init__(self) -> None:
        if self.height < 1:
            raise InvalidParameterError(f"table height {self.height} must be >= 1")
        for (i, h), value in self.entries.items():
            if not (1 <= i <= h <= self.height):
                raise InvalidParameterError(f"entry index ({i},{h}) out of range")
            if value < 0:
                raise InvalidParameterError(f"reward r({i},{h})={value} is negative")

    def reward(self, i: int, h: int) -> Fraction:
        """Reward of identity at position i on a chain of length h."""
        if h < 1 or i < 1 or i > h:
            raise InvalidParameterError(f"position ({i},{h}) is not on a chain")
        if h > self.height:
            return Fraction(0)
        return self.entries.get((i, h), Fraction(0))


@dataclass(frozen=True)
class SchemeAssignment:
    """Per-seed reward tables, with an optional two-group partition."""

    tables: tuple[RewardTable, ...]
    group_a: tuple[int, ...] = ()
    group_b: tuple[int, ...] = ()
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        if not self.tables:
            raise InvalidParameterError("assignment needs at least one seed table")

    @property
    def seed_count(self) -> int:
        return len(self.tables)

    def table_for(self, seed_index: int) -> RewardTable:
        return self.tables[seed_index]


def uniform_assignment(table: RewardTable, t: int) -> SchemeAssignment:
    """Every one of t seeds runs the same table."""
    if t < 1:
        raise InvalidParameterError(f"seed count t={t} must be >= 1")
    return SchemeAssignment(tables=(table,) * t)


def make_almost_uniform(beta: Rational, height: int) -> RewardTable:
    """Authorizer gets 1 + beta*(height - h + 1); everyone else on the chain
    gets beta; chains longer than height pay nothing.

    The authorizer bonus equals what the node would have collected by
    padding its own chain with height - h extra identities, which is what
    makes self-cloning before authorization pointless.
    """
    beta = Fraction(beta)
    if beta <= 0:
        raise InvalidParameterError(f"beta={beta} must be positive")
    if height < 1:
        raise InvalidParameterError(f"height {height} must be >= 1")
    entries: dict[tuple[int, int], Fraction] = {}
    for h in range(1, height + 1):
        entries[(1, h)] = 1 + beta * (height - h + 1)
        for i in range(2, h + 1):
            entries[(i, h)] = beta
    return RewardTable(height=height, entries=entries)


def make_geometric(
    base: Rational, ratio: Rational, height: int = DEFAULT_GEOMETRIC_HORIZON
) -> RewardTable:
    """Referral-ladder rewards: position i earns base * ratio^(i-1) on any
    chain long enough, independent of the chain length.

    The ladder is conceptually unbounded; `height` is the evaluation cutoff.
    """
    base = Fraction(base)
    ratio = Fraction(ratio)
    if base <= 0:
        raise InvalidParameterError(f"base={base} must be positive")
    if not (0 < ratio < 1):
        raise InvalidParameterError(f"ratio={ratio} must be in (0, 1)")
    entries: dict[tuple[int, int], Fraction] = {}
    for h in range(1, height + 1):
        for i in range(1, h + 1):
            entries[(i, h)] = base * ratio ** (i - 1)
    return RewardTable(height=height, entries=entries)


def exact_log(base: int, value: int) -> int | None:
    """Integer j with base^j == value, or None if value is not a power."""
    if base < 2 or value < 1:
        return None
    j = 0
    acc = 1
    while acc < value:
        acc *= base
        j += 1
    return j if acc == value else None


def make_hybrid(a: int, b: int, d: int, H: int) -> SchemeAssignment:
    """Two seed groups run side by side: group A (a seeds) pays (1/H, H),
    group B (b seeds) pays (1, 1 + log_d H). Logarithms are base d, and H
    must be an exact power of d; other heights are rejected, not rounded.

    Guarantees hold for a >= b >= 7; weaker inputs get a warning flag.
    """
    if a < 1 or b < 1:
        raise InvalidParameterError(f"group sizes a={a}, b={b} must be >= 1")
    log_h = exact_log(d, H)
    if log_h is None:
        raise InvalidParameterError(f"H={H} is not an integral power of d={d}")
    warnings: list[str] = []
    if not a >= b >= 7:
        warnings.append(
            f"group sizes a={a}, b={b} below the guaranteed regime a >= b >= 7"
        )
    table_a = make_almost_uniform(Fraction(1, H), H)
    table_b = make_almost_uniform(1, 1 + log_h)
    tables = (table_a,) * a + (table_b,) * b
    return SchemeAssignment(
        tables=tables,
        group_a=tuple(range(a)),
        group_b=tuple(range(a, a + b)),
        warnings=tuple(warnings),
    )


def total_payment(table: RewardTable, h: int) -> Fraction:
    """Sum of all position rewards on a chain of length h; 0 past the horizon."""
    if h < 1:
        raise InvalidParameterError(f"chain length h={h} must be >= 1")
    if h > table.height:
        return Fraction(0)
    return sum((table.reward(i, h) for i in range(1, h + 1)), Fraction(0))


@dataclass(frozen=True)
class IRCheck:
    """Result of an individual-rationality scan."""

    ok: bool
    first_violation: int | None = None

    def __bool__(self) -> bool:
        return self.ok


def check_individual_rationality(table: RewardTable, up_to: int) -> IRCheck:
    """True iff the authorizer reward r(1, h) >= 1 for every h <= up_to."""
    if not (1 <= up_to <= table.height):
        raise InvalidParameterError(f"up_to={up_to} must be in 1..{table.height}")
    for h in range(1, up_to + 1):
        if table.reward(1, h) < 1:
            return IRCheck(ok=False, first_violation=h)
    return IRCheck(ok=True)


def almost_uniform_parameters(table: RewardTable) -> tuple[Fraction, int] | None:
    """Recover (beta, height) if the table has the almost-uniform shape,
    else None. Verified structurally, entry by entry."""
    height = table.height
    if height >= 2:
        beta = table.reward(2, 2)
    else:
        beta = table.reward(1, 1) - 1
    if beta <= 0:
        return None
    for h in range(1, height + 1):
        if table.reward(1, h) != 1 + beta * (height - h + 1):
            return None
        for i in range(2, h + 1):
            if table.reward(i, h) != beta:
                return None
    return beta, height


def hybrid_expected_payment(assignment: SchemeAssignment, d: int, H: int) -> Fraction:
    """Expected total payment of a hybrid assignment under full propagation
    with the authorizer drawn uniformly among aware attempters.

    Group A trees are fully aware (N_A = (d^H - 1)/(d - 1) nodes, paying 2
    per chain); group B trees are aware down to their shorter horizon
    (N_B = (dH - 1)/(d - 1) nodes, paying 1 + log_d H + 1 per chain).
    """
    a = len(assignment.group_a)
    b = len(assignment.group_b)
    if a == 0 or b == 0:
        raise InvalidParameterError("assignment has no hybrid group partition")
    log_h = exact_log(d, H)
    if log_h is None:
        raise InvalidParameterError(f"H={H} is not an integral power of d={d}")
    n_a = Fraction(d**H - 1, d - 1)
    n_b = Fraction(d * H - 1, d - 1)
    num = a * n_a * 2 + b * n_b * (1 + log_h)
    den = a * n_a + b * n_b
    return Fraction(num, den)


def _fraction_to_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def _fraction_from_str(s: str) -> Fraction:
    num, _, den = s.partition("/")
    return Fraction(int(num), int(den) if den else 1)


def table_to_json(table: RewardTable) -> str:
    """Serialize to {"height": H, "entries": [[i, h, "num/den"], ...]}."""
    entries = [
        [i, h, _fraction_to_str(value)]
        for (i, h), value in sorted(table.entries.items(), key=lambda kv: (kv[0][1], kv[0][0]))
    ]
    return json.dumps({"height": table.height, "entries": entries})


def table_from_json(text: str) -> RewardTable:
    doc = json.loads(text)
    entries = {
        (int(i), int(h)): _fraction_from_str(value) for i, h, value in doc["entries"]
    }
    return RewardTable(height=int(doc["height"]), entries=entries)
