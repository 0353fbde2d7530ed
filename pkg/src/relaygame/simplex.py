"""Self-contained two-phase simplex over exact rationals.

Solves  minimize c.x  subject to  A x >= b, x >= 0  with Fraction
arithmetic and Bland's anti-cycling rule. Intended for the small
constraint polytopes used by the bounds module (tens of variables), where
exactness matters more than speed.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import LPError

__all__ = ["SimplexSolution", "solve_min"]


@dataclass(frozen=True)
class SimplexSolution:
    x: tuple[Fraction, ...]
    value: Fraction


def _pivot(tableau: list[list[Fraction]], basis: list[int], row: int, col: int) -> None:
    piv = tableau[row][col]
    tableau[row] = [v / piv for v in tableau[row]]
    for r, line in enumerate(tableau):
        if r != row and line[col]:
            factor = line[col]
            tableau[r] = [v - factor * p for v, p in zip(line, tableau[row])]
    basis[row] = col


def _optimize(
    tableau: list[list[Fraction]],
    basis: list[int],
    costs: list[Fraction],
    allowed: set[int],
) -> Fraction:
    """Run simplex iterations for the given cost vector; returns the optimum.

    The reduced-cost row is rebuilt from `costs` and the current basis.
    Bland's rule: entering = lowest-index negative reduced cost, leaving =
    lowest basis index among minimal ratios.
    """
    ncols = len(tableau[0])
    while True:
        reduced = list(costs) + [Fraction(0)]
        for r, bc in enumerate(basis):
            cb = costs[bc]
            if cb:
                reduced = [v - cb * t for v, t in zip(reduced, tableau[r])]
        entering = -1
        for j in range(ncols - 1):
            if j in allowed and reduced[j] < 0:
                entering = j
                break
        if entering < 0:
            value = Fraction(0)
            for r, bc in enumerate(basis):
                value += costs[bc] * tableau[r][-1]
            return value
        leaving = -1
        best: Fraction | None = None
        for r, line in enumerate(tableau):
            if line[entering] > 0:
                ratio = line[-1] / line[entering]
                if best is None or ratio < best or (
                    ratio == best and basis[r] < basis[leaving]
                ):
                    best = ratio
                    leaving = r
        if leaving < 0:
            raise LPError("objective is unbounded below")
        _pivot(tableau, basis, leaving, entering)


def solve_min(
    c: Sequence[Fraction], A: Sequence[Sequence[Fraction]], b: Sequence[Fraction]
) -> SimplexSolution:
    """Minimize c.x subject to A x >= b and x >= 0, exactly."""
    m, n = len(A), len(c)
    if any(len(row) != n for row in A) or len(b) != m:
        raise LPError("inconsistent LP dimensions")
    # Equality form: A x - s = b, with rows negated to make the RHS >= 0,
    # then one artificial per row for a trivial starting basis.
    ncols = n + m + m + 1
    tableau: list[list[Fraction]] = []
    for i in range(m):
        row = [Fraction(v) for v in A[i]] + [Fraction(0)] * (2 * m) + [Fraction(b[i])]
        row[n + i] = Fraction(-1)
        if row[-1] < 0:
            row = [-v for v in row]
        row[n + m + i] = Fraction(1)
        tableau.append(row)
    basis = [n + m + i for i in range(m)]

    art_costs = [Fraction(0)] * (n + m) + [Fraction(1)] * m
    allowed = set(range(n + 2 * m))
    feas = _optimize(tableau, basis, art_costs, allowed)
    if feas != 0:
        raise LPError("constraints are infeasible")
    # Pivot artificials out of the basis; rows with no real pivot are
    # redundant and dropped.
    drop: list[int] = []
    for r in range(m):
        if basis[r] >= n + m:
            col = next(
                (j for j in range(n + m) if tableau[r][j] != 0),
                None,
            )
            if col is None:
                drop.append(r)
            else:
                _pivot(tableau, basis, r, col)
    for r in sorted(drop, reverse=True):
        del tableau[r]
        del basis[r]

    real_costs = [Fraction(v) for v in c] + [Fraction(0)] * (2 * m)
    allowed = set(range(n + m))
    value = _optimize(tableau, basis, real_costs, allowed)
    x = [Fraction(0)] * n
    for r, bc in enumerate(basis):
        if bc < n:
            x[bc] = tableau[r][-1]
    return SimplexSolution(x=tuple(x), value=value)
