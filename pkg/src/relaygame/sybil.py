"""Sybil deviations: profitability of inserting fake identities.

The only manipulation the custody chain admits is inserting identities
(predecessors cannot be removed), so deviations are extra clones, either
before authorizing or on a child edge.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product

from .errors import InvalidParameterError
from .game import Profile, Strategy, compute_levels, exact_expected_rewards
from .schemes import RewardTable, SchemeAssignment
from .topology import Forest

__all__ = ["SybilDeviation", "sybil_gain", "best_sybil_response"]


@dataclass(frozen=True)
class SybilDeviation:
    """Clones added on top of a node's current strategy at its level."""

    node: int
    pre_auth_added: int
    child_clones_added: tuple[int, ...]

    @property
    def total_added(self) -> int:
        return self.pre_auth_added + sum(self.child_clones_added)


def sybil_gain(
    table: RewardTable, chain_position: int, chain_length: int, clones_added: int
) -> Fraction:
    """Reward change for the identity at chain_position (from the authorizer)
    on a chain of length chain_length when it splices clones_added fake
    identities into its own slot, stretching the chain accordingly.

    Positive means the insertion is a profitable attack.
    """
    if chain_position < 1 or chain_length < chain_position:
        raise InvalidParameterError(
            f"position {chain_position} not on a chain of length {chain_length}"
        )
    if clones_added < 1:
        raise InvalidParameterError(f"clones_added={clones_added} must be >= 1")
    before = table.reward(chain_position, chain_length)
    stretched = chain_length + clones_added
    after = sum(
        (
            table.reward(j, stretched)
            for j in range(chain_position, chain_position + clones_added + 1)
        ),
        Fraction(0),
    )
    return after - before


def best_sybil_response(
    forest: Forest,
    node: int,
    profile: Profile,
    assignment: SchemeAssignment,
    max_clones: int,
    external_attempters: int = 0,
) -> tuple[SybilDeviation | None, Fraction]:
    """Exhaustively search clone insertions for `node` (everyone else fixed)
    and return the most profitable deviation with its exact expected-utility
    gain, or (None, 0) when honesty is optimal. Ties favor fewer clones.
    """
    if max_clones < 0:
        raise InvalidParameterError(f"max_clones={max_clones} must be >= 0")
    levels = compute_levels(forest, profile, assignment)
    level = levels[node]
    if level < 1:
        return None, Fraction(0)  # past the horizon: nothing to gain or lose
    current = profile.get(node, Strategy())
    kids = forest.children[node]
    base_counts = current.clones_at(level, len(kids))
    base_pre = current.pre_auth_at(level)

    base = exact_expected_rewards(
        forest, profile, assignment, external_attempters=external_attempters
    )[node]

    best_gain = Fraction(0)
    best_dev: SybilDeviation | None = None
    c_headroom = [level - 1 - c for c in base_counts]
    p_headroom = level - 1 - base_pre
    for added_p in range(0, min(max_clones, p_headroom) + 1):
        budget = max_clones - added_p
        for added_c in product(*(range(min(budget, h) + 1) for h in c_headroom)):
            if added_p + sum(added_c) == 0 or sum(added_c) > budget:
                continue
            clones = {
                lvl: counts for lvl, counts in current.clone_choices if lvl != level
            }
            clones[level] = tuple(c + a for c, a in zip(base_counts, added_c))
            pre = {lvl: p for lvl, p in current.pre_auth_choices if lvl != level}
            if base_pre + added_p:
                pre[level] = base_pre + added_p
            deviated = Strategy.make(clones=clones, pre_auth=pre)
            trial = dict(profile)
            trial[node] = deviated
            value = exact_expected_rewards(
                forest, trial, assignment, external_attempters=external_attempters
            )[node]
            gain = value - base
            if gain > best_gain:
                best_gain = gain
                best_dev = SybilDeviation(
                    node=node, pre_auth_added=added_p, child_clones_added=added_c
                )
    return best_dev, best_gain
