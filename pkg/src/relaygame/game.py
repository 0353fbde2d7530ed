"""The propagation game: strategies with cloning, awareness, levels,
winning-chain reward allocation, exact expected utilities, and seeded
Monte Carlo authorization.

A node's level is the reward budget left below it: a seed starts at its
table height, and each edge costs 1 plus the clones the parent inserted
on that edge. Level 0 means the node is past the reward horizon; it may
still be aware of the transaction but has nothing to gain, so it neither
attempts nor forwards.
"""
from __future__ import annotations

import json
import random
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .errors import (
    InvalidLevelError,
    InvalidParameterError,
    MalformedChainError,
    NoAttemptersError,
)
from .schemes import (
    RewardTable,
    SchemeAssignment,
    almost_uniform_parameters,
    total_payment,
)
from .topology import Forest

__all__ = [
    "Strategy",
    "ExternalEnvironment",
    "WinningChain",
    "full_propagation_profile",
    "compute_levels",
    "aware_set",
    "attempt_set",
    "build_winning_chain",
    "allocate_rewards",
    "attempting_count",
    "expected_utility",
    "exact_expected_rewards",
    "simulate_authorization",
    "SimulationResult",
    "profile_to_json",
    "profile_from_json",
]

Profile = Mapping[int, "Strategy"]


@dataclass(frozen=True)
class Strategy:
    """Per-level behavior of one node.

    For a level l in 1..height the node may insert clones on each child
    edge (0 <= c_i <= l-1) and clones before authorizing (0 <= p <= l-1).
    Levels not listed default to zero everywhere, so Strategy() is the
    honest full-propagation, no-duplication strategy.
    """

    clone_choices: tuple[tuple[int, tuple[int, ...]], ...] = ()
    pre_auth_choices: tuple[tuple[int, int], ...] = ()

    @classmethod
    def make(
        cls,
        clones: Mapping[int, Iterable[int]] | None = None,
        pre_auth: Mapping[int, int] | None = None,
    ) -> "Strategy":
        clone_items = []
        for level, counts in sorted((clones or {}).items()):
            counts = tuple(int(c) for c in counts)
            if level < 1:
                raise InvalidParameterError(f"strategy level {level} must be >= 1")
            if any(c < 0 or c > level - 1 for c in counts):
                raise InvalidParameterError(
                    f"clone counts {counts} out of range 0..{level - 1} at level {level}"
                )
            clone_items.append((level, counts))
        pre_items = []
        for level, p in sorted((pre_auth or {}).items()):
            if level < 1:
                raise InvalidParameterError(f"strategy level {level} must be >= 1")
            if p < 0 or p > level - 1:
                raise InvalidParameterError(
                    f"pre-auth clones {p} out of range 0..{level - 1} at level {level}"
                )
            pre_items.append((level, int(p)))
        return cls(tuple(clone_items), tuple(pre_items))

    def clones_at(self, level: int, n_children: int) -> tuple[int, ...]:
        for lvl, counts in self.clone_choices:
            if lvl == level:
                if len(counts) != n_children:
                    raise InvalidParameterError(
                        f"strategy lists {len(counts)} clone counts at level {level}, "
                        f"node has {n_children} children"
                    )
                return counts
        return (0,) * n_children

    def pre_auth_at(self, level: int) -> int:
        for lvl, p in self.pre_auth_choices:
            if lvl == level:
                return p
        return 0


HONEST = Strategy()


def full_propagation_profile(forest: Forest) -> dict[int, Strategy]:
    """Everyone forwards everything and never duplicates."""
    return {v: HONEST for v in range(forest.node_count)}


def _strategy_for(profile: Profile, node: int) -> Strategy:
    return profile.get(node, HONEST)


@dataclass(frozen=True)
class ExternalEnvironment:
    """Aware attempters outside a focal subtree, the focal node included."""

    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InvalidParameterError(f"environment k={self.k} must be >= 1")


def compute_levels(
    forest: Forest, profile: Profile, assignment: SchemeAssignment
) -> list[int]:
    """Seed level is its table height; a child of u reached as i-th child
    sits at l(u) - 1 - c_i, and level 0 propagates to all descendants."""
    levels = [0] * forest.node_count
    for seed_index, seed in enumerate(forest.seeds):
        levels[seed] = assignment.table_for(seed_index).height
        queue = [seed]
        while queue:
            nxt: list[int] = []
            for u in queue:
                kids = forest.children[u]
                if not kids:
                    continue
                lu = levels[u]
                if lu == 0:
                    continue  # levels list already zero below
                counts = _strategy_for(profile, u).clones_at(lu, len(kids))
                for c, child in zip(counts, kids):
                    levels[child] = lu - 1 - c
                nxt.extend(kids)
            queue = nxt
    return levels


def aware_set(
    forest: Forest, profile: Profile, assignment: SchemeAssignment
) -> set[int]:
    """Nodes that receive the transaction: seeds, plus children of aware
    nodes that still have budget to forward (level >= 1)."""
    levels = compute_levels(forest, profile, assignment)
    aware: set[int] = set()
    for seed in forest.seeds:
        stack = [seed]
        while stack:
            v = stack.pop()
            aware.add(v)
            if levels[v] >= 1:
                stack.extend(forest.children[v])
    return aware


def attempt_set(
    forest: Forest, profile: Profile, assignment: SchemeAssignment
) -> set[int]:
    """Nodes that try to authorize: aware with a promised authorizer reward
    of at least 1, i.e. level >= 1."""
    levels = compute_levels(forest, profile, assignment)
    return {v for v in range(forest.node_count) if levels[v] >= 1}


@dataclass(frozen=True)
class WinningChain:
    """Identity sequence of a successful authorization, authorizer first,
    seed last. Clones show up as repeated node ids in contiguous runs."""

    seed: int
    identities: tuple[int, ...]

    @property
    def length(self) -> int:
        return len(self.identities)


def build_winning_chain(
    forest: Forest,
    profile: Profile,
    assignment: SchemeAssignment,
    winner: int,
    levels: list[int] | None = None,
) -> WinningChain:
    """Reconstruct the identity chain for an authorization by `winner`:
    its own pre-authorization clones, then each ancestor repeated once per
    clone it inserted on the edge toward the winner."""
    if levels is None:
        levels = compute_levels(forest, profile, assignment)
    if levels[winner] < 1:
        raise InvalidLevelError(f"node {winner} is at level 0 and cannot authorize")
    p = _strategy_for(profile, winner).pre_auth_at(levels[winner])
    identities = [winner] * (p + 1)
    v = winner
    while forest.parents[v] >= 0:
        parent = forest.parents[v]
        kids = forest.children[parent]
        counts = _strategy_for(profile, parent).clones_at(levels[parent], len(kids))
        q = counts[forest.child_position(parent, v)]
        identities.extend([parent] * (q + 1))
        v = parent
    return WinningChain(seed=v, identities=tuple(identities))


def allocate_rewards(
    chain: WinningChain, table: RewardTable
) -> dict[int, Fraction]:
    """Pay position j (from the authorizer) r(j, h) and sum per real node.

    Chains longer than the table height pay a zero map. The identity list
    must consist of one contiguous run per node.
    """
    seen_done: set[int] = set()
    prev = None
    for node in chain.identities:
        if node != prev:
            if node in seen_done:
                raise MalformedChainError(
                    f"identities of node {node} are not contiguous"
                )
            if prev is not None:
                seen_done.add(prev)
            prev = node
    h = chain.length
    rewards: dict[int, Fraction] = {node: Fraction(0) for node in set(chain.identities)}
    if h > table.height:
        return rewards
    for j, node in enumerate(chain.identities, start=1):
        rewards[node] += table.reward(j, h)
    return rewards


def attempting_count(
    forest: Forest, node: int, entry_level: int, profile: Profile
) -> int:
    """Attempters in node's subtree when node itself enters at entry_level."""
    if entry_level <= 0:
        return 0
    count = 1
    kids = forest.children[node]
    if kids:
        counts = _strategy_for(profile, node).clones_at(entry_level, len(kids))
        for c, child in zip(counts, kids):
            count += attempting_count(forest, child, entry_level - 1 - c, profile)
    return count


def expected_utility(
    forest: Forest,
    focal: int,
    level: int,
    strategy: Strategy,
    subtree_profile: Profile,
    env: ExternalEnvironment,
    table: RewardTable,
) -> Fraction:
    """Exact expected reward of `focal` at `level` under an almost-uniform
    table, with env.k aware attempters outside its subtree (focal included).

    With y_i = level - 1 - c_i and A_i attempters through child i:

        (1 + beta*level + sum_i beta*(level - y_i)*A_i) / (k + sum_i A_i)

    The closed form relies on two facts specific to almost-uniform tables:
    the focal node nets 1 + beta*level when it wins (for any number of its
    own pre-authorization clones), and beta per identity when a descendant
    wins. General tables go through exact_expected_rewards instead.
    """
    if level < 1:
        raise InvalidLevelError(f"focal level {level} must be >= 1")
    params = almost_uniform_parameters(table)
    if params is None:
        raise InvalidParameterError(
            "closed-form utility needs an almost-uniform table; "
            "use exact_expected_rewards for general tables"
        )
    beta, _ = params
    kids = forest.children[focal]
    counts = strategy.clones_at(level, len(kids))
    if any(c < 0 or c > level - 1 for c in counts):
        raise InvalidParameterError(
            f"clone counts {counts} out of range 0..{level - 1} at level {level}"
        )
    numerator = 1 + beta * level
    pool = Fraction(env.k)
    for c, child in zip(counts, kids):
        a = attempting_count(forest, child, level - 1 - c, subtree_profile)
        numerator += beta * (c + 1) * a
        pool += a
    return numerator / pool


def exact_expected_rewards(
    forest: Forest,
    profile: Profile,
    assignment: SchemeAssignment,
    external_attempters: int = 0,
) -> dict[int, Fraction]:
    """Exact per-node expected reward for any table, by enumerating every
    possible winner; the draw is uniform over forest attempters plus any
    external attempters (whose wins pay nobody here)."""
    levels = compute_levels(forest, profile, assignment)
    attempts = [v for v in range(forest.node_count) if levels[v] >= 1]
    if not attempts:
        raise NoAttemptersError("no node attempts under this profile")
    pool = len(attempts) + external_attempters
    rewards: dict[int, Fraction] = {v: Fraction(0) for v in range(forest.node_count)}
    for winner in attempts:
        chain = build_winning_chain(forest, profile, assignment, winner, levels)
        table = assignment.table_for(forest.tree_index[winner])
        for node, amount in allocate_rewards(chain, table).items():
            rewards[node] += amount
    return {v: amount / pool for v, amount in rewards.items()}


@dataclass(frozen=True)
class SimulationResult:
    """Empirical statistics of seeded authorization trials."""

    trials: int
    attempters: tuple[int, ...]
    external_attempters: int
    win_counts: dict[int, int]
    mean_rewards: dict[int, float]
    total_payment_distribution: dict[Fraction, int]

    def win_frequency(self, node: int) -> float:
        return self.win_counts.get(node, 0) / self.trials


def simulate_authorization(
    forest: Forest,
    profile: Profile,
    assignment: SchemeAssignment,
    trials: int,
    rng_seed: int,
    external_attempters: int = 0,
) -> SimulationResult:
    """Draw the authorizer uniformly from the attempt pool `trials` times,
    rebuild the winning chain, allocate rewards, and aggregate.

    Deterministic for a fixed rng_seed. External attempters win with the
    same odds but pay nobody in the forest (their chains are elsewhere).
    """
    if trials < 1:
        raise InvalidParameterError(f"trials={trials} must be >= 1")
    levels = compute_levels(forest, profile, assignment)
    attempts = [v for v in range(forest.node_count) if levels[v] >= 1]
    if not attempts:
        raise NoAttemptersError("no node attempts under this profile")
    allocations: list[dict[int, Fraction]] = []
    totals: list[Fraction] = []
    for winner in attempts:
        chain = build_winning_chain(forest, profile, assignment, winner, levels)
        table = assignment.table_for(forest.tree_index[winner])
        alloc = allocate_rewards(chain, table)
        allocations.append(alloc)
        totals.append(sum(alloc.values(), Fraction(0)))
    pool = len(attempts) + external_attempters
    rng = random.Random(rng_seed)
    win_counts: Counter[int] = Counter()
    payment_dist: Counter[Fraction] = Counter()
    external_wins = 0
    for _ in range(trials):
        j = rng.randrange(pool)
        if j < len(attempts):
            win_counts[attempts[j]] += 1
            payment_dist[totals[j]] += 1
        else:
            external_wins += 1
            payment_dist[Fraction(0)] += 1
    reward_acc: dict[int, float] = {v: 0.0 for v in range(forest.node_count)}
    for idx, winner in enumerate(attempts):
        n_wins = win_counts.get(winner, 0)
        if not n_wins:
            continue
        for node, amount in allocations[idx].items():
            reward_acc[node] += n_wins * float(amount)
    mean_rewards = {v: acc / trials for v, acc in reward_acc.items()}
    return SimulationResult(
        trials=trials,
        attempters=tuple(attempts),
        external_attempters=external_attempters,
        win_counts=dict(win_counts),
        mean_rewards=mean_rewards,
        total_payment_distribution=dict(payment_dist),
    )


def profile_to_json(profile: Profile) -> str:
    """Serialize node -> {level: {"c": [...], "p": int}} (explicit levels only)."""
    doc: dict[str, dict[str, dict]] = {}
    for node in sorted(profile):
        strategy = profile[node]
        levels: dict[str, dict] = {}
        for level, counts in strategy.clone_choices:
            levels.setdefault(str(level), {})["c"] = list(counts)
        for level, p in strategy.pre_auth_choices:
            levels.setdefault(str(level), {})["p"] = p
        doc[str(node)] = levels
    return json.dumps(doc, sort_keys=True)


def profile_from_json(text: str) -> dict[int, Strategy]:
    doc = json.loads(text)
    profile: dict[int, Strategy] = {}
    for node, levels in doc.items():
        clones = {
            int(level): tuple(spec["c"]) for level, spec in levels.items() if "c" in spec
        }
        pre_auth = {
            int(level): int(spec["p"]) for level, spec in levels.items() if "p" in spec
        }
        profile[int(node)] = Strategy.make(clones=clones, pre_auth=pre_auth)
    return profile
