"""Iterated elimination of weakly dominated strategies.

The solved game is a strategic tree (its root plays the role of a seed at
the table height) plus a scalar environment k: the number of aware
attempters outside the focal subtree, focal node included. Utilities are
the exact closed form for almost-uniform tables, so every dominance
comparison is an exact rational inequality.

Per-level independence keeps the state small: a node's clone choice at
level l never affects payoffs at other levels, so surviving sets are kept
per (node, level) and a "strategy" in this module is one clone tuple.
Pre-authorization clones are payoff-inert under almost-uniform tables
(the authorizer bonus already equals what padding the chain would earn),
so they are fixed at zero here; the brute-force oracle can carry them
explicitly to demonstrate the indifference.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterable, Mapping, Sequence

from .errors import (
    DominationCheckFailedError,
    InvalidParameterError,
    PreconditionViolatedError,
)
from .game import Strategy, exact_expected_rewards
from .schemes import (
    RewardTable,
    almost_uniform_parameters,
    uniform_assignment,
)
from .topology import Forest, full_subtree_size

__all__ = [
    "EliminationGame",
    "EliminationState",
    "EliminationResult",
    "RemovalRecord",
    "dominates",
    "clone_cap_elimination",
    "iterate_elimination",
    "brute_force_elimination",
    "ClaimCheck",
    "check_fewer_clones_better",
    "fewer_clones_threshold",
    "trace_to_jsonl",
]

CloneTuple = tuple[int, ...]


@dataclass(frozen=True)
class EliminationGame:
    """One strategic tree, an almost-uniform table, and the environment k."""

    forest: Forest
    table: RewardTable
    k: int
    seeds: int | None = None
    extra_aware: int | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise InvalidParameterError(f"environment k={self.k} must be >= 1")
        if almost_uniform_parameters(self.table) is None:
            raise InvalidParameterError(
                "elimination utilities need an almost-uniform table"
            )

    @classmethod
    def from_hypotheses(
        cls, forest: Forest, table: RewardTable, seeds: int, extra_aware: int
    ) -> "EliminationGame":
        """Model `seeds` total seeds and `extra_aware` additional aware nodes:
        a node in the strategic tree sees seeds - 1 foreign seeds, the extra
        nodes, and itself, hence k = seeds + extra_aware."""
        if seeds < 1 or extra_aware < 0:
            raise InvalidParameterError("need seeds >= 1 and extra_aware >= 0")
        return cls(
            forest=forest,
            table=table,
            k=seeds + extra_aware,
            seeds=seeds,
            extra_aware=extra_aware,
        )

    @property
    def parameters(self) -> tuple[Fraction, int]:
        params = almost_uniform_parameters(self.table)
        assert params is not None
        return params

    def hypothesis_warnings(self) -> tuple[str, ...]:
        """Convergence-guarantee shortfalls; reported, never fatal."""
        beta, _ = self.parameters
        warnings = []
        if self.seeds is not None and self.seeds < 7:
            warnings.append(f"seed count {self.seeds} < 7 needed for guarantees")
        if self.extra_aware is not None:
            needed = math.ceil(2 / beta + 6)
            if self.extra_aware < needed:
                warnings.append(
                    f"extra aware nodes {self.extra_aware} < {needed} "
                    f"(= 2/beta + 6) needed for guarantees"
                )
        return tuple(warnings)

    def max_level(self, node: int) -> int:
        """Largest level node can realize: its depth alone costs one level
        per edge, so deeper nodes never see the top of the ladder. Levels
        past this bound are payoff-irrelevant strategy components."""
        _, height = self.parameters
        return height - (self.forest.depths[node] - 1)

    def initial_state(self) -> "EliminationState":
        surviving: dict[int, dict[int, set[CloneTuple]]] = {}
        for node in range(self.forest.node_count):
            arity = len(self.forest.children[node])
            surviving[node] = {
                level: set(product(range(level), repeat=arity))
                for level in range(1, self.max_level(node) + 1)
            }
        return EliminationState(surviving=surviving)


@dataclass
class EliminationState:
    """Surviving clone tuples per (node, level), plus the cap-schedule index.

    After cap step `cap_index`, every surviving tuple obeys
    c_i <= max(level - cap_index - 1, 0).
    """

    surviving: dict[int, dict[int, set[CloneTuple]]]
    cap_index: int = 0

    def cap_invariant_holds(self) -> bool:
        for levels in self.surviving.values():
            for level, tuples in levels.items():
                cap = max(level - self.cap_index - 1, 0)
                if any(any(c > cap for c in tup) for tup in tuples):
                    return False
        return True

    def is_full_propagation_only(self) -> bool:
        """Every surviving set is exactly the all-zero tuple."""
        for node, levels in self.surviving.items():
            for tuples in levels.values():
                if len(tuples) != 1:
                    return False
                (tup,) = tuples
                if any(tup):
                    return False
        return True

    def full_propagation_survives(self) -> bool:
        for levels in self.surviving.values():
            for level, tuples in levels.items():
                if tuple(0 for _ in next(iter(tuples))) not in tuples:
                    return False
        return True


@dataclass(frozen=True)
class RemovalRecord:
    node: int
    level: int
    strategy: CloneTuple
    witness: CloneTuple

    def to_json(self) -> str:
        return json.dumps(
            {
                "node": self.node,
                "level": self.level,
                "strategy": list(self.strategy),
                "witness": list(self.witness),
            }
        )


def trace_to_jsonl(trace: Sequence[RemovalRecord]) -> str:
    return "\n".join(record.to_json() for record in trace)


@dataclass(frozen=True)
class EliminationResult:
    state: EliminationState
    trace: tuple[RemovalRecord, ...]
    warnings: tuple[str, ...] = ()

    @property
    def converged(self) -> bool:
        return self.state.is_full_propagation_only()


def _pair_counts(
    forest: Forest,
    surviving: Mapping[int, Mapping[int, set[CloneTuple]]],
    node: int,
    l1: int,
    l2: int,
    memo: dict,
) -> frozenset[tuple[int, int]]:
    """Possible (scenario-1, scenario-2) attempter counts of node's subtree
    when node enters at levels l1 and l2 under the same strategy profile.

    Equal entry levels tie the node to one clone tuple in both scenarios;
    different levels touch independent strategy components, so the choices
    are free. This is exactly quantification over surviving descendant
    profiles, folded to what utilities depend on.
    """
    key = (node, l1, l2)
    hit = memo.get(key)
    if hit is not None:
        return hit
    base = (1 if l1 >= 1 else 0, 1 if l2 >= 1 else 0)
    kids = forest.children[node]
    if not kids or (l1 <= 0 and l2 <= 0):
        result = frozenset({base})
        memo[key] = result
        return result
    opts1 = sorted(surviving[node][l1]) if l1 >= 1 else [None]
    opts2 = sorted(surviving[node][l2]) if l2 >= 1 else [None]
    if l1 == l2:
        choices: Iterable = ((c, c) for c in opts1)
    else:
        choices = product(opts1, opts2)
    pairs: set[tuple[int, int]] = set()
    for c1, c2 in choices:
        acc: set[tuple[int, int]] = {base}
        for i, child in enumerate(kids):
            e1 = l1 - 1 - c1[i] if c1 is not None else 0
            e2 = l2 - 1 - c2[i] if c2 is not None else 0
            child_pairs = _pair_counts(forest, surviving, child, e1, e2, memo)
            acc = {(a + x, b + y) for a, b in acc for x, y in child_pairs}
        pairs |= acc
    result = frozenset(pairs)
    memo[key] = result
    return result


def _utility(
    beta: Fraction, level: int, counts: CloneTuple, subtree: Sequence[int], k: int
) -> Fraction:
    """Closed-form expected reward: own-win term plus per-identity shares
    on descendant wins, over the competition pool."""
    numerator = 1 + beta * level
    pool = Fraction(k)
    for c, a in zip(counts, subtree):
        numerator += beta * (c + 1) * a
        pool += a
    return numerator / pool


def dominates(
    candidate: CloneTuple,
    incumbent: CloneTuple,
    node: int,
    level: int,
    game: EliminationGame,
    state: EliminationState,
    memo: dict | None = None,
) -> bool:
    """True iff candidate weakly dominates incumbent for node at this level:
    at least as good against every surviving descendant profile, strictly
    better against at least one. Non-descendants enter only through game.k.
    """
    if candidate == incumbent:
        return False
    tuples = state.surviving[node].get(level)
    if tuples is None:
        raise InvalidParameterError(
            f"level {level} is not realizable for node {node}"
        )
    if candidate not in tuples or incumbent not in tuples:
        raise InvalidParameterError("both strategies must be in the surviving set")
    beta, _ = game.parameters
    kids = game.forest.children[node]
    memo = {} if memo is None else memo
    per_child = [
        sorted(
            _pair_counts(
                game.forest,
                state.surviving,
                child,
                level - 1 - candidate[i],
                level - 1 - incumbent[i],
                memo,
            )
        )
        for i, child in enumerate(kids)
    ]
    strict = False
    for combo in product(*per_child):
        a_cand = [pair[0] for pair in combo]
        a_inc = [pair[1] for pair in combo]
        u_cand = _utility(beta, level, candidate, a_cand, game.k)
        u_inc = _utility(beta, level, incumbent, a_inc, game.k)
        if u_cand < u_inc:
            return False
        if u_cand > u_inc:
            strict = True
    return strict


def _decrement_witness(victim: CloneTuple, target: int) -> CloneTuple:
    """Lower the last coordinate equal to target by one."""
    idx = max(i for i, c in enumerate(victim) if c == target)
    return victim[:idx] + (victim[idx] - 1,) + victim[idx + 1 :]


def clone_cap_elimination(
    game: EliminationGame,
) -> EliminationResult:
    """Scheduled elimination that lowers the clone cap one notch at a time.

    Cap step phi removes, for every node and level, all tuples with some
    coordinate equal to level - phi - 1, each removal verified against the
    surviving sets via `dominates` (its witness is the same tuple with that
    coordinate lowered by one). On success only full propagation survives.
    """
    game.forest.config.require_guarantee_branching()
    warnings = game.hypothesis_warnings()
    state = game.initial_state()
    _, height = game.parameters
    trace: list[RemovalRecord] = []
    order = sorted(
        v for v in range(game.forest.node_count) if game.forest.children[v]
    )
    for cap in range(height):
        for node in order:
            for level in sorted(state.surviving[node]):
                if level < cap + 2:
                    continue
                target = level - cap - 1
                victims = sorted(
                    (t for t in state.surviving[node][level] if max(t) == target),
                    key=lambda t: (-sum(t), t),
                )
                for victim in victims:
                    witness = _decrement_witness(victim, target)
                    if not dominates(witness, victim, node, level, game, state):
                        raise DominationCheckFailedError(
                            node, level, victim, witness, cap
                        )
                    state.surviving[node][level].discard(victim)
                    trace.append(RemovalRecord(node, level, victim, witness))
        state.cap_index = cap + 1
        assert state.cap_invariant_holds()
    return EliminationResult(state=state, trace=tuple(trace), warnings=warnings)


def _find_dominated(
    game: EliminationGame, state: EliminationState
) -> list[RemovalRecord]:
    """All currently removable strategies with their first witness."""
    found = []
    for node in range(game.forest.node_count):
        if not game.forest.children[node]:
            continue
        for level, tuples in sorted(state.surviving[node].items()):
            ordered = sorted(tuples)
            for victim in ordered:
                memo: dict = {}
                for witness in ordered:
                    if witness == victim:
                        continue
                    if dominates(witness, victim, node, level, game, state, memo):
                        found.append(RemovalRecord(node, level, victim, witness))
                        break
    return found


def iterate_elimination(
    game: EliminationGame,
    order: str = "greedy",
    rng_seed: int | None = None,
    script: Sequence[tuple[int, int, CloneTuple]] | None = None,
) -> EliminationResult:
    """Remove weakly dominated strategies one at a time until fixpoint.

    order: "greedy" removes the first dominated strategy in (node, level,
    lexicographic) order; "random" draws uniformly among the currently
    dominated ones (seeded); "scripted" follows `script` entries of
    (node, level, strategy) and stops when the script ends.
    """
    if order not in ("greedy", "random", "scripted"):
        raise InvalidParameterError(f"unknown order policy {order!r}")
    state = game.initial_state()
    trace: list[RemovalRecord] = []
    if order == "scripted":
        for node, level, strategy in script or ():
            candidates = _find_dominated(game, state)
            match = [
                r
                for r in candidates
                if (r.node, r.level, r.strategy) == (node, level, tuple(strategy))
            ]
            if not match:
                raise DominationCheckFailedError(node, level, tuple(strategy), None, -1)
            state.surviving[node][level].discard(match[0].strategy)
            trace.append(match[0])
        return EliminationResult(state=state, trace=tuple(trace))
    rng = random.Random(rng_seed)
    while True:
        candidates = _find_dominated(game, state)
        if not candidates:
            break
        pick = candidates[0] if order == "greedy" else rng.choice(candidates)
        state.surviving[pick.node][pick.level].discard(pick.strategy)
        trace.append(pick)
    return EliminationResult(state=state, trace=tuple(trace))


def _strategy_bundles(
    arity: int, max_level: int, include_pre_auth: bool
) -> list[Strategy]:
    """Every full per-level strategy of a node with `arity` children."""
    per_level: list[list[tuple[int, CloneTuple, int]]] = []
    for level in range(1, max_level + 1):
        tuples = list(product(range(level), repeat=arity))
        pres = range(level) if include_pre_auth else (0,)
        per_level.append([(level, t, p) for t in tuples for p in pres])
    bundles = []
    for combo in product(*per_level):
        clones = {level: t for level, t, _ in combo}
        pre = {level: p for level, _, p in combo if p}
        bundles.append(Strategy.make(clones=clones, pre_auth=pre))
    return bundles


def brute_force_elimination(
    game: EliminationGame,
    include_pre_auth: bool = False,
    max_profiles: int = 2_000_000,
) -> dict[int, set[Strategy]]:
    """Independent oracle for tiny games: full per-level strategy bundles,
    utilities by exhaustive winner enumeration (no closed form), weak
    dominance quantified over all other nodes' surviving bundles.

    Greedy one-at-a-time removal until fixpoint. Exponential; guarded by
    max_profiles.
    """
    forest = game.forest
    assignment = uniform_assignment(game.table, forest.config.t)
    external = game.k - 1
    nodes = list(range(forest.node_count))
    surviving: dict[int, list[Strategy]] = {
        v: _strategy_bundles(
            len(forest.children[v]), game.max_level(v), include_pre_auth
        )
        for v in nodes
    }
    total = 1
    for bundles in surviving.values():
        total *= len(bundles)
    if total > max_profiles:
        raise InvalidParameterError(
            f"profile space {total} exceeds brute-force limit {max_profiles}"
        )

    cache: dict[tuple, dict[int, Fraction]] = {}

    def utilities(profile_key: tuple[Strategy, ...]) -> dict[int, Fraction]:
        hit = cache.get(profile_key)
        if hit is None:
            profile = dict(zip(nodes, profile_key))
            hit = exact_expected_rewards(
                forest, profile, assignment, external_attempters=external
            )
            cache[profile_key] = hit
        return hit

    def opponent_profiles(v: int):
        other_lists = [surviving[u] if u != v else [None] for u in nodes]
        yield from product(*other_lists)

    changed = True
    while changed:
        changed = False
        for v in nodes:
            ordered = list(surviving[v])
            removed = None
            for victim in ordered:
                for witness in ordered:
                    if witness is victim:
                        continue
                    better_somewhere = False
                    dominated = True
                    for opp in opponent_profiles(v):
                        key_victim = tuple(
                            victim if u == v else s for u, s in zip(nodes, opp)
                        )
                        key_witness = tuple(
                            witness if u == v else s for u, s in zip(nodes, opp)
                        )
                        u_victim = utilities(key_victim)[v]
                        u_witness = utilities(key_witness)[v]
                        if u_witness < u_victim:
                            dominated = False
                            break
                        if u_witness > u_victim:
                            better_somewhere = True
                    if dominated and better_somewhere:
                        removed = victim
                        break
                if removed is not None:
                    break
            if removed is not None:
                surviving[v].remove(removed)
                changed = True
    return {v: set(bundles) for v, bundles in surviving.items()}


@dataclass(frozen=True)
class ClaimCheck:
    """Outcome of the fewer-clones-is-better inequality check."""

    holds: bool
    lhs: Fraction
    rhs: Fraction
    threshold: Fraction
    counterexample: dict | None = None

    def __bool__(self) -> bool:
        return self.holds


def fewer_clones_threshold(d: int, beta: Fraction | int, child_height: int) -> Fraction:
    """Sufficient environment size: 2/beta + 6*d*A + 6, where A is the size
    of the full tree of height child_height."""
    return 2 / Fraction(beta) + 6 * d * full_subtree_size(d, child_height) + 6


def check_fewer_clones_better(
    d: int,
    beta: Fraction | int,
    level: int,
    child_height: int,
    k: int,
    strategy_pair: tuple[Sequence[int], Sequence[int]] | None = None,
) -> ClaimCheck:
    """Exactly verify that removing one clone from the edge toward a child
    whose subtree spans a full tree of height child_height (and would span
    child_height + 1 after the removal) strictly raises expected utility,
    for every configuration of the other children.

    With y_d = child_height, A = A(y_d) and Q = A / d^y_d, the inequality
    U(c_d - 1) > U(c_d) reduces exactly to

        k * (level - y_d - 1 - Q)  >  1/beta + level + sum_i coef(y_i)*A_i

    where coef(y) = y_d + 1 - y + Q and the d-th child contributes the
    fixed A_i = A. Other children's populations A_i range over what their
    entry levels allow; the right side is linear in each A_i, so the worst
    case sits at an endpoint. With strategy_pair=None the check quantifies
    over all other-children clone counts >= the decremented coordinate's.
    """
    beta = Fraction(beta)
    if d < 3:
        raise PreconditionViolatedError(f"branching d={d} must be >= 3")
    if beta <= 0:
        raise PreconditionViolatedError(f"beta={beta} must be positive")
    if level < 2:
        raise PreconditionViolatedError(f"level={level} must be >= 2")
    if not (0 <= child_height <= level - 2):
        raise PreconditionViolatedError(
            f"child_height={child_height} must be in 0..{level - 2}"
        )
    if k < 1:
        raise PreconditionViolatedError(f"k={k} must be >= 1")

    y_d = child_height
    a_full = Fraction(full_subtree_size(d, y_d))
    q = a_full / d**y_d

    def coef(y: int) -> Fraction:
        return y_d + 1 - y + q

    def worst_term(y: int) -> tuple[Fraction, int]:
        """Max of coef(y) * A over achievable A, with the witness A."""
        if y <= 0:
            return Fraction(0), 0
        lo, hi = 1, full_subtree_size(d, y)
        best = max((coef(y) * lo, lo), (coef(y) * hi, hi))
        return best

    lhs = k * (level - y_d - 1 - q)
    rhs = 1 / beta + level + (1 + q) * a_full
    witness_counts: list[int]
    if strategy_pair is None:
        # every other child duplicated at least as much: y in [y_d, level-1]
        best_y, best_term, best_a = y_d, Fraction(0), 0
        for y in range(y_d, level):
            term, a = worst_term(y)
            if term > best_term:
                best_y, best_term, best_a = y, term, a
        rhs += (d - 1) * best_term
        witness_counts = [best_a] * (d - 1)
        witness_levels = [best_y] * (d - 1)
    else:
        incumbent, candidate = (tuple(s) for s in strategy_pair)
        if len(incumbent) != d or len(candidate) != d:
            raise PreconditionViolatedError("strategy tuples must have d entries")
        diff = [i for i in range(d) if incumbent[i] != candidate[i]]
        if len(diff) != 1 or incumbent[diff[0]] - 1 != candidate[diff[0]]:
            raise PreconditionViolatedError(
                "candidate must equal incumbent with one coordinate lowered by 1"
            )
        dec = diff[0]
        if incumbent[dec] != level - 1 - y_d:
            raise PreconditionViolatedError(
                f"decremented coordinate must be {level - 1 - y_d} for "
                f"child_height={y_d}"
            )
        if any(not 0 <= c <= level - 1 for c in incumbent):
            raise PreconditionViolatedError("clone counts out of 0..level-1")
        witness_counts = []
        witness_levels = []
        for i in range(d):
            if i == dec:
                continue
            y = level - 1 - incumbent[i]
            term, a = worst_term(y)
            rhs += term
            witness_counts.append(a)
            witness_levels.append(y)
    holds = lhs > rhs
    counterexample = None
    if not holds:
        counterexample = {
            "other_child_entry_levels": witness_levels,
            "other_child_attempters": witness_counts,
            "decremented_child_attempters": int(a_full),
        }
    return ClaimCheck(
        holds=holds,
        lhs=lhs,
        rhs=rhs,
        threshold=fewer_clones_threshold(d, beta, child_height),
        counterexample=counterexample,
    )
