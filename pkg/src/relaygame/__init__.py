"""relaygame: reward schemes for information propagation on tree networks.

Exact (rational-arithmetic) tooling for studying who forwards a
transaction when everyone who hears about it competes to authorize it:
reward-table constructors, the propagation game with Sybil cloning,
iterated elimination of dominated strategies, deviation audits, payment
lower bounds for dominant-strategy schemes, and a signed chain-of-custody
fee protocol.
"""

from . import bounds, custody, elimination, errors, game, schemes, simplex, sybil, topology
from .bounds import (
    BoundValue,
    ConstraintReport,
    binomial_lower_bound,
    check_scheme_constraints,
    dominant_scheme_payment_bound,
    min_payment_oracle,
    position_reward_floor,
)
from .elimination import (
    EliminationGame,
    check_fewer_clones_better,
    clone_cap_elimination,
    fewer_clones_threshold,
    iterate_elimination,
)
from .game import (
    ExternalEnvironment,
    Strategy,
    WinningChain,
    allocate_rewards,
    attempt_set,
    aware_set,
    build_winning_chain,
    compute_levels,
    exact_expected_rewards,
    expected_utility,
    full_propagation_profile,
    simulate_authorization,
)
from .schemes import (
    RewardTable,
    SchemeAssignment,
    check_individual_rationality,
    hybrid_expected_payment,
    make_almost_uniform,
    make_geometric,
    make_hybrid,
    total_payment,
    uniform_assignment,
)
from .sybil import SybilDeviation, best_sybil_response, sybil_gain
from .topology import Forest, NetworkConfig, build_forest, full_subtree_size

__version__ = "0.1.0"
