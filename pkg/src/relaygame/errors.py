"""Exception hierarchy shared by all relaygame modules."""


class RelayGameError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidConfigError(RelayGameError):
    """Topology parameters out of range (t, d, or H)."""


class BranchingTooSmallError(InvalidConfigError):
    """Branching factor below 3: structure is fine, but the elimination
    guarantees checked by this package require d >= 3."""


class InvalidParameterError(RelayGameError):
    """Scheme or protocol parameter out of range."""


class InvalidLevelError(RelayGameError):
    """Operation requires a node at level >= 1."""


class MalformedChainError(RelayGameError):
    """Winning-chain identities do not form contiguous per-node runs."""


class NoAttemptersError(RelayGameError):
    """Authorization draw requested but no node attempts."""


class DominationCheckFailedError(RelayGameError):
    """A scheduled elimination step removed a strategy that is not actually
    dominated; signals that the convergence hypotheses do not hold."""

    def __init__(self, node, level, strategy, witness, cap_index):
        self.node = node
        self.level = level
        self.strategy = strategy
        self.witness = witness
        self.cap_index = cap_index
        super().__init__(
            f"strategy {strategy} of node {node} at level {level} is not "
            f"dominated by {witness} (cap step {cap_index})"
        )


class PreconditionViolatedError(RelayGameError):
    """A structural precondition of a bound or inequality check failed."""


class SizeLimitError(RelayGameError):
    """Instance too large for the exact optimization oracle."""


class LPError(RelayGameError):
    """Linear program is infeasible or unbounded."""


class CustodyError(RelayGameError):
    """Base class for chain-of-custody protocol errors."""


class NotCustodyHeadError(CustodyError):
    """Forwarding key is not the current custody head."""


class BrokenLinkError(CustodyError):
    """Hop receiver/sender linkage mismatch."""


class BadSignatureError(CustodyError):
    """A signature in the envelope does not verify."""


class UnknownSeedError(CustodyError):
    """First hop sender is not one of the record's seeds."""


class ChainTooLongError(CustodyError):
    """Chain length exceeds the reward horizon; no payments are due."""


class DecodeError(CustodyError):
    """Canonical byte stream is malformed."""
