"""Second-round allocation and payments.

The second round is a sealed-bid auction among the advanced bidders with a
monotone allocation vector x (indexed by bid rank) and the discrete-form
incentive-compatible payment rule: the rank-xi bidder pays

    p_xi = sum_{j=xi}^{beta} s_{j+1} * (x_j - x_{j+1})

with x_{beta+1} = 0 and out-of-range bids treated as 0.  beta is the number of
ranks with positive allocation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


class ContractViolation(ValueError):
    """Input violates a documented precondition (e.g. unsorted bids)."""


@dataclass(frozen=True)
class AllocationRule:
    """Monotone non-increasing allocation probabilities by second-round rank."""

    x: tuple[float, ...]

    def __post_init__(self) -> None:
        x = tuple(float(v) for v in self.x)
        if not x:
            raise ContractViolation("allocation vector must be non-empty")
        if any(b > a + 1e-15 for a, b in zip(x, x[1:])):
            raise ContractViolation(f"allocation must be non-increasing: {x}")
        if x[-1] < 0:
            raise ContractViolation("allocation probabilities must be nonnegative")
        if sum(x) > 1 + 1e-12:
            raise ContractViolation(f"allocation probabilities sum to {sum(x)} > 1")
        object.__setattr__(self, "x", x)

    @property
    def alpha(self) -> int:
        return len(self.x)

    @property
    def beta(self) -> int:
        """Number of ranks that can win."""
        return sum(1 for v in self.x if v > 0)

    def prob(self, rank: int) -> float:
        """Allocation probability for a 1-based rank; 0 beyond alpha."""
        return self.x[rank - 1] if 1 <= rank <= self.alpha else 0.0


def myerson_payment(sorted_bids: Sequence[float], x: AllocationRule, rank: int) -> float:
    """Expected payment of the bidder at ``rank`` (1-based) given sorted bids.

    ``sorted_bids`` are the second-round bids in non-increasing order, one per
    advanced bidder.  Ranks with zero allocation pay nothing.
    """
    alpha = x.alpha
    if len(sorted_bids) != alpha:
        raise ContractViolation(
            f"expected {alpha} bids, got {len(sorted_bids)}"
        )
    if any(b > a + 1e-12 for a, b in zip(sorted_bids, sorted_bids[1:])):
        raise ContractViolation(f"bids must be sorted non-increasing: {sorted_bids}")
    if not 1 <= rank <= alpha:
        raise ContractViolation(f"rank {rank} out of range 1..{alpha}")
    beta = x.beta
    if x.prob(rank) == 0.0:
        return 0.0

    def bid(j: int) -> float:
        return sorted_bids[j - 1] if j <= alpha else 0.0

    total = 0.0
    for j in range(rank, beta + 1):
        x_next = x.prob(j + 1) if j < beta else 0.0
        total += bid(j + 1) * (x.prob(j) - x_next)
    return total


def second_round_rank(
    own_bid: float,
    own_key: tuple,
    others: Sequence[tuple[float, tuple]],
) -> int:
    """1-based rank of ``own_bid`` among all second-round bids.

    Ties are broken by the sort key (first-round position, then bidder id):
    the smaller key wins the tie.
    """
    rank = 1
    for bid, key in others:
        if bid > own_bid or (bid == own_bid and key < own_key):
            rank += 1
    return rank


def u2(
    value: float,
    own_bid: float,
    other_bids: Sequence[float],
    x: AllocationRule,
    own_key: tuple = (0, 0),
    other_keys: Sequence[tuple] | None = None,
) -> float:
    """Expected second-round utility value * x_rank - p_rank of one bidder.

    ``other_bids`` are the remaining advanced bidders' bids (any order).  Tie
    keys default to treating the caller as the highest-priority bidder.
    """
    if own_bid < 0 or any(b < 0 for b in other_bids):
        raise ContractViolation("bids must be nonnegative")
    if other_keys is None:
        other_keys = [(1, i + 1) for i in range(len(other_bids))]
    rank = second_round_rank(own_bid, own_key, list(zip(other_bids, other_keys)))
    alloc = x.prob(rank)
    if alloc == 0.0:
        return 0.0
    merged = sorted(
        [(own_bid, own_key)] + list(zip(other_bids, other_keys)),
        key=lambda t: (-t[0], t[1]),
    )
    sorted_bids = [b for b, _ in merged]
    return value * alloc - myerson_payment(sorted_bids, x, rank)
