"""Exact evaluation of the composed two-round auction.

Expected utilities and revenue are computed by enumerating every possible
advancing subset (there are only C(theta, alpha) of them at the scales we
care about), which keeps equilibrium classification free of Monte Carlo
noise.  Single sampled runs are available for simulation-style checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .secondround import AllocationRule, myerson_payment
from .selection import SelectionDistribution, sample_subset

UTILITY_ATOL = 1e-9


class ConfigurationError(ValueError):
    """Mechanism/profile combination violates a structural precondition."""


@dataclass(frozen=True)
class Mechanism:
    """Two-round auction: keep top theta, advance alpha, allocate via x."""

    theta: int
    alpha: int
    selection: SelectionDistribution
    allocation: AllocationRule

    def __post_init__(self) -> None:
        if self.selection.theta != self.theta or self.selection.alpha != self.alpha:
            raise ConfigurationError(
                "selection distribution shape does not match mechanism "
                f"(theta={self.theta}, alpha={self.alpha})"
            )
        if self.allocation.alpha != self.alpha:
            raise ConfigurationError(
                f"allocation length {self.allocation.alpha} != alpha {self.alpha}"
            )
        if not 1 <= self.allocation.beta <= self.alpha <= self.theta:
            raise ConfigurationError("need theta >= alpha >= beta >= 1")

    @property
    def beta(self) -> int:
        return self.allocation.beta

    @property
    def competition_rank(self) -> int:
        """First-round rank theta - alpha + beta: the line of competition."""
        return self.theta - self.alpha + self.beta

    def to_json_dict(self) -> dict:
        doc = self.selection.to_json_dict()
        doc["x"] = list(self.allocation.x)
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "Mechanism":
        selection = SelectionDistribution.from_json_dict(doc)
        try:
            x = AllocationRule(tuple(float(v) for v in doc["x"]))
        except (KeyError, TypeError) as exc:
            raise ConfigurationError(f"malformed mechanism document: {exc}") from exc
        return cls(selection.theta, selection.alpha, selection, x)


@dataclass(frozen=True)
class BidProfile:
    """First- and second-round bids, indexed by bidder id (0-based).

    A bidder who can reach the second round must not lower their bid there
    (s_i >= b_i); bidders who can never advance may carry s_i = 0.
    """

    first_round: tuple[float, ...]
    second_round: tuple[float, ...]

    def __post_init__(self) -> None:
        b = tuple(float(v) for v in self.first_round)
        s = tuple(float(v) for v in self.second_round)
        if len(b) != len(s):
            raise ConfigurationError("first/second round bid vectors differ in length")
        if any(v < 0 for v in b + s):
            raise ConfigurationError("bids must be nonnegative")
        object.__setattr__(self, "first_round", b)
        object.__setattr__(self, "second_round", s)

    @property
    def n(self) -> int:
        return len(self.first_round)

    @classmethod
    def truthful(cls, values: Sequence[float]) -> "BidProfile":
        v = tuple(float(x) for x in values)
        return cls(v, v)


@dataclass(frozen=True)
class SubsetOutcome:
    subset: tuple[int, ...]  # first-round positions advanced
    probability: float
    winner_rank: int | None  # second-round rank receiving the top allocation
    winner_bidder: int | None
    payment: float  # total payment collected in this outcome


@dataclass(frozen=True)
class AuctionResult:
    expected_utilities: tuple[float, ...]
    expected_revenue: float
    outcomes: tuple[SubsetOutcome, ...] = field(default=())
    realized_subset: tuple[int, ...] | None = None
    realized_winner: int | None = None
    realized_payment: float | None = None


def first_round_positions(mech: Mechanism, bids: BidProfile) -> list[int]:
    """Bidder ids of the top theta first-round bids, position 1 first.

    Ties are broken by bidder id ascending (lower id wins the higher
    position).  Bidders below position theta are dropped.
    """
    if bids.n < mech.theta:
        raise ConfigurationError(f"need at least theta={mech.theta} bidders, got {bids.n}")
    order = sorted(range(bids.n), key=lambda i: (-bids.first_round[i], i))
    return order[: mech.theta]


def _subset_evaluation(
    mech: Mechanism,
    positions: Sequence[int],
    bids: BidProfile,
    subset: tuple[int, ...],
) -> tuple[dict[int, float], dict[int, float], int | None]:
    """Per-bidder allocation and payment inside one advanced subset.

    Returns (allocation by bidder id, payment by bidder id, top-rank bidder).
    Second-round ties break by first-round position, then bidder id.
    """
    entrants = []  # (bid, first-round position, bidder id)
    for pos in subset:
        bidder = positions[pos - 1]
        entrants.append((bids.second_round[bidder], pos, bidder))
    entrants.sort(key=lambda t: (-t[0], t[1], t[2]))
    sorted_bids = [t[0] for t in entrants]
    alloc: dict[int, float] = {}
    pay: dict[int, float] = {}
    top_bidder = None
    for rank, (_, _, bidder) in enumerate(entrants, start=1):
        a = mech.allocation.prob(rank)
        if a > 0:
            alloc[bidder] = a
            pay[bidder] = myerson_payment(sorted_bids, mech.allocation, rank)
            if rank == 1:
                top_bidder = bidder
    return alloc, pay, top_bidder


def _check_line_of_competition(
    mech: Mechanism,
    positions: Sequence[int],
    bids: BidProfile,
    subset: tuple[int, ...],
) -> None:
    """Assert s_beta >= b_{theta-alpha+beta} for one advanced subset."""
    s_sorted = sorted((bids.second_round[positions[p - 1]] for p in subset), reverse=True)
    s_beta = s_sorted[mech.beta - 1]
    b_ref = bids.first_round[positions[mech.competition_rank - 1]]
    if s_beta < b_ref - UTILITY_ATOL:
        raise AssertionError(
            f"line of competition violated: s_beta={s_beta} < b_ref={b_ref} "
            f"(subset={subset})"
        )


def enumerate_outcomes(mech: Mechanism, bids: BidProfile) -> list[SubsetOutcome]:
    positions = first_round_positions(mech, bids)
    outcomes = []
    for subset, prob in mech.selection.probs.items():
        alloc, pay, top_bidder = _subset_evaluation(mech, positions, bids, subset)
        outcomes.append(
            SubsetOutcome(
                subset=subset,
                probability=prob,
                winner_rank=1 if top_bidder is not None else None,
                winner_bidder=top_bidder,
                payment=sum(pay.values()),
            )
        )
    return outcomes


def expected_utility(
    mech: Mechanism, values: Sequence[float], bids: BidProfile, bidder: int
) -> float:
    """Exact expected utility of one bidder over all advancing subsets."""
    if len(values) != bids.n:
        raise ConfigurationError("values and bid profile differ in length")
    positions = first_round_positions(mech, bids)
    if bidder not in positions:
        return 0.0
    total = 0.0
    for subset, prob in mech.selection.probs.items():
        if prob == 0.0:
            continue
        alloc, pay, _ = _subset_evaluation(mech, positions, bids, subset)
        if bidder in alloc:
            total += prob * (values[bidder] * alloc[bidder] - pay[bidder])
    return total


def expected_revenue(mech: Mechanism, bids: BidProfile) -> float:
    """Probability-weighted total payment over all advancing subsets."""
    return sum(o.probability * o.payment for o in enumerate_outcomes(mech, bids))


def evaluate(mech: Mechanism, values: Sequence[float], bids: BidProfile) -> AuctionResult:
    """Full exact evaluation: utilities, revenue and the per-subset table."""
    outcomes = tuple(enumerate_outcomes(mech, bids))
    utils = tuple(expected_utility(mech, values, bids, i) for i in range(bids.n))
    revenue = sum(o.probability * o.payment for o in outcomes)
    return AuctionResult(expected_utilities=utils, expected_revenue=revenue, outcomes=outcomes)


def simulate_run(
    mech: Mechanism, bids: BidProfile, rng: np.random.Generator
) -> AuctionResult:
    """One sampled run: draw a subset, settle the second round, collect payments.

    The subset is sampled; payments within the subset are the exact expected
    payments of the rule, and the realized winner is sampled from the
    allocation probabilities.  Every run asserts the line-of-competition
    invariant.
    """
    positions = first_round_positions(mech, bids)
    subset = sample_subset(mech.selection, rng)
    _check_line_of_competition(mech, positions, bids, subset)
    alloc, pay, _ = _subset_evaluation(mech, positions, bids, subset)
    bidders = list(alloc.keys())
    weights = [alloc[b] for b in bidders]
    leftover = 1.0 - sum(weights)
    winner: int | None = None
    if bidders:
        idx = rng.choice(len(bidders) + 1, p=[*weights, max(leftover, 0.0)])
        if idx < len(bidders):
            winner = bidders[idx]
    return AuctionResult(
        expected_utilities=(),
        expected_revenue=sum(pay.values()),
        realized_subset=subset,
        realized_winner=winner,
        realized_payment=sum(pay.values()),
    )
