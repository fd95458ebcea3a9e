"""First-round selection: subsets of top positions, joint distributions, marginals.

The first round of the two-round auction keeps the top ``theta`` bidders and
advances an ``alpha``-subset of them chosen at random from a joint distribution
over all C(theta, alpha) position subsets.  This module holds that
distribution, computes marginal advancement probabilities, and provides the
exclusion-indexed view used throughout the alpha = theta - 1 analysis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Sequence

import numpy as np

SIMPLEX_ATOL = 1e-12
NORMALIZE_ATOL = 1e-9


class SelectionError(ValueError):
    """Invalid selection distribution or incompatible mode."""


def enumerate_subsets(theta: int, alpha: int) -> list[tuple[int, ...]]:
    """All size-``alpha`` subsets of positions {1..theta}, lexicographic.

    Each subset is an ascending tuple of 1-based first-round positions.
    """
    if theta < 1 or alpha < 1 or alpha > theta:
        raise SelectionError(f"need 1 <= alpha <= theta, got theta={theta} alpha={alpha}")
    if theta > 20:
        raise SelectionError(f"theta={theta} exceeds supported maximum 20")
    return list(combinations(range(1, theta + 1), alpha))


@dataclass(frozen=True)
class SelectionDistribution:
    """Joint probability over the alpha-subsets of the top theta positions.

    ``probs`` maps each canonical (ascending-tuple) subset to its probability.
    Probabilities must cover every subset and sum to 1; sums within 1e-9 of 1
    are renormalized on construction, anything further off is rejected.
    """

    theta: int
    alpha: int
    probs: dict[tuple[int, ...], float] = field(compare=False)

    def __post_init__(self) -> None:
        subsets = enumerate_subsets(self.theta, self.alpha)
        canonical: dict[tuple[int, ...], float] = {}
        for key, p in self.probs.items():
            tkey = tuple(sorted(int(i) for i in key))
            if tkey in canonical:
                raise SelectionError(f"duplicate subset {tkey}")
            canonical[tkey] = float(p)
        missing = [s for s in subsets if s not in canonical]
        extra = [s for s in canonical if s not in set(subsets)]
        if missing or extra:
            raise SelectionError(
                f"subset keys do not match C({self.theta},{self.alpha}): "
                f"missing={missing[:3]} extra={extra[:3]}"
            )
        if any(p < -SIMPLEX_ATOL for p in canonical.values()):
            raise SelectionError("negative subset probability")
        total = sum(canonical.values())
        if abs(total - 1.0) > NORMALIZE_ATOL:
            raise SelectionError(f"subset probabilities sum to {total!r}, not 1")
        if total != 1.0:
            canonical = {k: p / total for k, p in canonical.items()}
        # Keep canonical lexicographic ordering regardless of input order.
        object.__setattr__(self, "probs", {s: max(canonical[s], 0.0) for s in subsets})

    @classmethod
    def uniform(cls, theta: int, alpha: int) -> "SelectionDistribution":
        subsets = enumerate_subsets(theta, alpha)
        p = 1.0 / len(subsets)
        return cls(theta, alpha, {s: p for s in subsets})

    @classmethod
    def point_mass(cls, theta: int, subset: Iterable[int]) -> "SelectionDistribution":
        key = tuple(sorted(int(i) for i in subset))
        subsets = enumerate_subsets(theta, len(key))
        return cls(theta, len(key), {s: (1.0 if s == key else 0.0) for s in subsets})

    def subsets(self) -> list[tuple[int, ...]]:
        return list(self.probs.keys())

    def to_json_dict(self) -> dict:
        return {
            "theta": self.theta,
            "alpha": self.alpha,
            "probs": [{"subset": list(s), "p": p} for s, p in self.probs.items()],
        }

    @classmethod
    def from_json_dict(cls, doc: Mapping) -> "SelectionDistribution":
        try:
            theta = int(doc["theta"])
            alpha = int(doc["alpha"])
            probs = {tuple(entry["subset"]): float(entry["p"]) for entry in doc["probs"]}
        except (KeyError, TypeError) as exc:
            raise SelectionError(f"malformed selection distribution document: {exc}") from exc
        return cls(theta, alpha, probs)

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())


def marginal_probabilities(dist: SelectionDistribution) -> np.ndarray:
    """Marginal advancement probability per first-round position.

    y[i-1] = P(position i advances) = sum of subset probabilities over subsets
    containing i.  The marginals always satisfy sum(y) == alpha.
    """
    y = np.zeros(dist.theta)
    for subset, p in dist.probs.items():
        for i in subset:
            y[i - 1] += p
    return y


@dataclass(frozen=True)
class ExclusionY:
    """Exclusion-indexed view of an alpha = theta - 1 selection distribution.

    With exactly one position left out per draw, the distribution is a vector
    over "which position is excluded".  Entry Y_{theta-i+1} (1-based) is the
    probability of the unique subset that excludes position i, so y_vec read
    left to right runs from "exclude the bottom position" to "exclude the top".
    """

    y_vec: tuple[float, ...]

    def __post_init__(self) -> None:
        vec = tuple(float(v) for v in self.y_vec)
        if any(v < -SIMPLEX_ATOL for v in vec):
            raise SelectionError("negative exclusion probability")
        if abs(sum(vec) - 1.0) > NORMALIZE_ATOL:
            raise SelectionError(f"exclusion probabilities sum to {sum(vec)!r}, not 1")
        object.__setattr__(self, "y_vec", vec)

    @property
    def theta(self) -> int:
        return len(self.y_vec)

    def __getitem__(self, index: int) -> float:
        """1-based access matching the Y_i subscript convention."""
        if not 1 <= index <= self.theta:
            raise IndexError(index)
        return self.y_vec[index - 1]

    def excluding(self, rank: int) -> float:
        """Probability of the subset that excludes first-round position ``rank``."""
        return self[self.theta - rank + 1]

    @property
    def ordered(self) -> bool:
        """True iff Y_i > Y_{theta-1} > Y_theta for every i <= theta - 2."""
        t = self.theta
        if t < 2:
            return False
        y_pen, y_last = self.y_vec[t - 2], self.y_vec[t - 1]
        if not y_pen > y_last:
            return False
        return all(self.y_vec[i] > y_pen for i in range(t - 2))


def to_exclusion_Y(dist: SelectionDistribution) -> ExclusionY:
    """Re-index an alpha = theta - 1 distribution by excluded position."""
    if dist.alpha != dist.theta - 1:
        raise SelectionError(
            f"exclusion indexing needs alpha = theta - 1, got "
            f"theta={dist.theta} alpha={dist.alpha}"
        )
    theta = dist.theta
    all_positions = set(range(1, theta + 1))
    y = [0.0] * theta
    for subset, p in dist.probs.items():
        (excluded,) = all_positions - set(subset)
        y[theta - excluded] = p  # 0-based slot for Y_{theta - excluded + 1}
    return ExclusionY(tuple(y))


def from_exclusion_Y(y: ExclusionY) -> SelectionDistribution:
    """Inverse of :func:`to_exclusion_Y`; exact round-trip."""
    theta = y.theta
    probs = {}
    for excluded in range(1, theta + 1):
        subset = tuple(i for i in range(1, theta + 1) if i != excluded)
        probs[subset] = y.excluding(excluded)
    return SelectionDistribution(theta, theta - 1, probs)


def sample_subset(dist: SelectionDistribution, rng: np.random.Generator) -> tuple[int, ...]:
    """Draw one advancing subset according to the joint distribution."""
    subsets = dist.subsets()
    weights = np.fromiter((dist.probs[s] for s in subsets), dtype=float, count=len(subsets))
    idx = rng.choice(len(subsets), p=weights / weights.sum())
    return subsets[idx]


def sample_simplex(k: int, rng: np.random.Generator) -> np.ndarray:
    """One draw from the uniform distribution on the (k-1)-simplex.

    Normalized independent unit-exponential draws, which is the standard
    Dirichlet(1,...,1) construction of the flat simplex distribution.
    """
    if k < 1:
        raise SelectionError(f"k must be positive, got {k}")
    if k == 1:
        return np.array([1.0])
    e = rng.exponential(size=k)
    out = e / e.sum()
    # Guard against pathological all-tiny draws; renormalize exactly.
    s = out.sum()
    if not math.isclose(s, 1.0, abs_tol=SIMPLEX_ATOL):
        out = out / s
    return out
