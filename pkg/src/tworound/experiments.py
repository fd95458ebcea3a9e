"""Monte Carlo revenue experiments for the one-winner mode.

Three harnesses sweep the space of admissible exclusion vectors Y and compare
the average revenue of the risky-order equilibrium class against the truthful
class:

* :func:`run_gap_experiment` — fixed theta, several valuation triples with a
  narrowing top gap;
* :func:`run_theta_experiment` — fixed valuations, growing theta;
* :func:`run_random_valuation_experiment` — valuations drawn uniformly at
  random, recording per valuation only the best revenue seen in each class.

Y draws are independent uniform variates normalized to the simplex and then
sorted descending; draws that fail the strict ordering constraint are
discarded (and counted).  All runs are deterministic in the seed.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .equilibrium import DegenerateRatioError

logger = logging.getLogger(__name__)

DEFAULT_SEED = 20240501


@dataclass(frozen=True)
class ExperimentConfig:
    """Shared configuration for the revenue experiments."""

    valuations: tuple[tuple[float, float, float], ...] = ()
    thetas: tuple[int, ...] = (3,)
    draws: int = 10_000
    n_valuations: int = 1_000
    value_max: float = 1_000.0
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.draws < 1:
            raise ValueError("draws must be >= 1")
        vals = tuple(tuple(float(x) for x in v) for v in self.valuations)
        for v in vals:
            if len(v) != 3 or v[2] <= 0 or sorted(v, reverse=True) != list(v):
                raise ValueError(f"valuations must be positive descending triples: {v}")
        object.__setattr__(self, "valuations", vals)
        object.__setattr__(self, "thetas", tuple(int(t) for t in self.thetas))


@dataclass(frozen=True)
class ExperimentRow:
    experiment_id: str
    v: tuple[float, float, float]
    theta: int
    risky_count: int
    risky_avg_rev: float | None
    truthful_count: int
    truthful_avg_rev: float | None

    @property
    def increment_pct(self) -> float | None:
        if not self.risky_count or not self.truthful_count:
            return None
        if self.risky_avg_rev is None or self.truthful_avg_rev is None:
            return None
        return 100.0 * (self.risky_avg_rev - self.truthful_avg_rev) / self.truthful_avg_rev


def _draw_sorted_Y(rng: np.random.Generator, theta: int, n: int) -> np.ndarray:
    """n simplex draws (normalized independent uniforms), sorted descending."""
    w = rng.random((n, theta))
    Y = w / w.sum(axis=1, keepdims=True)
    Y.sort(axis=1)
    return Y[:, ::-1]


def _classify_batch(
    Y: np.ndarray, v: tuple[float, float, float]
) -> tuple[np.ndarray, np.ndarray, np.ndarray, int]:
    """Class masks and risky/truthful revenues for a batch of sorted Y draws.

    Returns (risky mask, truthful mask, (rev_risky, rev_truthful), discarded).
    A draw is risky-class when the tail-gap ratio exceeds the valuation gap
    ratio r = (v1-v2)/(v2-v3), truthful-class when it falls short; exact
    boundaries and draws violating the strict ordering constraint are
    discarded.
    """
    v1, v2, v3 = v
    if v2 == v3:
        raise DegenerateRatioError(f"v2 == v3 in {v}: gap ratio undefined")
    theta = Y.shape[1]
    ordered = (Y[:, theta - 3] > Y[:, theta - 2]) & (Y[:, theta - 2] > Y[:, theta - 1])
    if theta > 3:
        ordered &= Y[:, : theta - 3].min(axis=1) > Y[:, theta - 2]
    S = Y[:, : theta - 2].sum(axis=1)
    A = Y[:, theta - 2] + Y[:, theta - 1]
    ratio = (Y[:, theta - 2] - Y[:, theta - 1]) / S
    r = (v1 - v2) / (v2 - v3)
    risky = ordered & (ratio > r)
    truthful = ordered & (ratio < r)
    discarded = int(Y.shape[0] - risky.sum() - truthful.sum())
    revenues = (S * v1 + A * v3, S * v2 + A * v3)
    return risky, truthful, revenues, discarded


def _class_row(
    experiment_id: str,
    v: tuple[float, float, float],
    theta: int,
    risky: np.ndarray,
    truthful: np.ndarray,
    revenues: tuple[np.ndarray, np.ndarray],
    discarded: int,
) -> ExperimentRow:
    rev_risky, rev_truth = revenues
    n_risky = int(risky.sum())
    n_truth = int(truthful.sum())
    if discarded:
        logger.debug(
            "%s: discarded %d draws (ordering constraint or classification boundary)",
            experiment_id,
            discarded,
        )
    return ExperimentRow(
        experiment_id=experiment_id,
        v=v,
        theta=theta,
        risky_count=n_risky,
        risky_avg_rev=float(rev_risky[risky].mean()) if n_risky else None,
        truthful_count=n_truth,
        truthful_avg_rev=float(rev_truth[truthful].mean()) if n_truth else None,
    )


def run_gap_experiment(config: ExperimentConfig) -> list[ExperimentRow]:
    """Sweep valuation triples at fixed theta (default 3)."""
    if not config.valuations:
        raise ValueError("gap experiment needs a list of valuation triples")
    theta = config.thetas[0]
    rng = np.random.default_rng(config.seed)
    rows = []
    for idx, v in enumerate(config.valuations, start=1):
        Y = _draw_sorted_Y(rng, theta, config.draws)
        risky, truthful, revenues, discarded = _classify_batch(Y, v)
        rows.append(_class_row(f"gap-{idx}", v, theta, risky, truthful, revenues, discarded))
    return rows


def run_theta_experiment(config: ExperimentConfig) -> list[ExperimentRow]:
    """Sweep theta at a fixed valuation triple."""
    if len(config.valuations) != 1:
        raise ValueError("theta experiment needs exactly one valuation triple")
    v = config.valuations[0]
    rng = np.random.default_rng(config.seed)
    rows = []
    for idx, theta in enumerate(config.thetas, start=1):
        Y = _draw_sorted_Y(rng, theta, config.draws)
        risky, truthful, revenues, discarded = _classify_batch(Y, v)
        rows.append(_class_row(f"theta-{idx}", v, theta, risky, truthful, revenues, discarded))
    return rows


def run_random_valuation_experiment(config: ExperimentConfig) -> list[ExperimentRow]:
    """Random valuations; per valuation record each class's best revenue.

    For every theta, ``n_valuations`` descending triples are drawn uniformly
    from (0, value_max); each gets its own batch of Y draws.  A valuation is
    retained only when both equilibrium classes are non-empty in its batch;
    per retained valuation the maximum revenue within each class is recorded,
    and the row reports the average of those maxima (counts are retained
    valuations).
    """
    rng = np.random.default_rng(config.seed)
    rows = []
    for idx, theta in enumerate(config.thetas, start=1):
        risky_best: list[float] = []
        truthful_best: list[float] = []
        skipped = 0
        for _ in range(config.n_valuations):
            v = tuple(np.sort(rng.uniform(0.0, config.value_max, size=3))[::-1])
            while v[0] == v[1] or v[1] == v[2]:
                v = tuple(np.sort(rng.uniform(0.0, config.value_max, size=3))[::-1])
            Y = _draw_sorted_Y(rng, theta, config.draws)
            risky, truthful, revenues, _ = _classify_batch(Y, v)
            if not risky.any() or not truthful.any():
                skipped += 1
                continue
            rev_risky, rev_truth = revenues
            risky_best.append(float(rev_risky[risky].max()))
            truthful_best.append(float(rev_truth[truthful].max()))
        retained = len(risky_best)
        logger.info(
            "random-valuation theta=%d: retained %d/%d valuations (%d skipped)",
            theta,
            retained,
            config.n_valuations,
            skipped,
        )
        rows.append(
            ExperimentRow(
                experiment_id=f"random-{idx}",
                v=(float("nan"),) * 3,
                theta=theta,
                risky_count=retained,
                risky_avg_rev=float(np.mean(risky_best)) if retained else None,
                truthful_count=retained,
                truthful_avg_rev=float(np.mean(truthful_best)) if retained else None,
            )
        )
    return rows


CSV_COLUMNS = (
    "experiment_id",
    "v1",
    "v2",
    "v3",
    "theta",
    "risky_count",
    "risky_avg_rev",
    "truthful_count",
    "truthful_avg_rev",
    "increment_pct",
)


def write_rows_csv(rows: Sequence[ExperimentRow], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for row in rows:
            writer.writerow(rows_to_record(row))


def rows_to_record(row: ExperimentRow) -> list:
    def fmt(x: float | None) -> str:
        if x is None or (isinstance(x, float) and np.isnan(x)):
            return ""
        return f"{x:.6f}"

    inc = row.increment_pct
    return [
        row.experiment_id,
        fmt(row.v[0]),
        fmt(row.v[1]),
        fmt(row.v[2]),
        row.theta,
        row.risky_count,
        fmt(row.risky_avg_rev),
        row.truthful_count,
        fmt(row.truthful_avg_rev),
        "" if inc is None else f"{inc:.4f}",
    ]
