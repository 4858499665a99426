"""Dice overlap, the four-region sample taxonomy, and analysis exports.

The taxonomy splits evaluated samples by (uncertainty score, Dice) quadrant:

  R1 undetected          low score,  low Dice (misses the model is sure about)
  R2 uncertain correct   high score, high Dice
  R3 certain correct     low score,  high Dice (pseudo-label material)
  R4 uncertain wrong     high score, low Dice

An empty prediction with low Dice is forced into R1 whatever its score. The
boundaries (tau_u, tau_d) are analysis conventions: tau_u defaults to the
median raw score of the evaluated set, tau_d to 0.5.
"""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distance import UncertaintyScore
from .imaging import binarize
from .pool import PoolState
from .selection import ScoredSample

__all__ = [
    "RegionLabel",
    "RegionThresholds",
    "dice",
    "classify_region",
    "region_histogram",
    "IterationMetrics",
    "iteration_metrics",
    "RegionRow",
    "region_table",
    "write_region_csv",
    "REGION_CSV_COLUMNS",
]


class RegionLabel(enum.Enum):
    R1_UNDETECTED = "R1_undetected"
    R2_UNCERTAIN_CORRECT = "R2_uncertain_correct"
    R3_CERTAIN_CORRECT = "R3_certain_correct"
    R4_UNCERTAIN_WRONG = "R4_uncertain_wrong"


@dataclass(frozen=True)
class RegionThresholds:
    tau_u: float
    tau_d: float = 0.5

    def __post_init__(self) -> None:
        if self.tau_u < 0:
            raise ValueError("tau_u must be >= 0")
        if not 0.0 <= self.tau_d <= 1.0:
            raise ValueError("tau_d must be in [0, 1]")


def dice(a: np.ndarray, b: np.ndarray) -> float:
    """2|A n B| / (|A| + |B|); two empty masks score 1.0 by convention."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    size_a = int(np.count_nonzero(a))
    size_b = int(np.count_nonzero(b))
    if size_a + size_b == 0:
        return 1.0
    inter = int(np.count_nonzero((a != 0) & (b != 0)))
    return 2.0 * inter / (size_a + size_b)


def classify_region(
    dice_val: float,
    score: UncertaintyScore,
    empty_prediction: bool,
    th: RegionThresholds,
) -> RegionLabel:
    low_dice = dice_val < th.tau_d
    if empty_prediction and low_dice:
        return RegionLabel.R1_UNDETECTED
    high_u = score.raw >= th.tau_u
    if high_u:
        return RegionLabel.R4_UNCERTAIN_WRONG if low_dice else RegionLabel.R2_UNCERTAIN_CORRECT
    return RegionLabel.R1_UNDETECTED if low_dice else RegionLabel.R3_CERTAIN_CORRECT


def region_histogram(
    scores: list[UncertaintyScore], bins: int
) -> tuple[np.ndarray, np.ndarray]:
    """Counts of raw scores in equal-width bins over [0, max score].

    This is the ground-truth-free projection: only the score axis is
    observable in deployment, so correct and wrong high-score samples land
    in the same bins. Returns (counts, bin edges); empty input gives empty
    arrays.
    """
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if not scores:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.float64)
    raws = np.asarray([s.raw for s in scores], dtype=np.float64)
    hi = float(raws.max())
    if hi <= 0.0:
        hi = 1.0
    counts, edges = np.histogram(raws, bins=bins, range=(0.0, hi))
    return counts.astype(np.int64), edges


@dataclass(frozen=True)
class IterationMetrics:
    mean_test_dice: float
    median_test_dice: float
    labeled_count: int
    pseudo_count: int
    region_counts: dict[RegionLabel, int]


def _test_dices(pool: PoolState, predictor, threshold: float) -> list[float]:
    out = []
    for sid in sorted(pool.test):
        img, gt = pool.test[sid]
        pred = binarize(predictor.predict_deterministic(img), threshold)
        out.append(dice(pred, gt))
    return out


def iteration_metrics(
    pool: PoolState,
    predictor,
    records: list[ScoredSample],
    *,
    binarize_threshold: float = 0.5,
    thresholds: RegionThresholds | None = None,
) -> IterationMetrics:
    """Evaluation snapshot: deterministic test Dice plus the region census of
    the unlabeled pool (records of ids that left the pool are skipped)."""
    if not pool.test:
        raise ValueError("test set is empty")
    dices = _test_dices(pool, predictor, binarize_threshold)

    evaluated = [r for r in records if r.sample_id in pool.unlabeled]
    counts = {label: 0 for label in RegionLabel}
    if evaluated:
        if thresholds is None:
            tau_u = float(np.median([r.raw_score for r in evaluated]))
            thresholds = RegionThresholds(tau_u=tau_u)
        for r in evaluated:
            d = dice(r.mask, pool.hidden_gt[r.sample_id])
            score = UncertaintyScore(raw=r.raw_score, normalized=0.0)
            counts[classify_region(d, score, r.empty_prediction, thresholds)] += 1
    return IterationMetrics(
        mean_test_dice=float(np.mean(dices)),
        median_test_dice=float(np.median(dices)),
        labeled_count=len(pool.labeled),
        pseudo_count=len(pool.pseudo),
        region_counts=counts,
    )


REGION_CSV_COLUMNS = [
    "sample_id",
    "dice",
    "raw_score",
    "normalized_score",
    "empty_prediction",
    "region",
]


@dataclass(frozen=True)
class RegionRow:
    sample_id: int
    dice: float
    raw_score: float
    normalized_score: float
    empty_prediction: bool
    region: RegionLabel


def region_table(
    pool: PoolState,
    records: list[ScoredSample],
    *,
    thresholds: RegionThresholds | None = None,
) -> list[RegionRow]:
    """Per-unlabeled-sample rows for external scatter/histogram plotting."""
    evaluated = sorted(
        (r for r in records if r.sample_id in pool.unlabeled),
        key=lambda r: r.sample_id,
    )
    if not evaluated:
        return []
    if thresholds is None:
        tau_u = float(np.median([r.raw_score for r in evaluated]))
        thresholds = RegionThresholds(tau_u=tau_u)
    rows = []
    for r in evaluated:
        d = dice(r.mask, pool.hidden_gt[r.sample_id])
        score = UncertaintyScore(raw=r.raw_score, normalized=r.raw_score / r.mask.size)
        rows.append(
            RegionRow(
                sample_id=r.sample_id,
                dice=d,
                raw_score=r.raw_score,
                normalized_score=score.normalized,
                empty_prediction=r.empty_prediction,
                region=classify_region(d, score, r.empty_prediction, thresholds),
            )
        )
    return rows


def write_region_csv(path: str | Path, rows: list[RegionRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(REGION_CSV_COLUMNS)
        for r in rows:
            writer.writerow(
                [
                    r.sample_id,
                    repr(r.dice),
                    repr(r.raw_score),
                    repr(r.normalized_score),
                    int(r.empty_prediction),
                    r.region.value,
                ]
            )
