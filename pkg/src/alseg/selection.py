"""Complementary sample selection.

Each iteration picks three oracle buckets from the unlabeled pool, in order:

  (a) no-detections: samples whose predicted mask is empty, drawn uniformly;
  (b) most-uncertain: highest raw scores among what is left, ties by id;
  (c) random: uniform draw from the remainder.

Unfilled quota cascades (a) -> (b) -> (c); any final shortfall is dropped so
the per-iteration annotation budget is never exceeded. Everything not chosen
that has a confident, non-degenerate prediction below the pseudo threshold
gets its own prediction as a transient training label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pool import ConsistencyError, PoolState, oracle_label

__all__ = [
    "SelectionQuotas",
    "PseudoPolicy",
    "ScoredSample",
    "SelectionResult",
    "pseudo_threshold",
    "select_complementary",
    "select_uniform",
    "apply_selection",
]


@dataclass(frozen=True)
class SelectionQuotas:
    n_no_detection: int = 10
    n_most_uncertain: int = 10
    n_random: int = 15

    def __post_init__(self) -> None:
        if min(self.n_no_detection, self.n_most_uncertain, self.n_random) < 0:
            raise ValueError("quotas must be >= 0")

    @property
    def total(self) -> int:
        return self.n_no_detection + self.n_most_uncertain + self.n_random


@dataclass(frozen=True)
class PseudoPolicy:
    """Linearly decaying raw-score threshold for pseudo-label admission."""

    delta0: float = 6.0
    decay: float = 0.0
    floor: float = 0.0

    def __post_init__(self) -> None:
        if self.delta0 <= 0:
            raise ValueError("delta0 must be > 0")
        if self.decay < 0:
            raise ValueError("decay must be >= 0")
        if self.floor < 0 or self.delta0 < self.floor:
            raise ValueError("need 0 <= floor <= delta0")


def pseudo_threshold(policy: PseudoPolicy, iteration: int) -> float:
    if iteration < 0:
        raise ValueError("iteration must be >= 0")
    return max(policy.delta0 - iteration * policy.decay, policy.floor)


@dataclass
class ScoredSample:
    """One unlabeled sample's scoring-phase record."""

    sample_id: int
    raw_score: float
    degenerate: bool
    mask: np.ndarray

    @property
    def empty_prediction(self) -> bool:
        return not np.any(self.mask)


@dataclass
class SelectionResult:
    no_detection: list[int] = field(default_factory=list)
    most_uncertain: list[int] = field(default_factory=list)
    random: list[int] = field(default_factory=list)
    pseudo: list[tuple[int, np.ndarray]] = field(default_factory=list)

    @property
    def oracle_ids(self) -> list[int]:
        return [*self.no_detection, *self.most_uncertain, *self.random]

    @property
    def pseudo_ids(self) -> list[int]:
        return [sid for sid, _ in self.pseudo]


def _pick(ids: list[int], k: int, rng: np.random.Generator) -> list[int]:
    order = rng.permutation(np.asarray(ids, dtype=np.int64))
    return [int(i) for i in order[:k]]


def _check_records(records: list[ScoredSample]) -> list[ScoredSample]:
    if not records:
        raise ValueError("records must be non-empty")
    ids = [r.sample_id for r in records]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate sample ids in records")
    if not all(math.isfinite(r.raw_score) for r in records):
        raise ValueError("raw scores must be finite")
    return sorted(records, key=lambda r: r.sample_id)


def select_complementary(
    records: list[ScoredSample],
    quotas: SelectionQuotas,
    policy: PseudoPolicy,
    iteration: int,
    rng: np.random.Generator,
) -> SelectionResult:
    """Pick the oracle buckets and the pseudo-label set for one iteration.

    Deterministic given (records, quotas, policy, iteration, rng state); the
    candidate lists are put in canonical id order before any random draw.
    """
    recs = _check_records(records)

    empties = [r.sample_id for r in recs if r.empty_prediction]
    take_nd = min(quotas.n_no_detection, len(empties))
    no_detection = _pick(empties, take_nd, rng)
    chosen = set(no_detection)
    carry = quotas.n_no_detection - take_nd

    rest = [r for r in recs if r.sample_id not in chosen]
    by_uncertainty = sorted(rest, key=lambda r: (-r.raw_score, r.sample_id))
    take_mu = min(quotas.n_most_uncertain + carry, len(rest))
    most_uncertain = [r.sample_id for r in by_uncertainty[:take_mu]]
    chosen.update(most_uncertain)
    carry = quotas.n_most_uncertain + carry - take_mu

    rest = [r for r in rest if r.sample_id not in chosen]
    take_rnd = min(quotas.n_random + carry, len(rest))
    random_ids = _pick([r.sample_id for r in rest], take_rnd, rng)
    chosen.update(random_ids)

    threshold = pseudo_threshold(policy, iteration)
    pseudo = [
        (r.sample_id, r.mask)
        for r in rest
        if r.sample_id not in chosen
        and not r.degenerate
        and not r.empty_prediction
        and r.raw_score < threshold
    ]
    return SelectionResult(
        no_detection=no_detection,
        most_uncertain=most_uncertain,
        random=random_ids,
        pseudo=pseudo,
    )


def select_uniform(
    records: list[ScoredSample], budget: int, rng: np.random.Generator
) -> SelectionResult:
    """Ablation baseline: the whole oracle budget drawn uniformly, no pseudo."""
    recs = _check_records(records)
    ids = [r.sample_id for r in recs]
    return SelectionResult(random=_pick(ids, min(budget, len(ids)), rng))


def apply_selection(
    pool: PoolState, result: SelectionResult, oracle=oracle_label
) -> PoolState:
    """Commit a selection: oracle ids move to the labeled set with ground
    truth attached, pseudo ids get transient marks. Previous pseudo marks are
    cleared first. Validates before mutating, so a bad result leaves the pool
    untouched."""
    oracle_ids = result.oracle_ids
    all_ids = oracle_ids + result.pseudo_ids
    if len(set(all_ids)) != len(all_ids):
        raise ConsistencyError("selection result contains a duplicate id")
    missing = [i for i in all_ids if i not in pool.unlabeled]
    if missing:
        raise ConsistencyError(f"ids not in the unlabeled pool: {missing}")

    pool.pseudo.clear()
    for sid in oracle_ids:
        gt = oracle(pool, sid)
        img = pool.unlabeled.pop(sid)
        pool.hidden_gt.pop(sid)
        pool.labeled[sid] = (img, gt)
    for sid, mask in result.pseudo:
        pool.pseudo[sid] = mask
    return pool
