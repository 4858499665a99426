"""The active learning iteration state machine.

One iteration: score every unlabeled sample with MC-dropout uncertainty,
select oracle queries and pseudo-labels, commit them to the pool, fine-tune
the predictor on labeled + pseudo samples, evaluate on the held-out test
set, and append a log record.

Every random draw comes from a stream keyed by (master seed, iteration,
phase, [sample id]), so any phase is replayable in isolation and per-sample
work may be parallelized without changing results. A failed iteration leaves
the caller's pool and predictor untouched.

The run log CSV is byte-reproducible for a fixed (config, dataset, seed);
wall-clock timing is therefore reported via logging only and the elapsed_ms
column is fixed at 0.
"""

from __future__ import annotations

import csv
import io
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distance import score_sample
from .imaging import binarize
from .metrics import RegionLabel, iteration_metrics, region_table
from .pool import PoolState
from .predictor import RefPredictor, TrainConfig
from .selection import (
    PseudoPolicy,
    ScoredSample,
    SelectionQuotas,
    apply_selection,
    pseudo_threshold,
    select_complementary,
    select_uniform,
)
from .uncertainty import McConfig, mc_predict

__all__ = [
    "RunConfig",
    "IterationRecord",
    "RunLog",
    "IterationError",
    "phase_rng",
    "init_pools",
    "run_iteration",
    "run",
    "write_runlog_csv",
    "runlog_csv_bytes",
    "RUNLOG_CSV_COLUMNS",
]

logger = logging.getLogger(__name__)

_PHASES = {"split": 0, "seed_train": 1, "score": 2, "select": 3, "retrain": 4}


def phase_rng(
    seed: int, iteration: int, phase: str, sample_id: int | None = None
) -> np.random.Generator:
    """Deterministic stream for one phase (optionally one sample) of one
    iteration."""
    key = (iteration, _PHASES[phase])
    if sample_id is not None:
        key += (sample_id,)
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True)
class RunConfig:
    labeled_size: int = 600
    unlabeled_size: int = 1000
    test_size: int = 400
    mc: McConfig = field(default_factory=McConfig)
    quotas: SelectionQuotas = field(default_factory=SelectionQuotas)
    pseudo: PseudoPolicy = field(default_factory=PseudoPolicy)
    train: TrainConfig = field(default_factory=TrainConfig)
    iterations: int = 9
    binarize_threshold: float = 0.5
    seed: int = 42
    strategy: str = "ceal"  # "ceal" | "random"
    warm_start: bool = True

    def __post_init__(self) -> None:
        if min(self.labeled_size, self.unlabeled_size, self.test_size) < 1:
            raise ValueError("split sizes must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0.0 <= self.binarize_threshold <= 1.0:
            raise ValueError("binarize_threshold must be in [0, 1]")
        if self.strategy not in ("ceal", "random"):
            raise ValueError(f"unknown strategy {self.strategy!r}")


RUNLOG_CSV_COLUMNS = [
    "iteration",
    "n_labeled",
    "n_pseudo",
    "pseudo_threshold",
    "oracle_no_detect",
    "oracle_uncertain",
    "oracle_random",
    "mean_test_dice",
    "median_test_dice",
    "r1",
    "r2",
    "r3",
    "r4",
    "elapsed_ms",
]


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    n_labeled: int
    n_pseudo: int
    pseudo_threshold: float
    oracle_no_detect: int
    oracle_uncertain: int
    oracle_random: int
    mean_test_dice: float
    median_test_dice: float
    r1: int
    r2: int
    r3: int
    r4: int
    elapsed_ms: float


@dataclass
class RunLog:
    seed: int
    records: list[IterationRecord] = field(default_factory=list)
    region_rows: list | None = None


class IterationError(RuntimeError):
    def __init__(self, iteration: int, cause: BaseException) -> None:
        super().__init__(f"iteration {iteration} failed: {cause}")
        self.iteration = iteration


def init_pools(
    dataset: dict[int, tuple[np.ndarray, np.ndarray]],
    config: RunConfig,
    rng: np.random.Generator,
) -> PoolState:
    """Uniform random disjoint split into labeled / unlabeled / test; ground
    truth of unlabeled samples moves to the oracle-only hidden map."""
    need = config.labeled_size + config.unlabeled_size + config.test_size
    if len(dataset) < need:
        raise ValueError(
            f"dataset has {len(dataset)} samples, split needs {need}"
        )
    ids = np.asarray(sorted(dataset), dtype=np.int64)
    order = rng.permutation(ids)
    lab = [int(i) for i in order[: config.labeled_size]]
    unl = [int(i) for i in order[config.labeled_size : config.labeled_size + config.unlabeled_size]]
    tst = [int(i) for i in order[config.labeled_size + config.unlabeled_size : need]]
    return PoolState(
        labeled={i: dataset[i] for i in sorted(lab)},
        unlabeled={i: dataset[i][0] for i in sorted(unl)},
        test={i: dataset[i] for i in sorted(tst)},
        hidden_gt={i: dataset[i][1] for i in sorted(unl)},
    )


def _score_pool(pool: PoolState, predictor, config: RunConfig, iteration: int):
    records = []
    for sid in sorted(pool.unlabeled):
        rng = phase_rng(config.seed, iteration, "score", sid)
        mean, variance = mc_predict(predictor, pool.unlabeled[sid], config.mc, rng)
        pred_mask = binarize(mean, config.binarize_threshold)
        score, degenerate = score_sample(variance, pred_mask)
        records.append(
            ScoredSample(
                sample_id=sid,
                raw_score=score.raw,
                degenerate=degenerate,
                mask=pred_mask,
            )
        )
    return records


def _training_samples(pool: PoolState):
    samples = [pool.labeled[i] for i in sorted(pool.labeled)]
    samples += [(pool.unlabeled[i], pool.pseudo[i]) for i in sorted(pool.pseudo)]
    return samples


def run_iteration(
    pool: PoolState, predictor, config: RunConfig, iteration: int
) -> tuple[PoolState, object, IterationRecord]:
    """Advance the loop by one iteration; returns new (pool, predictor, record).

    The input pool is not mutated, so an exception anywhere leaves the
    caller's state exactly as it was.
    """
    started = time.perf_counter()
    work = pool.copy()

    records = _score_pool(work, predictor, config, iteration)
    threshold = pseudo_threshold(config.pseudo, iteration)

    select_rng = phase_rng(config.seed, iteration, "select")
    if config.strategy == "random":
        result = select_uniform(records, config.quotas.total, select_rng)
    else:
        result = select_complementary(
            records, config.quotas, config.pseudo, iteration, select_rng
        )
    apply_selection(work, result)

    train_set = _training_samples(work)
    train_ids = (set(work.labeled) | set(work.pseudo)) & set(work.test)
    if train_ids:
        raise RuntimeError(f"test samples leaked into training: {sorted(train_ids)}")
    base = predictor if config.warm_start else predictor.reinitialized()
    new_predictor = base.train(
        train_set, config.train, phase_rng(config.seed, iteration, "retrain")
    )

    metrics = iteration_metrics(
        work, new_predictor, records, binarize_threshold=config.binarize_threshold
    )
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    record = IterationRecord(
        iteration=iteration,
        n_labeled=metrics.labeled_count,
        n_pseudo=metrics.pseudo_count,
        pseudo_threshold=threshold,
        oracle_no_detect=len(result.no_detection),
        oracle_uncertain=len(result.most_uncertain),
        oracle_random=len(result.random),
        mean_test_dice=metrics.mean_test_dice,
        median_test_dice=metrics.median_test_dice,
        r1=metrics.region_counts[RegionLabel.R1_UNDETECTED],
        r2=metrics.region_counts[RegionLabel.R2_UNCERTAIN_CORRECT],
        r3=metrics.region_counts[RegionLabel.R3_CERTAIN_CORRECT],
        r4=metrics.region_counts[RegionLabel.R4_UNCERTAIN_WRONG],
        elapsed_ms=elapsed_ms,
    )
    logger.info(
        "iteration %d: labeled=%d pseudo=%d mean_dice=%.4f (%.0f ms)",
        iteration, record.n_labeled, record.n_pseudo,
        record.mean_test_dice, elapsed_ms,
    )
    return work, new_predictor, record


def run(
    config: RunConfig,
    dataset: dict[int, tuple[np.ndarray, np.ndarray]],
    predictor_factory=None,
    *,
    collect_final_regions: bool = False,
) -> RunLog:
    """Full run: split, train on the seed set, then config.iterations loops."""
    pool = init_pools(dataset, config, phase_rng(config.seed, 0, "split"))
    if predictor_factory is None:
        predictor = RefPredictor.zeros(dropout_p=config.mc.dropout_p)
    else:
        predictor = predictor_factory()
    seed_samples = _training_samples(pool)
    predictor = predictor.train(
        seed_samples, config.train, phase_rng(config.seed, 0, "seed_train")
    )
    log = RunLog(seed=config.seed)
    for iteration in range(config.iterations):
        try:
            pool, predictor, record = run_iteration(pool, predictor, config, iteration)
        except Exception as exc:
            raise IterationError(iteration, exc) from exc
        log.records.append(record)
    if collect_final_regions:
        final_records = _score_pool(pool, predictor, config, config.iterations)
        log.region_rows = region_table(pool, final_records)
    return log


def runlog_csv_bytes(log: RunLog) -> bytes:
    """Serialize the run log; floats use repr so parsing is lossless."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RUNLOG_CSV_COLUMNS)
    for r in log.records:
        writer.writerow(
            [
                r.iteration,
                r.n_labeled,
                r.n_pseudo,
                repr(r.pseudo_threshold),
                r.oracle_no_detect,
                r.oracle_uncertain,
                r.oracle_random,
                repr(r.mean_test_dice),
                repr(r.median_test_dice),
                r.r1,
                r.r2,
                r.r3,
                r.r4,
                0,  # deterministic log: timing goes to the logger instead
            ]
        )
    return buf.getvalue().encode()


def write_runlog_csv(log: RunLog, path: str | Path) -> None:
    Path(path).write_bytes(runlog_csv_bytes(log))
