"""Sample pool bookkeeping for the active learning loop.

The pool partitions sample ids into labeled / unlabeled / test. Ground truth
for unlabeled samples lives in hidden_gt and is handed out only through
oracle_label, which also counts the query against the human-annotation
budget. Pseudo marks are transient per-iteration training targets attached
to unlabeled samples.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["ConsistencyError", "PoolState", "oracle_label"]


class ConsistencyError(RuntimeError):
    """Pool bookkeeping was asked to do something its invariants forbid."""


@dataclass
class PoolState:
    labeled: dict[int, tuple[np.ndarray, np.ndarray]]
    unlabeled: dict[int, np.ndarray]
    test: dict[int, tuple[np.ndarray, np.ndarray]]
    hidden_gt: dict[int, np.ndarray]
    pseudo: dict[int, np.ndarray] = field(default_factory=dict)
    oracle_queries: int = 0

    def copy(self) -> "PoolState":
        """Structural copy; pixel arrays are shared and treated as immutable."""
        return PoolState(
            labeled=dict(self.labeled),
            unlabeled=dict(self.unlabeled),
            test=dict(self.test),
            hidden_gt=dict(self.hidden_gt),
            pseudo=dict(self.pseudo),
            oracle_queries=self.oracle_queries,
        )

    @property
    def all_ids(self) -> set[int]:
        return set(self.labeled) | set(self.unlabeled) | set(self.test)

    def validate(self) -> None:
        a, b, c = set(self.labeled), set(self.unlabeled), set(self.test)
        if a & b or a & c or b & c:
            raise ConsistencyError("labeled/unlabeled/test ids are not disjoint")
        if set(self.hidden_gt) != b:
            raise ConsistencyError("hidden_gt keys must equal the unlabeled ids")
        if not set(self.pseudo) <= b:
            raise ConsistencyError("pseudo marks must sit on unlabeled samples")


def oracle_label(pool: PoolState, sample_id: int) -> np.ndarray:
    """Reveal the ground-truth mask of an unlabeled sample (one paid query)."""
    if sample_id not in pool.unlabeled:
        raise ConsistencyError(f"sample {sample_id} is not in the unlabeled pool")
    pool.oracle_queries += 1
    return pool.hidden_gt[sample_id]
