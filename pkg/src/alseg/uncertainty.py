"""Pixel-wise predictive uncertainty from repeated stochastic forward passes.

Per-pixel mean and population variance are accumulated in one streaming pass
(Welford update) so the full stack of prediction maps never has to be held
in memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["McConfig", "VarianceAccumulator", "mc_predict"]


@dataclass(frozen=True)
class McConfig:
    """Stochastic-pass settings: number of passes and dropout rate."""

    t_steps: int = 10
    dropout_p: float = 0.5

    def __post_init__(self) -> None:
        if self.t_steps < 2:
            raise ValueError("t_steps must be >= 2")
        if not 0.0 < self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in (0, 1)")


class VarianceAccumulator:
    """Streaming per-pixel moments over a sequence of equally sized maps."""

    def __init__(self, width: int, height: int) -> None:
        if width < 1 or height < 1:
            raise ValueError(f"dimensions must be positive, got {width}x{height}")
        self.width = width
        self.height = height
        self.count = 0
        self._mean = np.zeros((height, width), dtype=np.float64)
        self._m2 = np.zeros((height, width), dtype=np.float64)

    def update(self, p: np.ndarray) -> "VarianceAccumulator":
        p = np.asarray(p, dtype=np.float64)
        if p.shape != (self.height, self.width):
            raise ValueError(
                f"map shape {p.shape} does not match accumulator "
                f"{(self.height, self.width)}"
            )
        self.count += 1
        delta = p - self._mean
        self._mean += delta / self.count
        self._m2 += delta * (p - self._mean)
        return self

    def merge(self, other: "VarianceAccumulator") -> "VarianceAccumulator":
        """Fold another accumulator in (pairwise moment merge)."""
        if (other.width, other.height) != (self.width, self.height):
            raise ValueError("cannot merge accumulators of different dimensions")
        if other.count == 0:
            return self
        if self.count == 0:
            self.count = other.count
            self._mean = other._mean.copy()
            self._m2 = other._m2.copy()
            return self
        total = self.count + other.count
        delta = other._mean - self._mean
        self._m2 += other._m2 + delta * delta * (self.count * other.count / total)
        self._mean += delta * (other.count / total)
        self.count = total
        return self

    def finalize(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (mean map, population variance map); needs >= 2 updates."""
        if self.count < 2:
            raise RuntimeError(
                f"variance needs at least 2 updates, got {self.count}"
            )
        mean = np.clip(self._mean, 0.0, 1.0)
        variance = np.maximum(self._m2, 0.0) / self.count
        return mean, variance


def mc_predict(
    predictor,
    img: np.ndarray,
    cfg: McConfig,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Run cfg.t_steps stochastic passes and reduce them to (mean, variance).

    Each pass draws an independent dropout realization from rng; the result
    is fully determined by the rng state.
    """
    height, width = np.asarray(img).shape
    acc = VarianceAccumulator(width, height)
    for p in predictor.predict_passes(img, cfg.t_steps, cfg.dropout_p, rng):
        acc.update(p)
    if acc.count != cfg.t_steps:
        raise RuntimeError(
            f"predictor produced {acc.count} passes, expected {cfg.t_steps}"
        )
    return acc.finalize()
