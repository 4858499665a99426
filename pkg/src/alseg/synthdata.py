"""Deterministic synthetic lesion dataset: elliptic foreground blobs on a
noisy background, with sub-threshold distractor bumps so that a learner can
produce false and missed detections.

Every sample is fully determined by (seed, sample_id), so generation is
order-independent and reproducible across runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import read_mask_pgm, read_pgm, write_mask_pgm, write_pgm

__all__ = [
    "SynthParams",
    "sample_rng",
    "generate_sample",
    "generate_samples",
    "generate_dataset",
    "load_dataset",
]

# Distractor bump peak amplitude, as a fraction of the fg/bg contrast. Kept
# strictly below 0.5 so midpoint thresholding of a noise-free image always
# recovers the exact mask.
_DISTRACTOR_AMP = (0.25, 0.45)


@dataclass(frozen=True)
class SynthParams:
    image_size: int = 32
    min_axis: float = 3.0
    max_axis: float = 9.0
    fg_level: float = 0.7
    bg_level: float = 0.3
    noise_sigma: float = 0.08
    distractor_count: int = 3
    empty_fraction: float = 0.15

    def __post_init__(self) -> None:
        if self.image_size < 1:
            raise ValueError("image_size must be >= 1")
        if not 0 < self.min_axis <= self.max_axis:
            raise ValueError("need 0 < min_axis <= max_axis")
        if self.max_axis >= self.image_size / 2:
            raise ValueError("max_axis must be < image_size / 2")
        if self.fg_level == self.bg_level:
            raise ValueError("fg_level and bg_level must differ")
        for name in ("fg_level", "bg_level"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.distractor_count < 0:
            raise ValueError("distractor_count must be >= 0")
        if not 0.0 <= self.empty_fraction <= 1.0:
            raise ValueError("empty_fraction must be in [0, 1]")


def sample_rng(seed: int, sample_id: int) -> np.random.Generator:
    """Generator for one sample, derived from (seed, sample_id)."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(sample_id,)))


def _box_muller(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    """Standard normal field from the generator's uniforms via Box-Muller."""
    n = shape[0] * shape[1]
    pairs = (n + 1) // 2
    u1 = 1.0 - rng.random(pairs)  # (0, 1], keeps log finite
    u2 = rng.random(pairs)
    r = np.sqrt(-2.0 * np.log(u1))
    z = np.concatenate((r * np.cos(2.0 * np.pi * u2), r * np.sin(2.0 * np.pi * u2)))
    return z[:n].reshape(shape)


def generate_sample(
    params: SynthParams, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw one (image, mask) pair.

    The mask is the exact rendered ellipse (or all-zero with probability
    empty_fraction). The image is bg_level outside, fg_level inside, plus
    distractor bumps and clamped Gaussian noise.
    """
    size = params.image_size
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    mask = np.zeros((size, size), dtype=np.uint8)

    if rng.random() >= params.empty_fraction:
        a = rng.uniform(params.min_axis, params.max_axis)
        b = rng.uniform(params.min_axis, params.max_axis)
        theta = rng.uniform(0.0, math.pi)
        margin = max(a, b)
        lo, hi = margin, size - 1 - margin
        if lo <= hi:
            cx = rng.uniform(lo, hi)
            cy = rng.uniform(lo, hi)
        else:
            cx = cy = (size - 1) / 2.0
        dx, dy = xs - cx, ys - cy
        u = dx * math.cos(theta) + dy * math.sin(theta)
        v = -dx * math.sin(theta) + dy * math.cos(theta)
        mask = ((u / a) ** 2 + (v / b) ** 2 <= 1.0).astype(np.uint8)

    bumps = np.zeros((size, size), dtype=np.float64)
    for _ in range(params.distractor_count):
        bx = rng.uniform(0.0, size - 1)
        by = rng.uniform(0.0, size - 1)
        radius = rng.uniform(max(1.0, 0.5 * params.min_axis), max(1.5, params.min_axis))
        amp = rng.uniform(*_DISTRACTOR_AMP)
        r2 = ((xs - bx) ** 2 + (ys - by) ** 2) / radius**2
        bumps = np.maximum(bumps, amp * np.clip(1.0 - r2, 0.0, None))

    level = np.maximum(mask.astype(np.float64), bumps)
    img = params.bg_level + (params.fg_level - params.bg_level) * level
    if params.noise_sigma > 0:
        img = img + params.noise_sigma * _box_muller(rng, (size, size))
    return np.clip(img, 0.0, 1.0), mask


def generate_samples(
    n: int, params: SynthParams, seed: int
) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """In-memory dataset: ids 0..n-1 mapped to (image, mask)."""
    return {i: generate_sample(params, sample_rng(seed, i)) for i in range(n)}


def generate_dataset(n: int, params: SynthParams, seed: int, out_dir: str | Path) -> Path:
    """Write n image/mask PGM pairs plus a manifest; returns the manifest path.

    Files are img_%05d.pgm / msk_%05d.pgm; the manifest lists one sample id
    per line, ascending. Output bytes depend only on (n, params, seed).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = []
    for i in range(n):
        img, mask = generate_sample(params, sample_rng(seed, i))
        (out / f"img_{i:05d}.pgm").write_bytes(write_pgm(img))
        (out / f"msk_{i:05d}.pgm").write_bytes(write_mask_pgm(mask))
        ids.append(i)
    manifest = out / "manifest.txt"
    manifest.write_text("".join(f"{i}\n" for i in ids))
    return manifest


def load_dataset(directory: str | Path) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Read a generated (or identically laid out) dataset directory."""
    root = Path(directory)
    manifest = root / "manifest.txt"
    data: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    for line in manifest.read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        i = int(line)
        img = read_pgm((root / f"img_{i:05d}.pgm").read_bytes())
        mask = read_mask_pgm((root / f"msk_{i:05d}.pgm").read_bytes())
        data[i] = (img, mask)
    return data
