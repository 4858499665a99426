"""Stochastic pixel segmenters.

Two implementations of the same contract (train / predict_deterministic /
predict_stochastic / predict_passes):

* RefPredictor, a logistic regression over 9 per-pixel patch features with
  inference-time inverted dropout on the feature vector. One dropout mask is
  drawn per forward pass and shared across all pixels of that pass, so the
  pass-to-pass variation is spatially correlated the way weight-space noise
  would be.
* ExternalPredictor, which shells out to any program speaking the UMAP file
  protocol, so a heavyweight segmentation network can be plugged in without
  touching the engine.
"""

from __future__ import annotations

import json
import shlex
import struct
import subprocess
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = [
    "FEATURE_RADII",
    "N_FEATURES",
    "TrainConfig",
    "RefPredictor",
    "extract_features",
    "ref_predict",
    "ref_train",
    "mean_pixel_loss",
    "save_model",
    "load_model",
    "UmapFormatError",
    "ProtocolError",
    "write_umap",
    "read_umap",
    "external_predict",
    "ExternalPredictor",
]

FEATURE_RADII = (1, 3, 7)
# intensity + (box mean, box stdev) per radius + normalized x + normalized y
N_FEATURES = 1 + 2 * len(FEATURE_RADII) + 2


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 2
    learning_rate: float = 0.1
    augment: bool = True
    batch_size: int = 256
    max_pixels_per_image: int = 4096

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1 or self.max_pixels_per_image < 1:
            raise ValueError("batch_size and max_pixels_per_image must be >= 1")


def _box_mean_std(img: np.ndarray, radius: int) -> tuple[np.ndarray, np.ndarray]:
    """Mean and stdev over (2r+1)^2 windows clamped to the image border."""
    h, w = img.shape
    s1 = np.zeros((h + 1, w + 1), dtype=np.float64)
    s2 = np.zeros((h + 1, w + 1), dtype=np.float64)
    s1[1:, 1:] = img.cumsum(axis=0).cumsum(axis=1)
    s2[1:, 1:] = (img * img).cumsum(axis=0).cumsum(axis=1)
    y = np.arange(h)
    x = np.arange(w)
    y1, y2 = np.clip(y - radius, 0, None), np.clip(y + radius, None, h - 1)
    x1, x2 = np.clip(x - radius, 0, None), np.clip(x + radius, None, w - 1)

    def window_sum(s):
        return (
            s[np.ix_(y2 + 1, x2 + 1)]
            - s[np.ix_(y1, x2 + 1)]
            - s[np.ix_(y2 + 1, x1)]
            + s[np.ix_(y1, x1)]
        )

    area = (y2 - y1 + 1)[:, None] * (x2 - x1 + 1)[None, :]
    mean = window_sum(s1) / area
    var = np.clip(window_sum(s2) / area - mean * mean, 0.0, None)
    return mean, np.sqrt(var)


def extract_features(img: np.ndarray) -> np.ndarray:
    """Per-pixel feature grid of shape (h, w, N_FEATURES), all values in [0, 1]."""
    img = np.asarray(img, dtype=np.float64)
    h, w = img.shape
    out = np.empty((h, w, N_FEATURES), dtype=np.float64)
    out[..., 0] = img
    col = 1
    for radius in FEATURE_RADII:
        mean, std = _box_mean_std(img, radius)
        out[..., col] = mean
        out[..., col + 1] = std
        col += 2
    xs = np.arange(w, dtype=np.float64) / (w - 1) if w > 1 else np.zeros(w)
    ys = np.arange(h, dtype=np.float64) / (h - 1) if h > 1 else np.zeros(h)
    out[..., col] = xs[None, :]
    out[..., col + 1] = ys[:, None]
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class RefPredictor:
    """Per-pixel logistic classifier; weights = N_FEATURES coefficients + bias."""

    weights: np.ndarray
    dropout_p: float = 0.5

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (N_FEATURES + 1,):
            raise ValueError(f"weights must have shape ({N_FEATURES + 1},)")
        if not np.isfinite(w).all():
            raise ValueError("weights must be finite")
        if not 0.0 < self.dropout_p < 1.0:
            raise ValueError("dropout_p must be in (0, 1)")
        object.__setattr__(self, "weights", w)

    @classmethod
    def zeros(cls, dropout_p: float = 0.5) -> "RefPredictor":
        return cls(weights=np.zeros(N_FEATURES + 1), dropout_p=dropout_p)

    def reinitialized(self) -> "RefPredictor":
        return RefPredictor.zeros(self.dropout_p)

    def train(self, samples, cfg: TrainConfig, rng: np.random.Generator):
        return ref_train(self, samples, cfg, rng)

    def predict_deterministic(self, img: np.ndarray) -> np.ndarray:
        return ref_predict(self, img, dropout_on=False)

    def predict_stochastic(
        self, img: np.ndarray, rng: np.random.Generator
    ) -> np.ndarray:
        return ref_predict(self, img, dropout_on=True, rng=rng)

    def predict_passes(self, img, t_steps, dropout_p, rng):
        feats = extract_features(img)
        return [
            ref_predict(
                self, img, dropout_on=True, rng=rng,
                dropout_p=dropout_p, features=feats,
            )
            for _ in range(t_steps)
        ]


def ref_predict(
    model: RefPredictor,
    img: np.ndarray,
    dropout_on: bool = False,
    rng: np.random.Generator | None = None,
    *,
    dropout_p: float | None = None,
    features: np.ndarray | None = None,
) -> np.ndarray:
    """Per-pixel sigmoid(w . f + b), optionally with one inverted-dropout mask.

    With dropout on, each feature (never the bias) is zeroed independently
    with probability dropout_p and survivors are scaled by 1/(1-dropout_p);
    the mask is drawn once and shared across all pixels of the pass.
    """
    feats = extract_features(img) if features is None else features
    h, w, _ = feats.shape
    coeffs = model.weights[:N_FEATURES]
    bias = model.weights[N_FEATURES]
    if dropout_on:
        if rng is None:
            raise ValueError("dropout_on requires an rng")
        p = model.dropout_p if dropout_p is None else dropout_p
        keep = rng.random(N_FEATURES) >= p
        coeffs = coeffs * keep / (1.0 - p)
    z = feats.reshape(-1, N_FEATURES) @ coeffs + bias
    return _sigmoid(z).reshape(h, w)


def _augmented(samples):
    out = []
    for img, mask in samples:
        out.append((img, mask))
        out.append((np.fliplr(img), np.fliplr(mask)))
        out.append((np.flipud(img), np.flipud(mask)))
        out.append((np.flipud(np.fliplr(img)), np.flipud(np.fliplr(mask))))
    return out


def _subsample(labels: np.ndarray, cap: int, rng: np.random.Generator) -> np.ndarray:
    """Pixel indices for one image: everything if it fits, else a class-balanced
    draw (50/50 foreground/background when both classes are plentiful)."""
    n = labels.size
    if n <= cap:
        return np.arange(n)
    fg = np.nonzero(labels > 0.5)[0]
    bg = np.nonzero(labels <= 0.5)[0]
    half = cap // 2
    n_fg = min(fg.size, half)
    n_bg = min(bg.size, cap - n_fg)
    n_fg = min(fg.size, cap - n_bg)
    return np.concatenate(
        (rng.permutation(fg)[:n_fg], rng.permutation(bg)[:n_bg])
    )


def ref_train(
    model: RefPredictor,
    samples,
    cfg: TrainConfig,
    rng: np.random.Generator,
) -> RefPredictor:
    """SGD on mean pixel cross-entropy over shuffled pixel batches.

    Training starts from the given model's weights (warm start is the
    caller's choice of starting model) and is deterministic given rng.
    """
    samples = list(samples)
    if not samples:
        raise ValueError("samples must be non-empty")
    train_set = _augmented(samples) if cfg.augment else samples
    feats = [extract_features(img).reshape(-1, N_FEATURES) for img, _ in train_set]
    labels = [
        np.asarray(mask, dtype=np.float64).reshape(-1) for _, mask in train_set
    ]
    weights = model.weights.copy()
    lr = cfg.learning_rate
    for _ in range(cfg.epochs):
        xs, ys = [], []
        for f, lab in zip(feats, labels):
            idx = _subsample(lab, cfg.max_pixels_per_image, rng)
            xs.append(f[idx])
            ys.append(lab[idx])
        x = np.concatenate(xs)
        y = np.concatenate(ys)
        order = rng.permutation(y.size)
        for start in range(0, y.size, cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            xb, yb = x[batch], y[batch]
            g = _sigmoid(xb @ weights[:N_FEATURES] + weights[N_FEATURES]) - yb
            weights[:N_FEATURES] -= lr * (xb.T @ g) / batch.size
            weights[N_FEATURES] -= lr * g.mean()
    return replace(model, weights=weights)


def mean_pixel_loss(model: RefPredictor, samples) -> float:
    """Mean cross-entropy over every pixel of the given samples."""
    total, count = 0.0, 0
    for img, mask in samples:
        p = np.clip(model.predict_deterministic(img), 1e-12, 1.0 - 1e-12)
        y = np.asarray(mask, dtype=np.float64)
        total += float(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)).sum())
        count += y.size
    return total / count


def save_model(model: RefPredictor, path: str | Path) -> None:
    payload = {"weights": model.weights.tolist(), "dropout_p": model.dropout_p}
    Path(path).write_text(json.dumps(payload))


def load_model(path: str | Path) -> RefPredictor:
    payload = json.loads(Path(path).read_text())
    return RefPredictor(
        weights=np.asarray(payload["weights"], dtype=np.float64),
        dropout_p=float(payload["dropout_p"]),
    )


# --- UMAP float-map file format -------------------------------------------
#
# magic b"UMAP", then width and height as uint32 little-endian, then
# width*height float32 little-endian values, row-major. A w x h map is
# exactly 12 + 4*w*h bytes.

_UMAP_MAGIC = b"UMAP"


class UmapFormatError(ValueError):
    """A UMAP byte stream violates the float-map format."""


class ProtocolError(RuntimeError):
    """An external predictor broke the file/exit-code contract."""


def write_umap(arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.ndim != 2 or arr.size == 0:
        raise ValueError(f"map must be a non-empty 2-D grid, got shape {arr.shape}")
    h, w = arr.shape
    header = _UMAP_MAGIC + struct.pack("<II", w, h)
    return header + arr.astype("<f4").tobytes(order="C")


def read_umap(data: bytes) -> np.ndarray:
    """Decode a UMAP stream; float32 payload is upcast losslessly to float64."""
    if len(data) < 12:
        raise UmapFormatError(f"stream too short for header: {len(data)} bytes")
    if data[:4] != _UMAP_MAGIC:
        raise UmapFormatError(f"bad magic {data[:4]!r}")
    w, h = struct.unpack("<II", data[4:12])
    if w < 1 or h < 1:
        raise UmapFormatError(f"width/height must be positive, got {w}x{h}")
    expected = 12 + 4 * w * h
    if len(data) != expected:
        raise UmapFormatError(
            f"expected {expected} bytes for {w}x{h} map, got {len(data)}"
        )
    return np.frombuffer(data[12:], dtype="<f4").reshape(h, w).astype(np.float64)


def external_predict(
    cmd: str,
    img_path: str | Path,
    t_steps: int,
    dropout_p: float,
    workdir: str | Path,
    seed: int = 0,
) -> list[np.ndarray]:
    """Invoke an external predictor once and collect its T probability maps.

    The command is run as: <cmd...> <input.pgm> <outdir> <T> <p_d> <seed> and
    must leave pass_000.umap .. pass_{T-1:03d}.umap in <outdir>, each holding
    values in [0, 1].
    """
    workdir = Path(workdir)
    args = shlex.split(cmd) + [
        str(img_path),
        str(workdir),
        str(t_steps),
        str(dropout_p),
        str(seed),
    ]
    proc = subprocess.run(args, capture_output=True, text=True)
    if proc.returncode != 0:
        tail = proc.stderr.strip().splitlines()[-1:] or [""]
        raise ProtocolError(
            f"external predictor exited {proc.returncode}: {tail[0]}"
        )
    maps: list[np.ndarray] = []
    shape = None
    for i in range(t_steps):
        path = workdir / f"pass_{i:03d}.umap"
        if not path.exists():
            raise ProtocolError(f"pass {i}: missing file {path.name}")
        try:
            m = read_umap(path.read_bytes())
        except UmapFormatError as exc:
            raise ProtocolError(f"pass {i}: {exc}") from exc
        if not ((m >= 0.0) & (m <= 1.0)).all():
            raise ProtocolError(f"pass {i}: values outside [0, 1]")
        if shape is None:
            shape = m.shape
        elif m.shape != shape:
            raise ProtocolError(
                f"pass {i}: shape {m.shape} differs from pass 0 shape {shape}"
            )
        maps.append(m)
    return maps


class ExternalPredictor:
    """Adapter that satisfies the predictor contract via the file protocol.

    The external model is treated as frozen: train() is a no-op, so active
    learning runs with it exercise selection and logging only.
    """

    def __init__(self, cmd: str, workdir: str | Path, dropout_p: float = 0.5) -> None:
        self.cmd = cmd
        self.workdir = Path(workdir)
        self.dropout_p = dropout_p
        self._calls = 0

    def _invoke(self, img, t_steps, dropout_p, seed):
        from .imaging import write_pgm

        call_dir = self.workdir / f"call_{self._calls:06d}"
        self._calls += 1
        call_dir.mkdir(parents=True, exist_ok=True)
        img_path = call_dir / "input.pgm"
        img_path.write_bytes(write_pgm(img))
        return external_predict(self.cmd, img_path, t_steps, dropout_p, call_dir, seed)

    def train(self, samples, cfg, rng):
        return self

    def predict_deterministic(self, img: np.ndarray) -> np.ndarray:
        return self._invoke(img, 1, 0.0, 0)[0]

    def predict_stochastic(self, img, rng) -> np.ndarray:
        seed = int(rng.integers(0, 2**32))
        return self._invoke(img, 1, self.dropout_p, seed)[0]

    def predict_passes(self, img, t_steps, dropout_p, rng):
        seed = int(rng.integers(0, 2**32))
        return self._invoke(img, t_steps, dropout_p, seed)
