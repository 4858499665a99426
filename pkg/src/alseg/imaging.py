"""Raster primitives: grayscale images, binary masks, PGM I/O, contours.

All grids are numpy arrays of shape (height, width), row-major. Grayscale
images and probability maps hold float64 values in [0, 1]; binary masks hold
uint8 values in {0, 1}.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "PgmFormatError",
    "read_pgm",
    "write_pgm",
    "read_mask_pgm",
    "write_mask_pgm",
    "binarize",
    "extract_contour",
]


class PgmFormatError(ValueError):
    """A PGM byte stream violates the binary P5 format."""


def _next_token(data: bytes, pos: int, field: str) -> tuple[bytes, int]:
    while pos < len(data) and data[pos : pos + 1].isspace():
        pos += 1
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise PgmFormatError(f"missing {field} in header")
    return data[start:pos], pos


def _int_token(data: bytes, pos: int, field: str) -> tuple[int, int]:
    token, pos = _next_token(data, pos, field)
    try:
        value = int(token)
    except ValueError:
        raise PgmFormatError(f"{field} is not an integer: {token!r}") from None
    return value, pos


def read_pgm(data: bytes) -> np.ndarray:
    """Decode a binary PGM (P5, maxval 255) into a float image in [0, 1].

    Pixel byte v maps to v / 255. The stream must contain exactly the header
    plus width*height payload bytes.
    """
    magic, pos = _next_token(data, 0, "magic")
    if magic != b"P5":
        raise PgmFormatError(f"magic must be b'P5', got {magic!r}")
    width, pos = _int_token(data, pos, "width")
    height, pos = _int_token(data, pos, "height")
    if width < 1 or height < 1:
        raise PgmFormatError(f"width/height must be positive, got {width}x{height}")
    maxval, pos = _int_token(data, pos, "maxval")
    if maxval != 255:
        raise PgmFormatError(f"maxval must be 255, got {maxval}")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise PgmFormatError("missing single whitespace before pixel data")
    pos += 1
    payload = data[pos:]
    expected = width * height
    if len(payload) < expected:
        raise PgmFormatError(
            f"pixel data truncated: expected {expected} bytes, got {len(payload)}"
        )
    if len(payload) > expected:
        raise PgmFormatError(
            f"trailing data after pixels: expected {expected} bytes, got {len(payload)}"
        )
    raw = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return raw.astype(np.float64) / 255.0


def write_pgm(img: np.ndarray) -> bytes:
    """Encode a float image in [0, 1] as binary PGM; v encodes as round(v*255)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise ValueError(f"image must be a non-empty 2-D grid, got shape {img.shape}")
    if not np.isfinite(img).all() or img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("image values must be finite and within [0, 1]")
    height, width = img.shape
    header = b"P5\n%d %d\n255\n" % (width, height)
    payload = np.rint(img * 255.0).astype(np.uint8).tobytes()
    return header + payload


def write_mask_pgm(mask: np.ndarray) -> bytes:
    """Encode a {0,1} mask as PGM with the 0 -> 0, 1 -> 255 convention."""
    return write_pgm(np.asarray(mask, dtype=np.float64))


def read_mask_pgm(data: bytes) -> np.ndarray:
    """Decode a PGM written by write_mask_pgm back into a {0,1} mask."""
    return binarize(read_pgm(data), 0.5)


def binarize(p: np.ndarray, threshold: float) -> np.ndarray:
    """Threshold a probability map: output 1 exactly where p >= threshold."""
    if not 0.0 <= threshold <= 1.0:
        raise ValueError(f"threshold must be in [0, 1], got {threshold}")
    return (np.asarray(p) >= threshold).astype(np.uint8)


def extract_contour(mask: np.ndarray) -> np.ndarray:
    """Foreground-side contour under 4-connectivity.

    A pixel is contour iff it is foreground and has a background 4-neighbor,
    where anything beyond the image border counts as background.
    """
    m = np.asarray(mask)
    padded = np.zeros((m.shape[0] + 2, m.shape[1] + 2), dtype=np.uint8)
    padded[1:-1, 1:-1] = m != 0
    fg = padded[1:-1, 1:-1] == 1
    has_bg_neighbor = (
        (padded[:-2, 1:-1] == 0)
        | (padded[2:, 1:-1] == 0)
        | (padded[1:-1, :-2] == 0)
        | (padded[1:-1, 2:] == 0)
    )
    return (fg & has_bg_neighbor).astype(np.uint8)
