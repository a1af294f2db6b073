"""Grayscale image and label-map carriers with PGM / raw-label file IO.

Binary PGM (``P5``, maxval 255) is the canonical on-disk format. ASCII PGM
(``P2``) is accepted on read so small fixtures can be written by hand.

Label maps are stored either as a visualization PGM (``label_map_to_image``)
or losslessly as a raw label file::

    b"LBL\\n<width> <height>\\n<k>\\n" + width*height bytes of label indices

Feature grids use a flat little-endian float64 layout preceded by a 16-byte
header holding width and height as little-endian uint64.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "GrayImage",
    "LabelMap",
    "PgmError",
    "read_pgm",
    "write_pgm",
    "label_map_to_image",
    "image_to_label_map",
    "read_labels",
    "write_labels",
    "write_grid",
    "read_grid",
    "grid_to_image",
]

_WS = b" \t\n\r\v\f"
_LABEL_MAGIC = b"LBL"


class PgmError(ValueError):
    """Malformed image file; ``offset`` is the byte position of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True, eq=False)
class GrayImage:
    """8-bit grayscale image, pixels stored as a (height, width) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"grayscale image must be 2-D, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError(f"image dimensions must be positive, got {px.shape}")
        if px.dtype != np.uint8:
            if not np.issubdtype(px.dtype, np.integer):
                raise ValueError(f"gray levels must be integers, got dtype {px.dtype}")
            if px.min() < 0 or px.max() > 255:
                raise ValueError("gray levels must lie in [0, 255]")
            px = px.astype(np.uint8)
        px = np.ascontiguousarray(px)
        px.setflags(write=False)
        object.__setattr__(self, "pixels", px)

    @classmethod
    def from_sequence(cls, width: int, height: int, values) -> "GrayImage":
        values = np.asarray(values)
        if values.size != width * height:
            raise ValueError(f"expected {width * height} pixels, got {values.size}")
        return cls(values.reshape(height, width))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape

    def __eq__(self, other):
        if not isinstance(other, GrayImage):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.pixels, other.pixels))

    def __repr__(self):
        return f"GrayImage(width={self.width}, height={self.height})"


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel class indices in ``[0, k-1]``, stored as a (height, width) array."""

    labels: np.ndarray
    k: int = field(default=0)

    def __post_init__(self):
        lab = np.asarray(self.labels)
        if lab.ndim != 2 or lab.shape[0] < 1 or lab.shape[1] < 1:
            raise ValueError(f"label map must be a non-empty 2-D grid, got shape {lab.shape}")
        if not np.issubdtype(lab.dtype, np.integer):
            raise ValueError(f"labels must be integers, got dtype {lab.dtype}")
        k = int(self.k) if self.k else int(lab.max()) + 1
        if k < 1 or k > 256:
            raise ValueError(f"k must be in [1, 256], got {k}")
        if lab.min() < 0 or lab.max() >= k:
            raise ValueError(f"labels must lie in [0, {k - 1}]")
        lab = np.ascontiguousarray(lab, dtype=np.uint8)
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)
        object.__setattr__(self, "k", k)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    def __eq__(self, other):
        if not isinstance(other, LabelMap):
            return NotImplemented
        return (
            self.k == other.k
            and self.shape == other.shape
            and bool(np.array_equal(self.labels, other.labels))
        )

    def __repr__(self):
        return f"LabelMap(width={self.width}, height={self.height}, k={self.k})"


def _skip_ws_and_comments(data: bytes, pos: int) -> int:
    n = len(data)
    while pos < n:
        c = data[pos : pos + 1]
        if c in _WS and c:
            pos += 1
        elif c == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        else:
            break
    return pos


def _read_int(data: bytes, pos: int, what: str) -> tuple[int, int]:
    pos = _skip_ws_and_comments(data, pos)
    m = re.compile(rb"\d+").match(data, pos)
    if m is None:
        if pos >= len(data):
            raise PgmError(f"unexpected end of header while reading {what}", pos)
        raise PgmError(f"expected an integer for {what}", pos)
    return int(m.group()), m.end()


def read_pgm(data: bytes) -> GrayImage:
    """Parse a binary (P5) or ASCII (P2) PGM with maxval <= 255."""
    data = bytes(data)
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        if magic in (b"P3", b"P6"):
            raise PgmError("color PPM images are not supported", 0)
        raise PgmError(f"bad magic number {magic!r}", 0)
    pos = 2
    width, pos = _read_int(data, pos, "width")
    height, pos = _read_int(data, pos, "height")
    if width < 1 or height < 1:
        raise PgmError(f"non-positive dimensions {width}x{height}", pos)
    maxval_start = _skip_ws_and_comments(data, pos)
    maxval, pos = _read_int(data, pos, "maxval")
    if maxval < 1 or maxval > 255:
        raise PgmError(f"maxval {maxval} outside [1, 255]", maxval_start)
    n = width * height

    if magic == b"P5":
        if pos >= len(data) or data[pos : pos + 1] not in _WS:
            raise PgmError("missing whitespace after maxval", pos)
        start = pos + 1
        payload = data[start : start + n]
        if len(payload) < n:
            raise PgmError(
                f"truncated pixel data: expected {n} bytes, found {len(payload)}",
                start + len(payload),
            )
        px = np.frombuffer(payload, dtype=np.uint8)
        if px.max() > maxval:
            bad = int(np.argmax(px > maxval))
            raise PgmError(f"pixel value {px[bad]} exceeds maxval {maxval}", start + bad)
        return GrayImage(px.reshape(height, width).copy())

    values = []
    for _ in range(n):
        value_start = _skip_ws_and_comments(data, pos)
        if value_start >= len(data):
            raise PgmError(
                f"truncated pixel data: expected {n} values, found {len(values)}", value_start
            )
        v, pos = _read_int(data, pos, "pixel value")
        if v > maxval:
            raise PgmError(f"pixel value {v} exceeds maxval {maxval}", value_start)
        values.append(v)
    return GrayImage(np.array(values, dtype=np.uint8).reshape(height, width))


def write_pgm(img: GrayImage) -> bytes:
    """Canonical binary PGM: ``P5``, single newline separators, maxval 255."""
    header = b"P5\n%d %d\n255\n" % (img.width, img.height)
    return header + img.pixels.tobytes()


def _label_levels(k: int) -> np.ndarray:
    if k == 1:
        return np.zeros(1, dtype=np.uint8)
    i = np.arange(k, dtype=np.int64)
    # round-half-up of 255*i/(k-1) in exact integer arithmetic
    return ((2 * 255 * i + (k - 1)) // (2 * (k - 1))).astype(np.uint8)


def label_map_to_image(lm: LabelMap) -> GrayImage:
    """Spread labels over the gray range: label i -> round(255*i/(k-1))."""
    return GrayImage(_label_levels(lm.k)[lm.labels])


def image_to_label_map(img: GrayImage, k: int) -> LabelMap:
    """Invert :func:`label_map_to_image` for a known class count."""
    levels = _label_levels(k)
    lut = np.full(256, -1, dtype=np.int16)
    lut[levels] = np.arange(k)
    lab = lut[img.pixels]
    if (lab < 0).any():
        bad = sorted(set(img.pixels[lab < 0].tolist()))[:5]
        raise ValueError(f"gray levels {bad} are not valid label levels for k={k}")
    return LabelMap(lab.astype(np.uint8), k)


def write_labels(lm: LabelMap) -> bytes:
    header = _LABEL_MAGIC + b"\n%d %d\n%d\n" % (lm.width, lm.height, lm.k)
    return header + lm.labels.tobytes()


def read_labels(data: bytes) -> LabelMap:
    data = bytes(data)
    if data[:3] != _LABEL_MAGIC:
        raise PgmError(f"bad label-file magic {data[:3]!r}", 0)
    width, pos = _read_int(data, 3, "width")
    height, pos = _read_int(data, pos, "height")
    k, pos = _read_int(data, pos, "k")
    start = pos + 1
    n = width * height
    payload = data[start : start + n]
    if len(payload) < n:
        raise PgmError("truncated label data", start + len(payload))
    lab = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    if lab.size and lab.max() >= k:
        raise PgmError(f"label {lab.max()} out of range for k={k}", start + int(np.argmax(lab >= k)))
    return LabelMap(lab.copy(), k)


def write_grid(grid: np.ndarray) -> bytes:
    """Serialize a real-valued feature grid (16-byte header + float64 LE data)."""
    grid = np.asarray(grid, dtype="<f8")
    h, w = grid.shape
    return struct.pack("<QQ", w, h) + np.ascontiguousarray(grid).tobytes()


def read_grid(data: bytes) -> np.ndarray:
    if len(data) < 16:
        raise PgmError("truncated grid header", len(data))
    w, h = struct.unpack_from("<QQ", data, 0)
    n = w * h
    if len(data) - 16 < 8 * n:
        raise PgmError("truncated grid data", len(data))
    return np.frombuffer(data, dtype="<f8", count=n, offset=16).reshape(h, w).astype(np.float64)


def grid_to_image(grid: np.ndarray, lo: float | None = None, hi: float | None = None) -> GrayImage:
    """Linearly rescale a feature grid to 0..255 for viewing."""
    grid = np.asarray(grid, dtype=np.float64)
    lo = float(grid.min()) if lo is None else lo
    hi = float(grid.max()) if hi is None else hi
    if hi <= lo:
        return GrayImage(np.zeros(grid.shape, dtype=np.uint8))
    scaled = np.clip((grid - lo) / (hi - lo), 0.0, 1.0) * 255.0
    return GrayImage(np.rint(scaled).astype(np.uint8))
