"""Ground-truthed phantoms, noise injection and region/contour error scoring."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.optimize import linear_sum_assignment

from .gmm import rng_stream
from .images import GrayImage, LabelMap

__all__ = [
    "Layout",
    "Phantom",
    "NoiseKind",
    "NoiseSpec",
    "SegReport",
    "Comparison",
    "make_phantom",
    "add_noise",
    "contour_mask",
    "score",
    "align_labels",
    "run_comparison",
    "format_table",
]

MIN_CLASS_FRACTION = 0.05
EXHAUSTIVE_MAX_K = 6


class Layout(str, Enum):
    BANDS = "bands"
    DISKS = "disks"
    FINE_STRUCTURES = "fine_structures"


@dataclass(frozen=True)
class Phantom:
    image: GrayImage
    truth: LabelMap
    class_levels: tuple


class NoiseKind(str, Enum):
    ADDITIVE_GAUSSIAN = "additive_gaussian"
    IMPULSE = "impulse"


@dataclass(frozen=True)
class NoiseSpec:
    """``amount`` is the noise std as a fraction of 255 (additive) or the
    fraction of pixels replaced (impulse)."""

    kind: NoiseKind = NoiseKind.IMPULSE
    amount: float = 0.05
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if not 0.0 <= self.amount <= 1.0:
            raise ValueError(f"noise amount must lie in [0, 1], got {self.amount}")


def _draw_stroke(canvas, y0, x0, y1, x1, width, value):
    h, w = canvas.shape
    length = max(abs(y1 - y0), abs(x1 - x0))
    t = np.linspace(0.0, 1.0, int(np.ceil(length * 4)) + 2)
    ys = np.rint(y0 + t * (y1 - y0)).astype(int)
    xs = np.rint(x0 + t * (x1 - x0)).astype(int)
    pts = {(y, x) for y, x in zip(ys, xs)}
    if width == 2:
        # thicken across the dominant direction
        step = (0, 1) if abs(y1 - y0) >= abs(x1 - x0) else (1, 0)
        pts |= {(y + step[0], x + step[1]) for y, x in pts}
    for y, x in pts:
        if 0 <= y < h and 0 <= x < w:
            canvas[y, x] = value


def _disks(h, w, k, rng):
    s = min(h, w)
    cy = (h - 1) / 2 + rng.uniform(-0.05, 0.05) * s
    cx = (w - 1) / 2 + rng.uniform(-0.05, 0.05) * s
    rmax = 0.42 * s
    yy, xx = np.mgrid[0:h, 0:w]
    r2 = (yy - cy) ** 2 + (xx - cx) ** 2
    truth = np.zeros((h, w), dtype=np.uint8)
    # equal-area rings, outermost first
    for i in range(1, k):
        radius = rmax * np.sqrt((k - i) / (k - 1))
        truth[r2 <= radius * radius] = i
    return truth


def _fine_structures(h, w, k, rng):
    truth = np.zeros((h, w), dtype=np.uint8)
    yy, xx = np.mgrid[0:h, 0:w]
    s = min(h, w)
    # class 1: a large blob, lower left
    cy, cx, r = 0.62 * h, 0.34 * w, 0.27 * s
    truth[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = 1
    # classes 2..k-1: side-by-side blocks, upper right
    if k > 2:
        y0, y1 = int(0.1 * h), int(0.42 * h)
        edges = np.linspace(0.58 * w, 0.92 * w, k - 1).astype(int)
        for i in range(2, k):
            truth[y0:y1, edges[i - 2] : edges[i - 1]] = i
    # thin strokes ("branches"), alternating 1 and 2 pixels wide
    for j in range(8):
        width = 1 + j % 2
        if j < 6:
            value = 1 + (j // 2) % (k - 1)
            if j % 3:
                y0, x0 = rng.uniform(0.05, 0.45) * h, rng.uniform(0.05, 0.5) * w
            else:
                y0, x0 = rng.uniform(0.55, 0.95) * h, rng.uniform(0.62, 0.95) * w
        else:
            value = 0  # dark branches crossing the blob
            y0, x0 = cy + rng.uniform(-0.5, 0.5) * r, cx + rng.uniform(-0.5, 0.5) * r
        angle = rng.uniform(0, np.pi)
        length = rng.uniform(0.25, 0.4) * s
        _draw_stroke(truth, y0, x0, y0 + length * np.sin(angle), x0 + length * np.cos(angle), width, value)
    return truth


def make_phantom(width: int, height: int, class_levels, layout=Layout.BANDS, seed: int = 0) -> Phantom:
    """Piecewise-constant test image with its exact label map.

    ``bands`` stacks K horizontal bands; ``disks`` nests K-1 equal-area disks
    in a background; ``fine_structures`` adds 1-2 pixel strokes over blobs.
    """
    levels = tuple(int(v) for v in class_levels)
    k = len(levels)
    if k < 2:
        raise ValueError("a phantom needs at least two classes")
    if len(set(levels)) != k or min(levels) < 0 or max(levels) > 255:
        raise ValueError(f"class levels must be distinct gray values, got {levels}")
    if width < 1 or height < 1:
        raise ValueError(f"degenerate phantom size {width}x{height}")
    layout = Layout(layout)
    rng = rng_stream(seed, "phantom")

    if layout is Layout.BANDS:
        rows = np.arange(height)
        truth = (rows * k // height).astype(np.uint8)[:, None].repeat(width, axis=1)
    elif layout is Layout.DISKS:
        truth = _disks(height, width, k, rng)
    else:
        truth = _fine_structures(height, width, k, rng)

    frac = np.bincount(truth.ravel(), minlength=k) / truth.size
    if frac.min() < MIN_CLASS_FRACTION:
        raise ValueError(
            f"{layout.value} layout at {width}x{height} leaves class {int(frac.argmin())} "
            f"with {frac.min():.1%} of the pixels (minimum {MIN_CLASS_FRACTION:.0%})"
        )
    image = np.asarray(levels, dtype=np.uint8)[truth]
    return Phantom(GrayImage(image), LabelMap(truth, k), levels)


def add_noise(img: GrayImage, spec: NoiseSpec) -> GrayImage:
    """Return a noised copy; the input is left untouched."""
    if spec.amount == 0.0:
        return GrayImage(img.pixels.copy())
    rng = rng_stream(spec.seed, "noise")
    px = img.pixels.astype(np.int64)
    if spec.kind is NoiseKind.ADDITIVE_GAUSSIAN:
        noise = np.rint(rng.normal(0.0, spec.amount * 255.0, size=px.shape)).astype(np.int64)
        return GrayImage(np.clip(px + noise, 0, 255).astype(np.uint8))
    flat = px.ravel().copy()
    count = int(round(spec.amount * flat.size))
    idx = rng.choice(flat.size, size=count, replace=False)
    flat[idx] = rng.integers(0, 256, size=count)
    return GrayImage(flat.reshape(px.shape).astype(np.uint8))


def contour_mask(truth: LabelMap, radius: int = 1) -> np.ndarray:
    """True where the (2r+1)^2 truth neighbourhood, shrunk at borders, holds several labels."""
    if radius < 1:
        raise ValueError(f"contour radius must be >= 1, got {radius}")
    # edge replication cannot introduce labels absent from the in-bounds window
    padded = np.pad(truth.labels, radius, mode="edge")
    win = sliding_window_view(padded, (2 * radius + 1, 2 * radius + 1))
    return win.max(axis=(-2, -1)) != win.min(axis=(-2, -1))


@dataclass(frozen=True)
class SegReport:
    k: int
    region: tuple  # misclassified pixels per true class, region zone
    contour: tuple  # same, contour zone
    n_pixels: int

    @property
    def region_total(self) -> int:
        return int(sum(self.region))

    @property
    def contour_total(self) -> int:
        return int(sum(self.contour))

    @property
    def total(self) -> int:
        return self.region_total + self.contour_total

    @property
    def accuracy(self) -> float:
        return 1.0 - self.total / self.n_pixels

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "region": list(self.region),
            "contour": list(self.contour),
            "region_total": self.region_total,
            "contour_total": self.contour_total,
            "total": self.total,
            "n_pixels": self.n_pixels,
            "accuracy": self.accuracy,
        }


def score(pred: LabelMap, truth: LabelMap, mask: np.ndarray | None = None) -> SegReport:
    """Count ``pred != truth`` per true class, split into region and contour zones."""
    if pred.shape != truth.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {truth.shape}")
    if pred.k != truth.k:
        raise ValueError(f"class count mismatch: {pred.k} vs {truth.k}")
    mask = contour_mask(truth) if mask is None else np.asarray(mask, dtype=bool)
    if mask.shape != truth.shape:
        raise ValueError("contour mask does not match the label maps")
    wrong = pred.labels != truth.labels
    t = truth.labels
    region = np.bincount(t[wrong & ~mask], minlength=truth.k)
    contour = np.bincount(t[wrong & mask], minlength=truth.k)
    return SegReport(
        truth.k,
        tuple(int(v) for v in region),
        tuple(int(v) for v in contour),
        int(t.size),
    )


def align_labels(pred: LabelMap, truth: LabelMap, method: str = "auto") -> LabelMap:
    """Relabel ``pred`` by the class permutation that minimizes disagreement with ``truth``.

    Exhaustive search (identity preferred on ties) up to six classes,
    linear assignment beyond. ``method`` forces ``"exhaustive"`` or
    ``"assignment"``.
    """
    if pred.k != truth.k:
        raise ValueError(f"class count mismatch: {pred.k} vs {truth.k}")
    if pred.shape != truth.shape:
        raise ValueError(f"dimension mismatch: {pred.shape} vs {truth.shape}")
    k = pred.k
    conf = np.zeros((k, k), dtype=np.int64)
    np.add.at(conf, (pred.labels.ravel(), truth.labels.ravel()), 1)
    if method == "auto":
        method = "exhaustive" if k <= EXHAUSTIVE_MAX_K else "assignment"
    if method == "exhaustive":
        best, best_hits = None, -1
        for perm in itertools.permutations(range(k)):
            hits = int(conf[np.arange(k), perm].sum())
            if hits > best_hits:
                best, best_hits = perm, hits
        mapping = np.array(best)
    elif method == "assignment":
        rows, cols = linear_sum_assignment(conf, maximize=True)
        mapping = np.empty(k, dtype=np.int64)
        mapping[rows] = cols
    else:
        raise ValueError(f"unknown alignment method {method!r}")
    return LabelMap(mapping[pred.labels].astype(np.uint8), k)


@dataclass
class Comparison:
    image: GrayImage
    truth: LabelMap
    reports: dict = field(default_factory=dict)  # method name -> SegReport
    labels: dict = field(default_factory=dict)  # method name -> aligned LabelMap

    def to_dict(self) -> dict:
        return {name: rep.to_dict() for name, rep in self.reports.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def table(self, class_names=None) -> str:
        return format_table(self.reports, class_names)


def run_comparison(phantom: Phantom, noise: NoiseSpec | None, methods, cfg=None, backend=None) -> Comparison:
    """Segment one noised phantom with every method and score each against the truth."""
    from .segment import RunConfig, segment

    cfg = RunConfig(k=phantom.truth.k) if cfg is None else cfg
    image = phantom.image if noise is None else add_noise(phantom.image, noise)
    mask = contour_mask(phantom.truth)
    out = Comparison(image, phantom.truth)
    for method in methods:
        labels, _, _ = segment(image, method, cfg, backend=backend)
        aligned = align_labels(labels, phantom.truth)
        name = getattr(method, "value", method)
        out.labels[name] = aligned
        out.reports[name] = score(aligned, phantom.truth, mask)
    return out


def format_table(reports: dict, class_names=None) -> str:
    """Fixed-width table: one row per (class, zone), one column per method."""
    names = list(reports)
    k = next(iter(reports.values())).k
    class_names = class_names or [f"c{i}" for i in range(k)]
    cols = [n.upper() for n in names]
    lines = [f"{'class':<8}{'zone':<9}" + "".join(f"{c:>8}" for c in cols)]
    for zone in ("region", "contour"):
        for i in range(k):
            vals = "".join(f"{getattr(reports[n], zone)[i]:>8d}" for n in names)
            lines.append(f"{class_names[i]:<8}{zone.capitalize():<9}{vals}")
    lines.append(f"{'all':<8}{'Total':<9}" + "".join(f"{reports[n].total:>8d}" for n in names))
    return "\n".join(lines) + "\n"
