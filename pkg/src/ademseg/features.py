"""Per-pixel spatial descriptors: local mean, local standard deviation, NCN."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import _backend
from .images import GrayImage

__all__ = [
    "BorderPolicy",
    "WindowSpec",
    "FeatureMaps",
    "local_mean",
    "local_std",
    "ncn",
    "compute_features",
    "DEFAULT_S_THRESHOLD",
]

DEFAULT_S_THRESHOLD = 20.0


class BorderPolicy(str, Enum):
    SHRINK = "shrink"  # statistics over the in-bounds part of the window
    CLAMP = "clamp"  # out-of-bounds taps replicate the nearest edge pixel


@dataclass(frozen=True)
class WindowSpec:
    radius: int = 1
    border_policy: BorderPolicy = BorderPolicy.SHRINK

    def __post_init__(self):
        if int(self.radius) != self.radius or self.radius < 1:
            raise ValueError(f"window radius must be a positive integer, got {self.radius}")
        object.__setattr__(self, "border_policy", BorderPolicy(self.border_policy))

    @property
    def size(self) -> int:
        return 2 * self.radius + 1

    @property
    def population(self) -> int:
        """Pixel count of an interior (full) window, center included."""
        return self.size * self.size

    @property
    def clamp(self) -> bool:
        return self.border_policy is BorderPolicy.CLAMP


@dataclass
class FeatureMaps:
    """Image-shaped feature grids. ``p`` stays ``None`` until a fuzzy system fills it."""

    mean: np.ndarray
    sigma: np.ndarray
    ncn: np.ndarray
    p: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.mean.shape


def _stats(img: GrayImage, w: WindowSpec, s_threshold: float, backend=None):
    return _backend.window_stats(img.pixels, w.radius, w.clamp, s_threshold, backend=backend)


def local_mean(img: GrayImage, w: WindowSpec = WindowSpec(), backend=None) -> np.ndarray:
    """Arithmetic mean over the window, center pixel included."""
    return _stats(img, w, DEFAULT_S_THRESHOLD, backend)[0]


def local_std(img: GrayImage, w: WindowSpec = WindowSpec(), backend=None) -> np.ndarray:
    """Population standard deviation (divisor N) over the window.

    Evaluated as ``sqrt(N*sum(x^2) - sum(x)^2) / N`` with the radicand in exact
    integer arithmetic, so constant windows give exactly 0.
    """
    return _stats(img, w, DEFAULT_S_THRESHOLD, backend)[1]


def ncn(
    img: GrayImage,
    w: WindowSpec = WindowSpec(),
    s_threshold: float = DEFAULT_S_THRESHOLD,
    backend=None,
) -> np.ndarray:
    """Count of window neighbours (center excluded) with ``|x_p - x_j| < s_threshold``."""
    if not s_threshold > 0:
        raise ValueError(f"NCN threshold must be positive, got {s_threshold}")
    return _stats(img, w, s_threshold, backend)[2]


def compute_features(
    img: GrayImage,
    w: WindowSpec = WindowSpec(),
    s_threshold: float = DEFAULT_S_THRESHOLD,
    backend=None,
) -> FeatureMaps:
    """All three window descriptors in a single pass; ``p`` left unset."""
    if not s_threshold > 0:
        raise ValueError(f"NCN threshold must be positive, got {s_threshold}")
    mean, sigma, count = _stats(img, w, s_threshold, backend)
    return FeatureMaps(mean=mean, sigma=sigma, ncn=count)
