"""Label maps from a fitted gray-level mixture.

Three classifiers share one EM fit on the image histogram:

* ``EM``   maximum a posteriori component of each gray level;
* ``DEM``  nearest class center, measured on the local-mean feature;
* ``ADEM`` nearest class center under the adaptive distance
  ``(1-p)(gray - v_gray)^2 + p(mean - v_spatial)^2`` with a fuzzy,
  per-pixel weight ``p``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .features import BorderPolicy, FeatureMaps, WindowSpec, compute_features
from .fuzzy import FuzzySystem, default_system, weight_map
from .gmm import EmConfig, GaussianMixture, e_step, fit_em
from .images import GrayImage, LabelMap

__all__ = [
    "SegMethod",
    "ClassCenters",
    "RunConfig",
    "centers_from_mixture",
    "refine_spatial_centers",
    "adaptive_distance",
    "classify_em_map",
    "classify_nearest_gray",
    "classify_dem",
    "classify_adem",
    "fit_image",
    "segment",
]


class SegMethod(str, Enum):
    EM = "em"
    DEM = "dem"
    ADEM = "adem"


@dataclass(frozen=True)
class ClassCenters:
    gray: np.ndarray
    spatial: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gray, dtype=np.float64)
        s = np.asarray(self.spatial, dtype=np.float64)
        if g.shape != s.shape or g.ndim != 1 or g.size < 1:
            raise ValueError("gray and spatial centers must be equal-length 1-D sequences")
        if not np.all(np.isfinite(s)) or not np.all(np.isfinite(g)):
            raise ValueError("class centers must be finite")
        object.__setattr__(self, "gray", g)
        object.__setattr__(self, "spatial", s)

    @property
    def k(self) -> int:
        return self.gray.size


@dataclass(frozen=True)
class RunConfig:
    method: SegMethod = SegMethod.ADEM
    k: int = 3
    epsilon: float = 1e-3
    max_iter: int = 200
    window_radius: int = 1
    s_threshold: float = 20.0
    sigma_break: float = 40.0
    border_policy: BorderPolicy = BorderPolicy.SHRINK
    seed: int = 0
    membership_override: str | None = None
    init: str = "kmeans"
    spatial_centers: str = "gray"  # or "refit": responsibility-weighted local means

    def __post_init__(self):
        object.__setattr__(self, "method", SegMethod(self.method))
        object.__setattr__(self, "border_policy", BorderPolicy(self.border_policy))
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.window_radius < 1:
            raise ValueError(f"window radius must be >= 1, got {self.window_radius}")
        if not self.s_threshold > 0:
            raise ValueError("s_threshold must be positive")
        if self.spatial_centers not in ("gray", "refit"):
            raise ValueError(f"unknown spatial center mode {self.spatial_centers!r}")

    @property
    def window(self) -> WindowSpec:
        return WindowSpec(self.window_radius, self.border_policy)

    @property
    def em(self) -> EmConfig:
        return EmConfig(self.k, self.epsilon, self.max_iter, self.seed, self.init)

    def fuzzy_system(self) -> FuzzySystem:
        fs = default_system(self.sigma_break, self.window.population)
        if self.membership_override:
            fs = FuzzySystem.from_json(Path(self.membership_override).read_text(), base=fs)
        return fs

    def manifest(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self)}
        doc["method"] = self.method.value
        doc["border_policy"] = self.border_policy.value
        return doc

    @classmethod
    def from_manifest(cls, doc: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in known})

    def with_(self, **kw) -> "RunConfig":
        return replace(self, **kw)


def centers_from_mixture(m: GaussianMixture) -> ClassCenters:
    """Gray and spatial centers both set to the component means.

    Inside a homogeneous region the local mean tends to the region's gray
    mean, so the two coordinates coincide in the noiseless limit.
    """
    mu = m.sorted().means
    return ClassCenters(mu, mu.copy())


def refine_spatial_centers(img: GrayImage, fm: FeatureMaps, m: GaussianMixture) -> ClassCenters:
    """Spatial centers re-estimated as responsibility-weighted averages of the local mean."""
    m = m.sorted()
    resp = e_step(img.pixels.ravel(), m)
    mass = resp.sum(axis=0)
    spatial = (resp.T @ fm.mean.ravel()) / np.where(mass > 0, mass, 1.0)
    spatial = np.where(mass > 0, spatial, m.means)
    return ClassCenters(m.means, spatial)


def adaptive_distance(gray, spatial, p, center) -> float:
    """Weighted squared distance between (gray, local mean) and a class center."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"weight p must lie in [0, 1], got {p}")
    vg, vs = center
    return (1.0 - p) * (gray - vg) ** 2 + p * (spatial - vs) ** 2


def _argmin_labels(dist: np.ndarray, shape, k: int) -> LabelMap:
    # np.argmin keeps the first minimum: ties go to the smaller class index
    return LabelMap(np.argmin(dist, axis=-1).reshape(shape).astype(np.uint8), k)


def classify_em_map(img: GrayImage, m: GaussianMixture) -> LabelMap:
    """Most probable component per pixel; ties resolved towards the darker class."""
    m = m.sorted()
    levels = np.arange(256, dtype=np.float64)
    lut = np.argmax(e_step(levels, m), axis=1).astype(np.uint8)
    return LabelMap(lut[img.pixels], m.k)


def classify_nearest_gray(img: GrayImage, c: ClassCenters) -> LabelMap:
    g = img.pixels.astype(np.float64)[..., None]
    return _argmin_labels((g - c.gray) ** 2, img.shape, c.k)


def classify_dem(img: GrayImage, fm: FeatureMaps, c: ClassCenters) -> LabelMap:
    """Nearest spatial center on the local mean only; the gray level is ignored."""
    s = fm.mean[..., None]
    return _argmin_labels((s - c.spatial) ** 2, img.shape, c.k)


def classify_adem(img: GrayImage, fm: FeatureMaps, c: ClassCenters, p=None) -> LabelMap:
    p = fm.p if p is None else np.broadcast_to(np.asarray(p, dtype=np.float64), img.shape)
    if p is None:
        raise ValueError("feature maps carry no weight map; run fuzzy.weight_map first")
    if p.min() < 0.0 or p.max() > 1.0:
        raise ValueError("weight map values must lie in [0, 1]")
    g = img.pixels.astype(np.float64)[..., None]
    s = fm.mean[..., None]
    w = p[..., None]
    dist = (1.0 - w) * (g - c.gray) ** 2 + w * (s - c.spatial) ** 2
    return _argmin_labels(dist, img.shape, c.k)


def fit_image(img: GrayImage, cfg: EmConfig) -> GaussianMixture:
    """EM over the 256-bin gray histogram (same result as over the pixels)."""
    hist = np.bincount(img.pixels.ravel(), minlength=256)
    return fit_em(np.arange(256, dtype=np.float64), cfg, weights=hist)


def segment(img: GrayImage, method=SegMethod.ADEM, cfg: RunConfig | None = None, backend=None):
    """Fit, extract features and classify.

    Returns ``(labels, mixture, features)``; the features always carry the
    weight map so they can be dumped whatever the method.
    """
    cfg = RunConfig() if cfg is None else cfg
    method = SegMethod(method)
    m = fit_image(img, cfg.em)
    fm = compute_features(img, cfg.window, cfg.s_threshold, backend=backend)
    weight_map(fm, cfg.fuzzy_system(), backend=backend)
    if cfg.spatial_centers == "refit":
        centers = refine_spatial_centers(img, fm, m)
    else:
        centers = centers_from_mixture(m)

    if method is SegMethod.EM:
        labels = classify_em_map(img, m)
    elif method is SegMethod.DEM:
        labels = classify_dem(img, fm, centers)
    else:
        labels = classify_adem(img, fm, centers)
    return labels, m, fm


def manifest_json(cfg: RunConfig, **extra) -> str:
    doc = cfg.manifest()
    doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=True)
