"""Noise-robust grayscale segmentation: EM, distance EM and fuzzy adaptive-distance EM."""

from ._backend import BACKENDS, DEFAULT as DEFAULT_BACKEND
from .features import BorderPolicy, FeatureMaps, WindowSpec, compute_features
from .fuzzy import FuzzySystem, MembershipFn, default_system, weight_map
from .gmm import EmConfig, GaussianMixture, bic, fit_em, select_k
from .images import GrayImage, LabelMap, read_pgm, write_pgm
from .segment import RunConfig, SegMethod, segment

__version__ = "0.1.0"

__all__ = [
    "BACKENDS",
    "DEFAULT_BACKEND",
    "BorderPolicy",
    "EmConfig",
    "FeatureMaps",
    "FuzzySystem",
    "GaussianMixture",
    "GrayImage",
    "LabelMap",
    "MembershipFn",
    "RunConfig",
    "SegMethod",
    "WindowSpec",
    "bic",
    "compute_features",
    "default_system",
    "fit_em",
    "read_pgm",
    "segment",
    "select_k",
    "weight_map",
    "write_pgm",
]
