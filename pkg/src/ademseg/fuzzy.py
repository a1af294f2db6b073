"""Fuzzy estimation of the per-pixel spatial weight from (sigma, NCN).

Two inputs, one output, five input sets and two output sets::

    d_p_small = max(min(sig_great, ncn_great), min(sig_great, ncn_moderate))
    d_p_great = max(sig_small, min(sig_great, ncn_small))

Flat regions (small sigma) and isolated outliers (large sigma, few close
neighbours) are pushed towards the spatial attribute (p near 1); edges
(moderate NCN) and pixels next to an outlier (high NCN) towards the gray
level (p near 0). Note the direction for high sigma: few close neighbours
means the pixel itself is the outlier, so it gets the high weight.

Defuzzification clips each output set at its rule strength and combines
the two clipped surfaces by ``(S1*X1 + S2*X2) / (S1 + S2)``, with area and
centroid in closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from .features import FeatureMaps

__all__ = [
    "MembershipFn",
    "FuzzySystem",
    "WeightResult",
    "membership",
    "clipped_area_moment",
    "infer_strengths",
    "defuzzify_centroid",
    "evaluate",
    "weight_map",
    "default_system",
    "SIGMA_DOMAIN",
]

SIGMA_DOMAIN = (0.0, 128.0)
NEUTRAL_P = 0.5  # returned when no rule fires


@dataclass(frozen=True)
class MembershipFn:
    """Trapezoid: 0 at or below ``a``, rising to 1 at ``b``, flat to ``c``, 0 at or above ``d``.

    Triangles have ``b == c``; shoulders have ``a == b`` or ``c == d``.
    """

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        if not self.a <= self.b <= self.c <= self.d:
            raise ValueError(f"breakpoints must satisfy a <= b <= c <= d, got {self.breakpoints}")

    @property
    def breakpoints(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def __call__(self, x: float) -> float:
        return membership(self, x)


def membership(fn: MembershipFn, x: float) -> float:
    a, b, c, d = fn.breakpoints
    if b <= x <= c:
        return 1.0
    if x <= a or x >= d:
        return 0.0
    if x < b:
        return (x - a) / (b - a)
    return (d - x) / (d - c)


def clipped_area_moment(fn: MembershipFn, height: float) -> tuple[float, float]:
    """Area and first moment of ``min(height, fn(x))``.

    Split into left triangle, rectangle and right triangle.
    """
    h = height
    if h <= 0.0:
        return 0.0, 0.0
    a, b, c, d = fn.breakpoints
    bp = a + h * (b - a)
    cp = d - h * (d - c)
    la = 0.5 * h * (bp - a)
    ra = h * (cp - bp)
    ta = 0.5 * h * (d - cp)
    area = la + ra + ta
    moment = la * (a + (bp - a) * (2.0 / 3.0)) + ra * (0.5 * (bp + cp)) + ta * (cp + (d - cp) / 3.0)
    return area, moment


@dataclass(frozen=True)
class WeightResult:
    p: float
    d_p_small: float
    d_p_great: float
    fallback: bool = False


@dataclass(frozen=True)
class FuzzySystem:
    sigma_small: MembershipFn
    sigma_great: MembershipFn
    ncn_small: MembershipFn
    ncn_moderate: MembershipFn
    ncn_great: MembershipFn
    p_small: MembershipFn
    p_great: MembershipFn
    sigma_domain: tuple = SIGMA_DOMAIN
    ncn_domain: tuple = (0.0, 8.0)
    defuzz_resolution: int = field(default=4096)

    SET_NAMES = (
        "sigma_small", "sigma_great", "ncn_small", "ncn_moderate", "ncn_great", "p_small", "p_great",
    )

    def __post_init__(self):
        if self.defuzz_resolution < 256:
            raise ValueError("defuzz_resolution must be >= 256")
        for lo, hi in (self.sigma_domain, self.ncn_domain):
            if not lo < hi:
                raise ValueError("empty input domain")
        for name in ("p_small", "p_great"):
            fn = getattr(self, name)
            if fn.a < 0.0 or fn.d > 1.0:
                raise ValueError(f"{name} must lie inside [0, 1]")

    def set_matrix(self) -> np.ndarray:
        return np.array([getattr(self, n).breakpoints for n in self.SET_NAMES], dtype=np.float64)

    def domains(self) -> np.ndarray:
        return np.array([*self.sigma_domain, *self.ncn_domain], dtype=np.float64)

    def check_coverage(self, samples: int = 1025) -> list[str]:
        """Input families that leave some point of their domain uncovered.

        When both inputs are covered at least one rule fires for every pixel.
        Output sets need no coverage: they are only ever clipped and integrated.
        """
        problems = []
        families = [
            ("sigma", self.sigma_domain, (self.sigma_small, self.sigma_great)),
            ("ncn", self.ncn_domain, (self.ncn_small, self.ncn_moderate, self.ncn_great)),
        ]
        for name, (lo, hi), fns in families:
            for x in np.linspace(lo, hi, samples):
                if all(membership(f, float(x)) == 0.0 for f in fns):
                    problems.append(name)
                    break
        return problems

    def to_dict(self) -> dict:
        doc = {n: list(getattr(self, n).breakpoints) for n in self.SET_NAMES}
        doc["sigma_domain"] = list(self.sigma_domain)
        doc["ncn_domain"] = list(self.ncn_domain)
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict, base: "FuzzySystem | None" = None) -> "FuzzySystem":
        """Build from a breakpoint document; missing entries come from ``base``."""
        kw = {}
        for n in cls.SET_NAMES:
            if n in doc:
                kw[n] = MembershipFn(*map(float, doc[n]))
            elif base is not None:
                kw[n] = getattr(base, n)
            else:
                raise ValueError(f"fuzzy system document lacks {n!r}")
        for n in ("sigma_domain", "ncn_domain"):
            if n in doc:
                kw[n] = tuple(map(float, doc[n]))
            elif base is not None:
                kw[n] = getattr(base, n)
        unknown = set(doc) - set(cls.SET_NAMES) - {"sigma_domain", "ncn_domain"}
        if unknown:
            raise ValueError(f"unknown fuzzy system keys: {sorted(unknown)}")
        return cls(**kw)

    @classmethod
    def from_json(cls, text: str, base: "FuzzySystem | None" = None) -> "FuzzySystem":
        return cls.from_dict(json.loads(text), base)


def default_system(sigma_break: float = 40.0, window_population: int = 9) -> FuzzySystem:
    """Default breakpoints, parameterized by the sigma break point.

    NCN sets are laid out for a 3x3 window and stretched linearly to the
    neighbour count of larger windows.
    """
    if not 0 < sigma_break <= SIGMA_DOMAIN[1]:
        raise ValueError(f"sigma_break must lie in (0, {SIGMA_DOMAIN[1]}], got {sigma_break}")
    top = SIGMA_DOMAIN[1]
    nmax = float(window_population - 1)
    u = nmax / 8.0
    return FuzzySystem(
        sigma_small=MembershipFn(0.0, 0.0, 0.5 * sigma_break, sigma_break),
        sigma_great=MembershipFn(0.5 * sigma_break, sigma_break, top, top),
        ncn_small=MembershipFn(0.0, 0.0, 1 * u, 3 * u),
        ncn_moderate=MembershipFn(1 * u, 3 * u, 5 * u, 7 * u),
        ncn_great=MembershipFn(5 * u, 7 * u, nmax, nmax),
        p_small=MembershipFn(0.0, 0.0, 0.0, 0.1),
        p_great=MembershipFn(0.9, 1.0, 1.0, 1.0),
        ncn_domain=(0.0, nmax),
    )


def _clamp(x, lo, hi):
    return lo if x < lo else hi if x > hi else x


def infer_strengths(fs: FuzzySystem, sigma: float, ncn: float) -> tuple[float, float]:
    """Fire the rule base; returns ``(d_p_small, d_p_great)``."""
    s = _clamp(float(sigma), *fs.sigma_domain)
    q = _clamp(float(ncn), *fs.ncn_domain)
    s_small = membership(fs.sigma_small, s)
    s_great = membership(fs.sigma_great, s)
    n_small = membership(fs.ncn_small, q)
    n_mod = membership(fs.ncn_moderate, q)
    n_great = membership(fs.ncn_great, q)
    d_small = max(min(s_great, n_great), min(s_great, n_mod))
    d_great = max(s_small, min(s_great, n_small))
    return d_small, d_great


def defuzzify_centroid(fs: FuzzySystem, d_p_small: float, d_p_great: float) -> WeightResult:
    a1, m1 = clipped_area_moment(fs.p_small, d_p_small)
    a2, m2 = clipped_area_moment(fs.p_great, d_p_great)
    if a1 + a2 > 0.0:
        return WeightResult((m1 + m2) / (a1 + a2), d_p_small, d_p_great)
    return WeightResult(NEUTRAL_P, d_p_small, d_p_great, fallback=True)


def evaluate(fs: FuzzySystem, sigma: float, ncn: float) -> WeightResult:
    return defuzzify_centroid(fs, *infer_strengths(fs, sigma, ncn))


def weight_map(fm: FeatureMaps, fs: FuzzySystem, backend=None) -> np.ndarray:
    """Spatial weight for every pixel; also stored on ``fm.p``."""
    p, _, _ = _backend.fuzzy_weights(fm.sigma, fm.ncn, fs.set_matrix(), fs.domains(), backend=backend)
    fm.p = p
    return p
