"""One-dimensional Gaussian mixtures fitted by EM.

All routines accept optional per-point ``weights`` (integer counts), so a fit
over the 256-bin histogram of an 8-bit image is the same computation as a fit
over its pixels, only much cheaper.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "VARIANCE_FLOOR",
    "FitError",
    "EmptyComponentError",
    "GaussianComponent",
    "GaussianMixture",
    "EmConfig",
    "gaussian_pdf",
    "mixture_density",
    "log_likelihood",
    "e_step",
    "m_step",
    "kmeans_init",
    "fit_em",
    "bic",
    "bic_from_loglik",
    "free_parameters",
    "select_k",
    "rng_stream",
]

log = logging.getLogger(__name__)

VARIANCE_FLOOR = 1e-3
EMPTY_MASS = 1e-12
KMEANS_MAX_ITER = 20

# named RNG sub-streams derived from the single user seed
STREAMS = {"init": 1, "noise": 2, "phantom": 3}


def rng_stream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named consumer of ``seed``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(STREAMS[name],)))


class FitError(ValueError):
    pass


class EmptyComponentError(FitError):
    def __init__(self, indices):
        super().__init__(f"components {list(indices)} received no responsibility mass")
        self.indices = list(indices)


@dataclass(frozen=True)
class GaussianComponent:
    weight: float
    mean: float
    variance: float

    def __post_init__(self):
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"component weight {self.weight} outside [0, 1]")
        if not self.variance > 0.0:
            raise ValueError(f"component variance must be positive, got {self.variance}")


@dataclass(frozen=True)
class GaussianMixture:
    components: tuple
    loglik_trace: tuple = ()
    iterations: int = 0
    converged: bool = True
    reseeded: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "loglik_trace", tuple(float(v) for v in self.loglik_trace))
        if not self.components:
            raise ValueError("a mixture needs at least one component")

    @classmethod
    def from_arrays(cls, weights, means, variances, **kw) -> "GaussianMixture":
        comps = tuple(
            GaussianComponent(float(w), float(m), float(v))
            for w, m, v in zip(weights, means, variances)
        )
        return cls(comps, **kw)

    @property
    def k(self) -> int:
        return len(self.components)

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    @property
    def variances(self) -> np.ndarray:
        return np.array([c.variance for c in self.components])

    @property
    def loglik(self) -> float | None:
        return self.loglik_trace[-1] if self.loglik_trace else None

    def sorted(self) -> "GaussianMixture":
        """Canonical copy with components in ascending-mean order."""
        order = np.argsort(self.means, kind="stable")
        return GaussianMixture(
            tuple(self.components[i] for i in order),
            self.loglik_trace,
            self.iterations,
            self.converged,
            tuple(sorted(int(np.nonzero(order == i)[0][0]) for i in self.reseeded)),
        )

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "components": [
                {"weight": c.weight, "mean": c.mean, "variance": c.variance}
                for c in self.components
            ],
            "loglik": self.loglik,
            "iterations": self.iterations,
            "converged": self.converged,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, doc: dict) -> "GaussianMixture":
        comps = [GaussianComponent(**c) for c in doc["components"]]
        if len(comps) != doc.get("k", len(comps)):
            raise ValueError("mixture document: k does not match component count")
        trace = () if doc.get("loglik") is None else (doc["loglik"],)
        return cls(tuple(comps), trace, int(doc.get("iterations", 0)), bool(doc.get("converged", True)))


@dataclass(frozen=True)
class EmConfig:
    k: int = 3
    epsilon: float = 1e-3
    max_iter: int = 200
    seed: int = 0
    init: str = "kmeans"  # or "identity": k-means centers with unit variances
    variance_floor: float = VARIANCE_FLOOR

    def __post_init__(self):
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.init not in ("kmeans", "identity"):
            raise ValueError(f"unknown init mode {self.init!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


def gaussian_pdf(x, mean, variance):
    """Normal density with the given mean and variance (scalar or array ``x``)."""
    if np.any(np.asarray(variance) <= 0):
        raise ValueError("variance must be positive")
    x = np.asarray(x, dtype=np.float64)
    out = np.exp(-((x - mean) ** 2) / (2.0 * variance)) / np.sqrt(2.0 * math.pi * variance)
    return float(out) if out.ndim == 0 else out


def mixture_density(x, m: GaussianMixture):
    x = np.asarray(x, dtype=np.float64)
    out = sum(c.weight * np.asarray(gaussian_pdf(x, c.mean, c.variance)) for c in m.components)
    return float(out) if np.ndim(out) == 0 else out


def _as_points(data, weights=None):
    x = np.asarray(data, dtype=np.float64).ravel()
    if weights is None:
        w = None
    else:
        w = np.asarray(weights, dtype=np.float64).ravel()
        if w.shape != x.shape:
            raise ValueError("weights must match data length")
        if (w < 0).any():
            raise ValueError("weights must be non-negative")
    return x, w


def _log_joint(x, m: GaussianMixture) -> np.ndarray:
    """(n, K) array of log(weight_i) + log N(x | mean_i, variance_i)."""
    w, mu, var = m.weights, m.means, m.variances
    with np.errstate(divide="ignore"):
        logw = np.log(w)
    d = x[:, None] - mu[None, :]
    return logw[None, :] - 0.5 * np.log(2.0 * math.pi * var)[None, :] - d * d / (2.0 * var)[None, :]


def _responsibilities(x, m):
    lj = _log_joint(x, m)
    top = lj.max(axis=1, keepdims=True)
    ex = np.exp(lj - top)
    tot = ex.sum(axis=1, keepdims=True)
    return ex / tot, (top + np.log(tot))[:, 0]


def log_likelihood(data, m: GaussianMixture, weights=None) -> float:
    """Sum over points of the log mixture density (count-weighted if given)."""
    x, w = _as_points(data, weights)
    if x.size == 0:
        raise ValueError("log-likelihood of empty data")
    _, logdens = _responsibilities(x, m)
    return float(logdens.sum() if w is None else np.dot(w, logdens))


def e_step(data, m: GaussianMixture) -> np.ndarray:
    """Posterior component probabilities, one row per point.

    Computed in the log domain so far-out points do not underflow to 0/0.
    """
    x, _ = _as_points(data)
    return _responsibilities(x, m)[0]


def _m_step(x, w, resp, floor):
    if w is None:
        mass = resp.sum(axis=0)
        total = float(x.size)
        sx = resp.T @ x
    else:
        wr = resp * w[:, None]
        mass = wr.sum(axis=0)
        total = float(w.sum())
        sx = wr.T @ x
    empty = mass < EMPTY_MASS * total
    safe = np.where(empty, 1.0, mass)
    means = sx / safe
    d = x[:, None] - means[None, :]
    if w is None:
        var = (resp * d * d).sum(axis=0) / safe
    else:
        var = (wr * d * d).sum(axis=0) / safe
    var = np.maximum(var, floor)
    return mass / total, means, var, empty


def m_step(data, resp, weights=None, variance_floor: float = VARIANCE_FLOOR) -> GaussianMixture:
    """Re-estimate weights, means and variances from responsibilities."""
    x, w = _as_points(data, weights)
    resp = np.asarray(resp, dtype=np.float64)
    if resp.ndim != 2 or resp.shape[0] != x.size:
        raise ValueError("responsibility table must have one row per data point")
    weights_, means, var, empty = _m_step(x, w, resp, variance_floor)
    if empty.any():
        raise EmptyComponentError(np.nonzero(empty)[0].tolist())
    return GaussianMixture.from_arrays(weights_, means, var)


def _collapse(x, w):
    """Distinct values and their total weights (zero-weight points dropped)."""
    if w is None:
        ux, counts = np.unique(x, return_counts=True)
        return ux, counts.astype(np.float64)
    keep = w > 0
    ux, inv = np.unique(x[keep], return_inverse=True)
    return ux, np.bincount(inv, weights=w[keep])


def kmeans_init(values, weights, k: int, rng: np.random.Generator, floor: float = VARIANCE_FLOOR,
                max_iter: int = KMEANS_MAX_ITER):
    """Weighted k-means with k-means++ seeding on distinct data values.

    Returns ``(weights, means, variances)`` with cluster fractions,
    centers and within-cluster population variances (floored).
    """
    v = np.asarray(values, dtype=np.float64)
    cw = np.asarray(weights, dtype=np.float64)
    if v.size < k:
        raise FitError(f"need at least {k} distinct values, got {v.size}")
    total = cw.sum()
    first = rng.choice(v.size, p=cw / total)
    centers = [v[first]]
    d2 = (v - centers[0]) ** 2
    for _ in range(1, k):
        score = cw * d2
        nxt = rng.choice(v.size, p=score / score.sum())
        centers.append(v[nxt])
        d2 = np.minimum(d2, (v - v[nxt]) ** 2)
    centers = np.array(centers)

    assign = None
    for _ in range(max_iter):
        new_assign = np.argmin((v[:, None] - centers[None, :]) ** 2, axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        mass = np.bincount(assign, weights=cw, minlength=k)
        sums = np.bincount(assign, weights=cw * v, minlength=k)
        centers = np.where(mass > 0, sums / np.where(mass > 0, mass, 1.0), centers)
    assign = np.argmin((v[:, None] - centers[None, :]) ** 2, axis=1)

    mass = np.bincount(assign, weights=cw, minlength=k)
    global_var = max(float(np.dot(cw, (v - np.dot(cw, v) / total) ** 2) / total), floor)
    var = np.empty(k)
    for i in range(k):
        if mass[i] > 0:
            sel = assign == i
            var[i] = np.dot(cw[sel], (v[sel] - centers[i]) ** 2) / mass[i]
        else:
            var[i] = global_var
    # an emptied cluster keeps a token share so its log-weight stays finite
    mass = np.where(mass > 0, mass, 1.0)
    return mass / mass.sum(), centers, np.maximum(var, floor)


def fit_em(data, cfg: EmConfig = EmConfig(), weights=None, callback=None) -> GaussianMixture:
    """Fit a K-component mixture by EM from a seeded k-means start.

    Iterates E and M steps until the largest absolute change among weights,
    means and standard deviations is at most ``cfg.epsilon``, or until
    ``cfg.max_iter`` M-steps. Non-convergence is logged and flagged on the
    result, not raised. ``callback(iteration, mixture, resp)`` is invoked
    after every E-step.

    The returned mixture is in ascending-mean order.
    """
    x, w = _as_points(data, weights)
    if x.size == 0:
        raise FitError("cannot fit an empty dataset")
    ux, uw = _collapse(x, w)
    k = cfg.k
    if ux.size < k:
        raise FitError(f"need at least {k} distinct values to fit {k} components, got {ux.size}")
    total = float(uw.sum())

    w0, mu0, var0 = kmeans_init(ux, uw, k, rng_stream(cfg.seed, "init"), cfg.variance_floor)
    if cfg.init == "identity":
        var0 = np.ones(k)
    m = GaussianMixture.from_arrays(w0, mu0, var0)

    resp, logdens = _responsibilities(x, m)
    trace = [float(logdens.sum() if w is None else np.dot(w, logdens))]
    if callback is not None:
        callback(0, m, resp)

    reseeded: list[int] = []
    converged = False
    it = 0
    for it in range(1, cfg.max_iter + 1):
        new_w, new_mu, new_var, empty = _m_step(x, w, resp, cfg.variance_floor)
        if empty.any():
            idx = np.nonzero(empty)[0]
            again = [int(i) for i in idx if i in reseeded]
            if again:
                raise EmptyComponentError(again)
            # re-seed each empty component on the worst-explained points
            worst = np.argsort(logdens, kind="stable")
            global_var = max(float(np.var(ux)), cfg.variance_floor)
            for j, i in enumerate(idx):
                new_mu[i] = x[worst[j]]
                new_var[i] = global_var
                new_w[i] = 1.0 / total
                reseeded.append(int(i))
            new_w = new_w / new_w.sum()
            log.warning("re-seeded empty EM components %s at iteration %d", idx.tolist(), it)
        new = GaussianMixture.from_arrays(new_w, new_mu, new_var)
        delta = max(
            np.abs(new_w - m.weights).max(),
            np.abs(new_mu - m.means).max(),
            np.abs(np.sqrt(new_var) - np.sqrt(m.variances)).max(),
        )
        m = new
        resp, logdens = _responsibilities(x, m)
        trace.append(float(logdens.sum() if w is None else np.dot(w, logdens)))
        if callback is not None:
            callback(it, m, resp)
        if delta <= cfg.epsilon:
            converged = True
            break

    if not converged:
        log.warning("EM did not converge within %d iterations", cfg.max_iter)
    out = GaussianMixture(m.components, tuple(trace), it, converged, tuple(reseeded))
    return out.sorted()


def free_parameters(k: int) -> int:
    """K-1 weights, K means, K variances."""
    return 3 * k - 1


def bic_from_loglik(loglik: float, k: int, n: float) -> float:
    return -2.0 * loglik + free_parameters(k) * math.log(n)


def bic(data, m: GaussianMixture, weights=None) -> float:
    """Bayesian information criterion of a fitted mixture; lower is better."""
    x, w = _as_points(data, weights)
    n = x.size if w is None else float(w.sum())
    return bic_from_loglik(log_likelihood(x, m, w), m.k, n)


def select_k(data, k_max: int, cfg: EmConfig = EmConfig(), weights=None):
    """Fit K = 1..k_max and pick the BIC minimizer (ties go to the smaller K).

    Returns ``(best_k, fits)`` where ``fits`` maps each successfully fitted K
    to its mixture. K values whose fit fails are logged and skipped.
    """
    if k_max < 1:
        raise ValueError(f"k_max must be >= 1, got {k_max}")
    fits = {}
    scores = {}
    for k in range(1, k_max + 1):
        try:
            m = fit_em(data, EmConfig(k, cfg.epsilon, cfg.max_iter, cfg.seed, cfg.init,
                                      cfg.variance_floor), weights)
        except FitError as exc:
            log.warning("select_k: K=%d skipped: %s", k, exc)
            continue
        fits[k] = m
        scores[k] = bic(data, m, weights)
    if not fits:
        raise FitError("no K in the requested range could be fitted")
    best = min(scores, key=lambda k: (scores[k], k))
    return best, fits
