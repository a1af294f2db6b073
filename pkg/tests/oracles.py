"""Slow, obviously-correct reference implementations used by several test modules."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _mu(a, b, c, d, x):
    if b <= x <= c:
        return 1.0
    if x <= a or x >= d:
        return 0.0
    if x < b:
        return (x - a) / (b - a)
    return (d - x) / (d - c)


@njit(cache=True)
def sampled_centroids(sets, strengths, n):
    """Midpoint-rule centroid of two clipped output sets on [0, 1].

    ``sets`` is (m, 2, 4), ``strengths`` (m, 2); returns m centroids
    (nan where both clipped areas vanish).
    """
    m = sets.shape[0]
    out = np.empty(m)
    dx = 1.0 / n
    for i in range(m):
        area = 0.0
        moment = 0.0
        for j in range(2):
            a, b, c, d = sets[i, j, 0], sets[i, j, 1], sets[i, j, 2], sets[i, j, 3]
            h = strengths[i, j]
            for t in range(n):
                x = (t + 0.5) * dx
                y = min(h, _mu(a, b, c, d, x))
                area += y
                moment += y * x
        out[i] = moment / area if area > 0 else np.nan
    return out


def count_mismatches(pred, truth, mask):
    """Per-class (region, contour) error counts by explicit loops."""
    h, w = len(truth), len(truth[0])
    k = max(max(r) for r in truth) + 1
    region, contour = [0] * k, [0] * k
    for y in range(h):
        for x in range(w):
            if pred[y][x] != truth[y][x]:
                if mask[y][x]:
                    contour[truth[y][x]] += 1
                else:
                    region[truth[y][x]] += 1
    return region, contour


def naive_pdf(x, m, v):
    return math.exp(-((x - m) ** 2) / (2 * v)) / math.sqrt(2 * math.pi * v)


def naive_e_step(data, m):
    rows = []
    for x in data:
        num = [c.weight * naive_pdf(x, c.mean, c.variance) for c in m.components]
        tot = sum(num)
        rows.append([v / tot for v in num])
    return rows


def naive_m_step(data, resp, floor=1e-3):
    n, k = len(data), len(resp[0])
    out = []
    for i in range(k):
        s = sum(resp[j][i] for j in range(n))
        mu = sum(resp[j][i] * data[j] for j in range(n)) / s
        var = sum(resp[j][i] * (data[j] - mu) ** 2 for j in range(n)) / s
        out.append((s / n, mu, max(var, floor)))
    return out
