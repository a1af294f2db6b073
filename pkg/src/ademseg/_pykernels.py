"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Both implementations use the same arithmetic in the same order, so results
are bit-identical; the compiled one just avoids the temporaries.
"""

import numpy as np


def window_stats(img, radius, clamp, s_threshold):
    img = np.asarray(img, dtype=np.uint8)
    h, w = img.shape
    r = int(radius)
    center = img.astype(np.int64)
    total = np.zeros((h, w), dtype=np.int64)
    total_sq = np.zeros((h, w), dtype=np.int64)
    n = np.zeros((h, w), dtype=np.int64)
    count = np.zeros((h, w), dtype=np.int32)
    if clamp:
        padded = np.pad(center, r, mode="edge")
        valid = np.ones((h + 2 * r, w + 2 * r), dtype=bool)
    else:
        padded = np.pad(center, r, mode="constant")
        valid = np.pad(np.ones((h, w), dtype=bool), r, mode="constant")
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            v = padded[r + dy : r + dy + h, r + dx : r + dx + w]
            ok = valid[r + dy : r + dy + h, r + dx : r + dx + w]
            total += np.where(ok, v, 0)
            total_sq += np.where(ok, v * v, 0)
            n += ok
            if dy != 0 or dx != 0:
                close = np.abs((v - center).astype(np.float64)) < s_threshold
                count += ok & close
    num = n * total_sq - total * total
    nf = n.astype(np.float64)
    mean = total.astype(np.float64) / nf
    sigma = np.sqrt(num.astype(np.float64)) / nf
    return mean, sigma, count


def membership(a, b, c, d, x):
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        rise = (x - a) / (b - a) if b != a else np.zeros_like(x)
        fall = (d - x) / (d - c) if d != c else np.zeros_like(x)
    out = np.where(x < b, rise, fall)
    out = np.where((x <= a) | (x >= d), 0.0, out)
    return np.where((b <= x) & (x <= c), 1.0, out)


def clipped(a, b, c, d, h):
    h = np.asarray(h, dtype=np.float64)
    bp = a + h * (b - a)
    cp = d - h * (d - c)
    la = 0.5 * h * (bp - a)
    ra = h * (cp - bp)
    ta = 0.5 * h * (d - cp)
    area = la + ra + ta
    moment = la * (a + (bp - a) * (2.0 / 3.0)) + ra * (0.5 * (bp + cp)) + ta * (cp + (d - cp) / 3.0)
    off = h <= 0.0
    return np.where(off, 0.0, area), np.where(off, 0.0, moment)


def fuzzy_weights(sigma, ncn, sets, domains):
    sets = np.asarray(sets, dtype=np.float64)
    s = np.clip(np.asarray(sigma, dtype=np.float64), domains[0], domains[1])
    q = np.clip(np.asarray(ncn, dtype=np.float64), domains[2], domains[3])
    s_small = membership(*sets[0], s)
    s_great = membership(*sets[1], s)
    n_small = membership(*sets[2], q)
    n_mod = membership(*sets[3], q)
    n_great = membership(*sets[4], q)
    d_small = np.maximum(np.minimum(s_great, n_great), np.minimum(s_great, n_mod))
    d_great = np.maximum(s_small, np.minimum(s_great, n_small))
    a1, m1 = clipped(*sets[5], d_small)
    a2, m2 = clipped(*sets[6], d_great)
    denom = a1 + a2
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(denom > 0.0, (m1 + m2) / denom, 0.5)
    return p, d_small, d_great
