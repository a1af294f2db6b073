import math

import numpy as np
import pytest

from ademseg import BACKENDS
from ademseg.images import GrayImage


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_image(rng, h, w, lo=0, hi=256):
    return GrayImage(rng.integers(lo, hi, size=(h, w), dtype=np.uint8))


def window_values(px, y, x, radius=1, clamp=False):
    """Brute-force window listing; the center position is reported separately."""
    h, w = len(px), len(px[0])
    vals, center_pos = [], None
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            yy, xx = y + dy, x + dx
            if not (0 <= yy < h and 0 <= xx < w):
                if not clamp:
                    continue
                yy, xx = min(max(yy, 0), h - 1), min(max(xx, 0), w - 1)
            if dy == 0 and dx == 0:
                center_pos = len(vals)
            vals.append(int(px[yy][xx]))
    return vals, center_pos


def brute_features(img, radius=1, clamp=False, s=20.0):
    px = img.pixels.tolist()
    h, w = img.shape
    mean = np.zeros((h, w))
    std = np.zeros((h, w))
    count = np.zeros((h, w), dtype=int)
    for y in range(h):
        for x in range(w):
            vals, c = window_values(px, y, x, radius, clamp)
            m = sum(vals) / len(vals)
            mean[y, x] = m
            std[y, x] = math.sqrt(sum((v - m) ** 2 for v in vals) / len(vals))
            count[y, x] = sum(1 for i, v in enumerate(vals) if i != c and abs(v - px[y][x]) < s)
    return mean, std, count


# acceptance verdicts, criterion number -> (passed, detail); reported at the end of the run
ACCEPTANCE = {}


def verdict(number, title, passed, detail=""):
    ACCEPTANCE[number] = (bool(passed), title, detail)
    line = f"criterion {number:>2} {'PASS' if passed else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
    print(line)
    assert passed, line


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, title, detail = ACCEPTANCE[n]
        terminalreporter.write_line(
            f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {title}" + (f"  [{detail}]" if detail else "")
        )
