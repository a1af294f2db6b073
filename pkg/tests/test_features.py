import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ademseg.features import WindowSpec, compute_features, local_mean, local_std, ncn
from ademseg.images import GrayImage

from conftest import brute_features, random_image

ZERO_TO_EIGHT = GrayImage(np.arange(9, dtype=np.uint8).reshape(3, 3))


def test_constant_mean(backend):
    img = GrayImage(np.full((3, 3), 100, np.uint8))
    assert local_mean(img, backend=backend)[1, 1] == 100.0


def test_mean_of_zero_to_eight(backend):
    m = local_mean(ZERO_TO_EIGHT, backend=backend)
    assert m[1, 1] == 4.0
    assert m[0, 0] == 2.0  # shrink: window {0, 1, 3, 4}


def test_std_examples(backend):
    assert local_std(GrayImage(np.full((3, 3), 9, np.uint8)), backend=backend)[1, 1] == 0.0
    assert local_std(ZERO_TO_EIGHT, backend=backend)[1, 1] == pytest.approx(math.sqrt(60 / 9), abs=1e-12)
    assert local_std(ZERO_TO_EIGHT, backend=backend)[1, 1] == pytest.approx(2.581989, abs=1e-6)
    two = GrayImage(np.array([[0, 255, 0], [255, 255, 255], [0, 255, 0]], np.uint8))
    assert local_std(two, backend=backend)[1, 1] == pytest.approx(126.71051872498808, rel=1e-12)


def test_ncn_examples(backend):
    assert ncn(GrayImage(np.full((3, 3), 50, np.uint8)), s_threshold=0.5, backend=backend)[1, 1] == 8
    mixed = GrayImage(np.array([[98, 99, 100], [101, 100, 102], [150, 160, 10]], np.uint8))
    assert ncn(mixed, s_threshold=5, backend=backend)[1, 1] == 5
    impulse = np.zeros((3, 3), np.uint8)
    impulse[1, 1] = 255
    assert ncn(GrayImage(impulse), s_threshold=20, backend=backend)[1, 1] == 0


def test_ncn_is_strict():
    img = GrayImage(np.array([[100, 105, 100]], np.uint8))
    assert ncn(img, s_threshold=5)[0, 1] == 0
    assert ncn(img, s_threshold=5.0001)[0, 1] == 2


def test_ncn_rejects_non_positive_threshold():
    with pytest.raises(ValueError):
        ncn(ZERO_TO_EIGHT, s_threshold=0)


def test_clamp_policy_replicates_edges(backend):
    w = WindowSpec(1, "clamp")
    m = local_mean(ZERO_TO_EIGHT, w, backend=backend)
    # corner window under clamp: 0,0,1 / 0,0,1 / 3,3,4
    assert m[0, 0] == pytest.approx(12 / 9)
    counts = ncn(ZERO_TO_EIGHT, w, s_threshold=0.5, backend=backend)
    assert counts[0, 0] == 3  # three replicated copies of the corner besides itself


@pytest.mark.parametrize("radius, policy", [(1, "shrink"), (1, "clamp"), (2, "shrink"), (2, "clamp")])
def test_matches_brute_force(radius, policy, backend):
    rng = np.random.default_rng(radius * 10 + len(policy))
    for shape in [(8, 8), (16, 16), (5, 11)]:
        img = random_image(rng, *shape)
        fm = compute_features(img, WindowSpec(radius, policy), 20.0, backend=backend)
        mean, std, count = brute_features(img, radius, policy == "clamp", 20.0)
        np.testing.assert_allclose(fm.mean, mean, rtol=0, atol=1e-12)
        np.testing.assert_allclose(fm.sigma, std, rtol=0, atol=1e-9)
        np.testing.assert_array_equal(fm.ncn, count)


def test_ncn_bounded_by_population():
    rng = np.random.default_rng(3)
    img = random_image(rng, 10, 10, 0, 4)
    w = WindowSpec(1)
    counts = ncn(img, w, 50)
    assert counts.max() <= w.population - 1
    assert counts[0, 0] == 3 and counts[5, 5] == 8


images = arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9)))


@settings(max_examples=60, deadline=None)
@given(images, st.integers(-60, 60))
def test_shift_invariance(px, c):
    lo, hi = int(px.min()), int(px.max())
    if lo + c < 0 or hi + c > 255:
        c = 0
    img = GrayImage(px)
    shifted = GrayImage((px.astype(int) + c).astype(np.uint8))
    a, b = compute_features(img), compute_features(shifted)
    np.testing.assert_array_equal(a.ncn, b.ncn)
    np.testing.assert_allclose(b.mean, a.mean + c, atol=1e-9)
    np.testing.assert_allclose(b.sigma, a.sigma, atol=1e-9)


@settings(max_examples=60, deadline=None)
@given(images)
def test_std_zero_exactly_where_window_constant(px):
    img = GrayImage(px)
    sigma = local_std(img)
    h, w = px.shape
    for y in range(h):
        for x in range(w):
            win = px[max(y - 1, 0) : y + 2, max(x - 1, 0) : x + 2]
            assert (sigma[y, x] == 0.0) == (win.min() == win.max())


def test_window_spec_validation():
    with pytest.raises(ValueError):
        WindowSpec(0)
    with pytest.raises(ValueError):
        WindowSpec(1, "wrap")
    assert WindowSpec(2).population == 25
