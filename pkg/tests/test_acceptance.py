"""End-to-end acceptance criteria, one test per criterion.

Each test records a PASS/FAIL line that is repeated in the terminal summary.
"""

import itertools
import json
import os
import time

import numpy as np
import pytest

from ademseg.cli import main as cli_main
from ademseg.evaluation import (
    Layout,
    NoiseSpec,
    add_noise,
    align_labels,
    contour_mask,
    make_phantom,
    run_comparison,
    score,
)
from ademseg.features import WindowSpec, compute_features
from ademseg.fuzzy import FuzzySystem, default_system, defuzzify_centroid, infer_strengths, weight_map
from ademseg.gmm import EmConfig, GaussianMixture, e_step, fit_em, m_step, select_k
from ademseg.images import GrayImage, LabelMap
from ademseg.segment import (
    ClassCenters,
    RunConfig,
    classify_adem,
    classify_dem,
    classify_nearest_gray,
)

from conftest import brute_features, random_image, verdict
from oracles import count_mismatches, naive_e_step, naive_m_step, sampled_centroids

SEEDS = range(10)
LEVELS = (30, 120, 220)

# every responsibility table seen by any fit below: worst |row sum - 1|
ROW_SUM_ERR = [0.0]


def watch_rows(it, m, resp):
    ROW_SUM_ERR[0] = max(ROW_SUM_ERR[0], float(np.abs(resp.sum(axis=1) - 1).max()))


def two_bumps(seed):
    rng = np.random.default_rng(seed)
    return np.concatenate([rng.normal(50, 10, 5000), rng.normal(150, 10, 5000)])


def monotone(m):
    return bool(np.all(np.diff(m.loglik_trace) >= -1e-9))


def fit_phantom(layout, seed):
    ph = make_phantom(90, 90, LEVELS, layout, seed)
    img = add_noise(ph.image, NoiseSpec("impulse", 0.05, seed))
    hist = np.bincount(img.pixels.ravel(), minlength=256)
    return fit_em(np.arange(256.0), EmConfig(3, seed=seed), weights=hist, callback=watch_rows)


@pytest.fixture(scope="module")
def em_fits():
    fits = {}
    for seed in SEEDS:
        t0 = time.perf_counter()
        m = fit_em(two_bumps(seed), EmConfig(k=2, epsilon=1e-3, seed=seed), callback=watch_rows)
        fits[seed] = (m, time.perf_counter() - t0)
    return fits


def test_c01_em_recovery(em_fits):
    bad, slowest = [], 0.0
    for seed, (m, dt) in em_fits.items():
        slowest = max(slowest, dt)
        ok = np.all(np.abs(m.means - [50, 150]) <= 2.0) and np.all(np.abs(m.weights - 0.5) <= 0.05)
        if not ok or dt >= 1.0:
            bad.append(seed)
    verdict(1, "EM recovers the two-bump mixture, 10/10 seeds, < 1 s per fit", not bad,
            f"failing seeds {bad}, slowest fit {slowest:.3f} s")


def test_c02_em_ascent(em_fits):
    fits = [m for m, _ in em_fits.values()]
    for layout in Layout:
        fits += [fit_phantom(layout, seed) for seed in SEEDS]
    bad = sum(not monotone(m) for m in fits)
    verdict(2, "log-likelihood trace non-decreasing on every fit", bad == 0, f"{len(fits)} fits, {bad} violations")


def test_c03_row_normalization(em_fits):
    for layout in Layout:
        for seed in SEEDS:
            fit_phantom(layout, seed)
    rng = np.random.default_rng(0)
    for _ in range(50):
        k = int(rng.integers(1, 6))
        m = GaussianMixture.from_arrays(rng.dirichlet(np.ones(k)), rng.uniform(0, 255, k), rng.uniform(1e-3, 5e3, k))
        watch_rows(0, m, e_step(rng.uniform(-500, 800, 1000), m))
    err = ROW_SUM_ERR[0]
    verdict(3, "every E-step row sums to 1 within 1e-12", err <= 1e-12, f"worst deviation {err:.2e}")


def test_c04_bic_selection():
    got2, got1 = [], []
    for seed in SEEDS:
        got2.append(select_k(two_bumps(seed), 4, EmConfig(seed=seed))[0])
        uni = np.random.default_rng(1000 + seed).normal(120, 15, 10000)
        got1.append(select_k(uni, 4, EmConfig(seed=seed))[0])
    ok = all(k == 2 for k in got2) and all(k == 1 for k in got1)
    verdict(4, "BIC picks K=2 on two bumps and K=1 on one Gaussian, 10/10 seeds", ok,
            f"two-bump {got2}, single {got1}")


def test_c05_defuzzification_oracle():
    t0 = time.perf_counter()
    rng = np.random.default_rng(5)
    n = 1000
    sets = np.sort(rng.uniform(0, 1, (n, 2, 4)), axis=2)
    strengths = rng.uniform(0, 1, (n, 2))
    base = default_system()
    got = np.array([
        defuzzify_centroid(
            FuzzySystem.from_dict({"p_small": s[0].tolist(), "p_great": s[1].tolist()}, base), h[0], h[1]
        ).p
        for s, h in zip(sets, strengths)
    ])
    want = sampled_centroids(sets, strengths, 1_000_000)
    dt = time.perf_counter() - t0
    err = float(np.abs(got - want).max())
    verdict(5, "closed-form centroid matches 1e6-point integration, 1000 configs, < 10 s",
            err <= 1e-6 and dt < 10.0, f"max error {err:.1e}, {dt:.2f} s")


def _fixture_p(px, y, x):
    fm = compute_features(GrayImage(np.asarray(px, dtype=np.uint8)))
    return float(weight_map(fm, default_system())[y, x])


def test_c06_rule_semantics():
    fs = default_system()
    cases = {
        "low sigma": (infer_strengths(fs, 0.0, 4.0), (0.0, 1.0)),
        "outlier": (infer_strengths(fs, 100.0, 0.0), (0.0, 1.0)),
        "contour": (infer_strengths(fs, 100.0, 4.0), (1.0, 0.0)),
    }
    flat = np.full((9, 9), 120)
    impulse = np.full((9, 9), 30)
    impulse[4, 4] = 255
    edge = np.full((9, 9), 30)
    edge[:, 4:] = 220
    p_flat = min(_fixture_p(flat, y, x) for y in range(9) for x in range(9))
    p_imp = _fixture_p(impulse, 4, 4)
    p_edge = max(_fixture_p(edge, y, x) for y in range(9) for x in (3, 4))
    ok = all(got == want for got, want in cases.values()) and p_flat >= 0.9 and p_imp >= 0.9 and p_edge <= 0.3
    verdict(6, "rule strengths on the corner cases; p(flat), p(impulse) >= 0.9, p(edge) <= 0.3", ok,
            f"p flat {p_flat:.4f}, impulse {p_imp:.4f}, edge {p_edge:.4f}")


def test_c07_distance_reductions():
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(25):
        img = random_image(rng, int(rng.integers(4, 40)), int(rng.integers(4, 40)))
        fm = compute_features(img)
        k = int(rng.integers(2, 5))
        g = np.sort(rng.uniform(0, 255, k))
        c = ClassCenters(g, g + rng.normal(0, 5, k))
        mismatches += classify_adem(img, fm, c, p=0.0) != classify_nearest_gray(img, c)
        mismatches += classify_adem(img, fm, c, p=1.0) != classify_dem(img, fm, c)
    verdict(7, "ADEM with p=0 / p=1 equals gray nearest-center / DEM exactly", mismatches == 0,
            f"{mismatches} mismatching maps of 50")


def test_c08_table_ordering():
    ph = make_phantom(90, 90, LEVELS, Layout.BANDS)
    rows, bad, slowest = [], [], 0.0
    for seed in SEEDS:
        t0 = time.perf_counter()
        r = run_comparison(ph, NoiseSpec("impulse", 0.05, seed), ["em", "dem", "adem"], RunConfig(k=3, seed=seed)).reports
        dt = time.perf_counter() - t0
        slowest = max(slowest, dt)
        rows.append(f"{r['em'].total}/{r['dem'].total}/{r['adem'].total}")
        ok = r["adem"].total <= r["dem"].total <= r["em"].total and r["adem"].contour_total < r["dem"].contour_total
        if not ok or dt >= 5.0:
            bad.append(seed)
    verdict(8, "bands + 5% impulse: ADEM <= DEM <= EM total, ADEM < DEM contour, 10/10 seeds, < 5 s", not bad,
            f"EM/DEM/ADEM totals {' '.join(rows)}; slowest {slowest:.3f} s")


def test_c09_noise_vs_contour():
    bad, rows = [], []
    for seed in SEEDS:
        ph = make_phantom(90, 90, LEVELS, Layout.FINE_STRUCTURES, seed)
        r = run_comparison(ph, NoiseSpec("impulse", 0.05, seed), ["em", "dem", "adem"], RunConfig(k=3, seed=seed)).reports
        rows.append(f"{r['em'].region_total}/{r['dem'].region_total}:{r['dem'].contour_total}/{r['adem'].contour_total}")
        ok = r["dem"].region_total < r["em"].region_total and r["dem"].contour_total > r["adem"].contour_total
        if not ok:
            bad.append(seed)
    verdict(9, "fine structures: DEM region < EM region and DEM contour > ADEM contour, 10/10 seeds", not bad,
            f"region EM/DEM : contour DEM/ADEM {' '.join(rows)}")


def test_c10_sigma_sweep(tmp_path):
    assert cli_main(["generate", "--out", str(tmp_path / "ph"), "--quiet"]) == 0
    assert cli_main(["noise", str(tmp_path / "ph.pgm"), "--amount", "0.05", "--out", str(tmp_path / "n"), "--quiet"]) == 0
    code = cli_main(["sweep", str(tmp_path / "n.pgm"), "--sigma", "15,40,70", "--truth", str(tmp_path / "ph.truth.pgm"),
                     "--out", str(tmp_path / "sw"), "--quiet"])
    maps = [tmp_path / f"sw.sigma{s}.labels.pgm" for s in (15, 40, 70)]
    summary = json.loads((tmp_path / "sw.summary.json").read_text())
    totals = {row["sigma_break"]: row["total"] for row in summary["rows"]}
    best40 = totals[40] <= totals[15] and totals[40] <= totals[70]
    ok = code == 0 and all(p.exists() for p in maps) and sorted(totals) == [15, 40, 70]
    verdict(10, "sweep over 15,40,70 emits three maps and a summary", ok,
            f"totals {totals}; sigma 40 best: {best40} (recorded only)")


def _all_commands():
    run = lambda *a: cli_main([str(v) for v in a] + ["--quiet"])
    codes = [
        run("generate", "--layout", "fine_structures", "--seed", "3", "--out", "ph"),
        run("noise", "ph.pgm", "--kind", "additive_gaussian", "--seed", "4", "--out", "n"),
        run("noise", "n.pgm", "--amount", "0.05", "--seed", "5", "--out", "n2"),
        run("features", "n2.pgm", "--out", "f"),
        run("segment", "--method", "adem", "--seed", "6", "n2.pgm", "--out", "s", "--dump-features"),
        run("segment", "--method", "em", "n2.pgm", "--out", "e"),
        run("eval", "--truth", "ph.truth.pgm", "--pred", "s.labels.lbl", "--out", "ev"),
        run("eval", "--truth", "ph.truth.pgm", "--image", "n2.pgm", "--compare", "em,dem,adem", "--out", "cmp"),
        run("sweep", "n2.pgm", "--sigma", "15,40,70", "--truth", "ph.truth.pgm", "--out", "sw"),
    ]
    return codes, {p: open(p, "rb").read() for p in sorted(os.listdir("."))}


def test_c11_cli_determinism(tmp_path, monkeypatch):
    outputs = []
    for run_dir in ("a", "b"):
        (tmp_path / run_dir).mkdir()
        monkeypatch.chdir(tmp_path / run_dir)
        outputs.append(_all_commands())
    (codes_a, files_a), (codes_b, files_b) = outputs
    differing = sorted(n for n in files_a if files_a[n] != files_b.get(n))
    ok = codes_a == codes_b == [0] * 9 and files_a.keys() == files_b.keys() and not differing
    verdict(11, "every CLI command re-run gives byte-identical files", ok,
            f"{len(files_a)} files compared, differing: {differing or 'none'}")


def test_c12_oracle_equivalence():
    rng = np.random.default_rng(12)
    failures = []
    for trial in range(6):
        h, w = int(rng.integers(1, 17)), int(rng.integers(1, 17))
        img = random_image(rng, h, w)
        for radius, policy in ((1, "shrink"), (1, "clamp"), (2, "shrink")):
            fm = compute_features(img, WindowSpec(radius, policy))
            mean, std, count = brute_features(img, radius, policy == "clamp")
            if not (np.allclose(fm.mean, mean, rtol=0, atol=1e-9) and np.allclose(fm.sigma, std, rtol=0, atol=1e-9)
                    and np.array_equal(fm.ncn, count)):
                failures.append(f"features {trial}")
    for trial in range(10):
        k, n = int(rng.integers(1, 4)), int(rng.integers(1, 51))
        data = rng.uniform(0, 255, n)
        m = GaussianMixture.from_arrays(rng.dirichlet(np.ones(k)), rng.uniform(0, 255, k), rng.uniform(20, 900, k))
        if not np.allclose(e_step(data, m), naive_e_step(data.tolist(), m), rtol=1e-12, atol=1e-300):
            failures.append(f"e_step {trial}")
        resp = rng.dirichlet(np.ones(k), size=n)
        got = m_step(data, resp)
        want = np.array(naive_m_step(data.tolist(), resp.tolist()))
        have = np.column_stack([got.weights, got.means, got.variances])
        if not np.allclose(have, want, rtol=1e-12, atol=0):
            failures.append(f"m_step {trial}")
    for trial in range(10):
        k = int(rng.integers(2, 4))
        truth = LabelMap(rng.integers(0, k, (16, 16)).astype(np.uint8), k)
        pred = LabelMap(rng.integers(0, k, (16, 16)).astype(np.uint8), k)
        mask = contour_mask(truth)
        rep = score(pred, truth, mask)
        region, contour = count_mismatches(pred.labels.tolist(), truth.labels.tolist(), mask.tolist())
        if list(rep.region) != region or list(rep.contour) != contour:
            failures.append(f"score {trial}")
        best = min(int(np.count_nonzero(np.array(p)[pred.labels] != truth.labels))
                   for p in itertools.permutations(range(k)))
        if int(np.count_nonzero(align_labels(pred, truth).labels != truth.labels)) != best:
            failures.append(f"align {trial}")
    verdict(12, "features, E/M steps, score and alignment match brute-force oracles", not failures,
            f"failures: {failures or 'none'}")
