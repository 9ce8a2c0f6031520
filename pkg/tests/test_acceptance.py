"""End-to-end acceptance checks for the shipped guarantees.

One test per guarantee, numbered ac1..ac11 so the verbose run reads as
a scorecard. Each test also prints a single ``[AC<n>] PASS/FAIL`` line
with the measured numbers (shown with ``-s``, or in captured output on
failure). Statistical checks run on frozen seeds and, where a check
carries a wall-clock budget, the elapsed time is asserted against it.
Everything runs serially; thread handling gets its own check (ac11).
"""

from __future__ import annotations

import math
import os
import subprocess
import sys
import time

import numpy as np
import pytest

from oracles import (brute_count_within_linf, brute_kth_linf,
                     grow_cart_reference)
from uforest.baselines import KnnIndex, ksg_mi, mixed_ksg_mi
from uforest.estimators import fit_posterior, run_estimator
from uforest.forest import ForestConfig, finite_sample_correct, fit_forest
from uforest.inference import mi_decomposition, permutation_test
from uforest.io import load_csv, save_csv
from uforest.rng import derive_key, generator
from uforest.sim import SimSetting, sample, truth
from uforest.tree import TreeParams, fit_tree

BASE = 601  # seed namespace for this module; ac9 keeps its own


def _report(tag: str, ok: bool, detail: str) -> None:
    state = "PASS" if ok else "FAIL"
    print(f"[{tag}] {state} {detail}", flush=True)


@pytest.fixture(scope="module", autouse=True)
def _warm_kernels():
    # pay any JIT compile cost before the timed sections start
    data = sample(SimSetting(name="spherical", mu=1.0, pi=0.5, d=2), 80, 1)
    fit_forest(data, ForestConfig(n_trees=2), seed=1)
    idx = KnnIndex(data.features)
    idx.count_within(idx.kth_distance(1))


# --------------------------------------------------------------------- ac1

def test_ac1_zero_signal_recovers_label_entropy():
    t0 = time.perf_counter()
    setting = SimSetting(name="spherical", mu=0.0, pi=0.5, d=1)
    cfg = ForestConfig()
    h_vals, mi_vals = [], []
    for t in range(20):
        data = sample(setting, 6000, derive_key(BASE, "ac1-data", t))
        rep = run_estimator("uf", data, cfg, derive_key(BASE, "ac1-est", t))
        h_vals.append(rep.h_y_given_x)
        mi_vals.append(rep.mi)
    h_dev = float(np.mean(h_vals)) - math.log(2.0)
    mi_mean = float(np.mean(mi_vals))
    elapsed = time.perf_counter() - t0
    ok = abs(h_dev) <= 0.02 and abs(mi_mean) <= 0.02 and elapsed <= 120.0
    _report("AC1", ok,
            f"entropy dev {h_dev:+.4f}, mi {mi_mean:+.4f} ({elapsed:.0f}s)")
    assert abs(h_dev) <= 0.02
    assert abs(mi_mean) <= 0.02
    assert elapsed <= 120.0


# --------------------------------------------------------------------- ac2

def test_ac2_error_shrinks_with_sample_size():
    t0 = time.perf_counter()
    setting = SimSetting(name="spherical", mu=1.0, pi=0.5, d=1)
    target = truth(setting).h_y_given_x
    cfg = ForestConfig()
    sizes = (500, 1000, 2000, 4000, 6000)
    errs = []
    for n in sizes:
        devs = []
        for t in range(20):
            data = sample(setting, n, derive_key(BASE, "ac2-data", n, t))
            rep = run_estimator("uf", data, cfg,
                                derive_key(BASE, "ac2-est", n, t))
            devs.append(rep.h_y_given_x - target)
        errs.append(float(np.mean(np.abs(devs))))
    cart_vals = []
    for t in range(20):
        data = sample(setting, 6000, derive_key(BASE, "ac2-data", 6000, t))
        rep = run_estimator("cart", data, cfg,
                            derive_key(BASE, "ac2-cart", t))
        cart_vals.append(rep.h_y_given_x)
    undershoot = target - float(np.mean(cart_vals))
    ups = [errs[i + 1] - errs[i] for i in range(len(errs) - 1)
           if errs[i + 1] > errs[i]]
    elapsed = time.perf_counter() - t0
    curve = ", ".join(f"{e:.4f}" for e in errs)
    ok = (len(ups) <= 1 and all(u <= 0.005 for u in ups)
          and errs[-1] <= 0.03 and undershoot > 0.05 and elapsed <= 900.0)
    _report("AC2", ok, f"mean |err| [{curve}], cart undershoot "
                       f"{undershoot:+.4f} ({elapsed:.0f}s)")
    assert len(ups) <= 1, f"error curve rises more than once: {errs}"
    for u in ups:
        assert u <= 0.005, f"inversion of {u:.4f} nats in {errs}"
    assert errs[-1] <= 0.03
    assert undershoot > 0.05
    assert elapsed <= 900.0


# --------------------------------------------------------------------- ac3

def test_ac3_high_dimension_beats_neighbor_baselines():
    t0 = time.perf_counter()
    cfg = ForestConfig()
    wide = SimSetting(name="spherical", mu=1.0, pi=0.5, d=20)
    target = truth(wide).mi_normalized
    devs = []
    for t in range(20):
        data = sample(wide, 6000, derive_key(BASE, "ac3-data", t))
        rep = run_estimator("uf", data, cfg, derive_key(BASE, "ac3-est", t))
        devs.append(rep.mi_normalized - target)
    uf_dev = abs(float(np.mean(devs)))
    mid = SimSetting(name="spherical", mu=1.0, pi=0.5, d=16)
    mid_target = truth(mid).mi_normalized
    neighbor_dev = {}
    for name in ("ksg", "mixed-ksg"):
        vals = []
        for t in range(3):
            data = sample(mid, 6000, derive_key(BASE, "ac3-d16", t))
            rep = run_estimator(name, data, cfg,
                                derive_key(BASE, "ac3-nb", name, t))
            vals.append(rep.mi_normalized - mid_target)
        neighbor_dev[name] = abs(float(np.mean(vals)))
    elapsed = time.perf_counter() - t0
    ok = (uf_dev <= 0.1 and neighbor_dev["ksg"] > uf_dev
          and neighbor_dev["mixed-ksg"] > uf_dev and elapsed <= 1200.0)
    _report("AC3", ok,
            f"uf dev {uf_dev:.4f}, ksg {neighbor_dev['ksg']:.4f}, "
            f"mixed-ksg {neighbor_dev['mixed-ksg']:.4f} ({elapsed:.0f}s)")
    assert uf_dev <= 0.1
    assert neighbor_dev["ksg"] > uf_dev
    assert neighbor_dev["mixed-ksg"] > uf_dev
    assert elapsed <= 1200.0


# --------------------------------------------------------------------- ac4

def test_ac4_entropy_tracks_separation():
    t0 = time.perf_counter()
    cfg = ForestConfig()
    means, worst = [], 0.0
    for mu in (0.0, 0.5, 1.0, 2.0, 4.0):
        setting = SimSetting(name="spherical", mu=mu, pi=0.5, d=1)
        target = truth(setting).h_y_given_x
        vals = []
        for t in range(5):
            data = sample(setting, 3000,
                          derive_key(BASE, "ac4-data", repr(mu), t))
            rep = run_estimator("uf", data, cfg,
                                derive_key(BASE, "ac4-est", repr(mu), t))
            vals.append(rep.h_y_given_x)
        means.append(float(np.mean(vals)))
        worst = max(worst, abs(means[-1] - target))
    rises = [means[i + 1] - means[i] for i in range(len(means) - 1)
             if means[i + 1] > means[i]]
    elapsed = time.perf_counter() - t0
    curve = ", ".join(f"{m:.4f}" for m in means)
    ok = not rises and worst <= 0.05 and elapsed <= 600.0
    _report("AC4", ok,
            f"means [{curve}], worst dev {worst:.4f} ({elapsed:.0f}s)")
    assert not rises, f"entropy not non-increasing in separation: {means}"
    assert worst <= 0.05
    assert elapsed <= 600.0


# --------------------------------------------------------------------- ac5

def test_ac5_posterior_variance_not_worse_than_cart():
    t0 = time.perf_counter()
    setting = SimSetting(name="spherical", mu=1.0, pi=0.5, d=1)
    cfg = ForestConfig()
    grid = np.linspace(-3.0, 3.0, 61)[:, None]
    curves = {"uf": np.empty((20, 61)), "cart": np.empty((20, 61))}
    for t in range(20):
        data = sample(setting, 6000, derive_key(BASE, "ac5-data", t))
        for name, out in curves.items():
            model = fit_posterior(name, data, cfg,
                                  derive_key(BASE, "ac5-est", name, t))
            out[t] = model(grid)[:, 1]
    var_uf = curves["uf"].var(axis=0)
    var_cart = curves["cart"].var(axis=0)
    frac = float(np.mean(var_uf <= var_cart))
    elapsed = time.perf_counter() - t0
    ok = frac >= 0.80
    _report("AC5", ok, f"variance no worse at {frac:.1%} of grid points "
                       f"({elapsed:.0f}s)")
    # Known shortfall: where the posterior saturates, a fully grown tree
    # is pure at the query in every trial, so its variance is exactly
    # zero, while the honest forest keeps a tiny correction-driven
    # jitter. Those grid points are unwinnable under <=.
    assert frac >= 0.80, (
        f"variance no worse at only {frac:.1%} of grid points; the "
        f"saturated tails (|x| near 3) give plain cart exactly zero "
        f"variance while the corrected forest keeps ~1e-6 jitter")


# --------------------------------------------------------------------- ac6

def test_ac6_correction_bounded_and_vanishing():
    rng = generator(BASE, "ac6")
    worst_excess = -np.inf
    for _ in range(1000):
        k_cls = int(rng.integers(2, 11))
        n_rows = int(rng.integers(1, 101))
        kappa = float(rng.uniform(0.1, 10.0))
        counts = rng.multinomial(n_rows, rng.dirichlet(np.ones(k_cls)))
        probs = (counts / n_rows)[None, :]
        totals = np.array([n_rows], dtype=np.int64)
        fixed = finite_sample_correct(probs, totals, kappa)
        shift = float(np.abs(fixed - probs).max())
        bound = k_cls / (kappa * n_rows)
        worst_excess = max(worst_excess, shift - bound)
        assert shift <= bound + 1e-12
        assert abs(float(fixed.sum()) - 1.0) <= 1e-12
    sparse = np.array([[0.9, 0.1, 0.0, 0.0]])
    big = finite_sample_correct(sparse, np.array([100], dtype=np.int64), 1e8)
    residual = float(np.abs(big - sparse).max())
    ok = residual < 1e-6
    _report("AC6", ok, f"worst bound excess {worst_excess:.2e}, "
                       f"large-sample residual {residual:.2e}")
    assert residual < 1e-6


# --------------------------------------------------------------------- ac7

def test_ac7_kernels_match_reference_oracles():
    rng = generator(BASE, "ac7-knn")
    for i in range(100):
        n = int(rng.integers(20, 501))
        d = int(rng.integers(1, 19))
        k = int(rng.integers(1, min(10, n - 1) + 1))
        pts = rng.normal(size=(n, d))
        if i % 2:
            pts[: n // 3] = np.round(pts[: n // 3], 1)  # inject ties
        idx = KnnIndex(pts)
        kd = idx.kth_distance(k)
        np.testing.assert_array_equal(kd, brute_kth_linf(pts, k))
        np.testing.assert_array_equal(
            idx.count_within(kd), brute_count_within_linf(pts, kd))
        np.testing.assert_array_equal(
            idx.count_within(kd, strict=True),
            brute_count_within_linf(pts, kd, strict=True))

    rng = generator(BASE, "ac7-tree")
    impurities = ("gini", "entropy")
    for case in range(20):
        m = int(rng.integers(20, 201))
        d = int(rng.integers(1, 7))
        k_cls = int(rng.integers(2, 5))
        min_leaf = int(rng.integers(1, 9))
        max_depth = None if case % 3 else int(rng.integers(2, 6))
        impurity = impurities[case % 2]
        X = rng.normal(size=(m, d))
        X[: m // 3] = np.round(X[: m // 3], 1)
        score = X[:, 0] + 0.5 * rng.normal(size=m)
        edges = np.quantile(score, np.linspace(0, 1, k_cls + 1)[1:-1])
        y = np.digitize(score, edges).astype(np.int64)
        params = TreeParams(min_leaf_size=min_leaf, impurity=impurity,
                            max_depth=max_depth)
        tree = fit_tree(X, y, k_cls, params, seed=case)
        ref = grow_cart_reference(X, y, k_cls, min_leaf, max_depth, impurity)
        for field in ("feature", "threshold", "left", "right",
                      "node_count", "node_impurity", "leaf_index"):
            np.testing.assert_array_equal(getattr(tree, field), ref[field])

    worst = 0.0
    for rho in (0.0, 0.3, 0.6, 0.9):
        g = generator(BASE, "ac7-ksg", repr(rho))
        x = g.standard_normal(6000)
        y = rho * x + math.sqrt(1.0 - rho * rho) * g.standard_normal(6000)
        est = ksg_mi(x[:, None], y, k=3)
        target = -0.5 * math.log(1.0 - rho * rho)
        worst = max(worst, abs(est - target))
        assert abs(est - target) <= 0.05
    _report("AC7", True, f"neighbors and trees bit-exact, "
                         f"worst ksg dev {worst:.4f}")


# --------------------------------------------------------------------- ac8

def test_ac8_decomposition_additivity(tmp_path):
    setting = SimSetting(name="spherical", mu=1.0, pi=0.5, d=3)
    data = sample(setting, 300, derive_key(BASE, "ac8-data"))
    cfg = ForestConfig(n_trees=20)
    subsets = [(), ("x1",), ("x2",), ("x1", "x3"),
               tuple(data.feature_names)]
    worst = 0.0
    for source in ("simulated", "csv"):
        if source == "csv":
            path = str(tmp_path / "rows.csv")
            save_csv(data, path)
            data = load_csv(path, label_column="label")
        rows = mi_decomposition(data, subsets, cfg,
                                derive_key(BASE, "ac8-est"))
        for row in rows:
            gap = abs(row.i_in + row.i_cond - row.i_total)
            worst = max(worst, gap)
            assert gap <= 1e-12, (source, row.in_features, gap)
    _report("AC8", True, f"worst additivity gap {worst:.2e}")


# --------------------------------------------------------------------- ac9

def test_ac9_permutation_calibration_and_power():
    t0 = time.perf_counter()
    null_setting = SimSetting(name="spherical", mu=0.0, pi=0.5, d=1)
    cfg = ForestConfig(n_trees=10)
    rejections = 0
    for mt in range(50):
        data = sample(null_setting, 150, derive_key(2749, "null-data", mt))
        res = permutation_test(data, cfg, 199,
                               derive_key(2749, "null-test", mt))
        rejections += res.p_value <= 0.05
    rate = rejections / 50.0
    strong = SimSetting(name="spherical", mu=10.0, pi=0.5, d=1)
    power_cfg = ForestConfig(n_trees=30)
    p_vals = []
    for t in range(3):
        data = sample(strong, 1000, derive_key(2749, "alt-data", t))
        res = permutation_test(data, power_cfg, 99,
                               derive_key(2749, "alt-test", t))
        p_vals.append(res.p_value)
    elapsed = time.perf_counter() - t0
    ok = 0.01 <= rate <= 0.09 and all(p == 0.01 for p in p_vals)
    _report("AC9", ok, f"null rejection rate {rate:.2f}, strong-signal "
                       f"p {p_vals} ({elapsed:.0f}s)")
    assert 0.01 <= rate <= 0.09
    for p in p_vals:
        assert p == 0.01


# --------------------------------------------------------------------- ac10

CONNECTOME_ENV = "UFOREST_CONNECTOME_CSV"


def test_ac10_neuron_type_reference_values():
    path = os.environ.get(CONNECTOME_ENV, "").strip()
    if not path:
        _report("AC10", True,
                f"SKIP external dataset absent (set {CONNECTOME_ENV})")
        pytest.skip(f"{CONNECTOME_ENV} not set")
    data = load_csv(path, label_column="type")
    cfg = ForestConfig()
    rep = run_estimator("uf", data, cfg, derive_key(BASE, "ac10-est"))
    total_dev = min(abs(rep.mi - 0.917), abs(rep.mi_normalized - 0.917))
    rows = mi_decomposition(data, [("cluster",)], cfg,
                            derive_key(BASE, "ac10-dec"))
    in_norm = rows[0].i_in / rep.h_y
    cond_norm = rows[0].i_cond / rep.h_y
    res = permutation_test(data, cfg, 1000, derive_key(BASE, "ac10-perm"))
    ok = (total_dev <= 0.05 and abs(in_norm - 0.800) <= 0.05
          and abs(cond_norm - 0.116) <= 0.05 and res.p_value <= 0.002)
    _report("AC10", ok,
            f"total dev {total_dev:.4f}, cluster in/cond "
            f"{in_norm:.3f}/{cond_norm:.3f}, p {res.p_value:.4f}")
    assert total_dev <= 0.05
    assert abs(in_norm - 0.800) <= 0.05
    assert abs(cond_norm - 0.116) <= 0.05
    assert res.p_value <= 0.002


# --------------------------------------------------------------------- ac11

def test_ac11_thread_count_invariance(tmp_path):
    args = ["sweep", "--setting", "spherical", "--mu", "1.0", "--d", "2",
            "--n", "300", "--trials", "2",
            "--estimators", "uf,cart,irf,ksg,mixed-ksg",
            "--trees", "8", "--seed", "7"]
    outputs = []
    for threads in ("1", "4"):
        out = str(tmp_path / f"threads{threads}.csv")
        env = dict(os.environ, UFOREST_THREADS=threads)
        proc = subprocess.run(
            ["uforest", *args, "--out", out],
            env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        with open(out, "rb") as fh:
            outputs.append(fh.read())
    ok = outputs[0] == outputs[1]
    _report("AC11", ok,
            f"1 vs 4 worker threads: {len(outputs[0])}-byte reports "
            f"{'identical' if ok else 'differ'}")
    assert outputs[0] == outputs[1]
