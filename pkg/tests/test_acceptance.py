"""Acceptance gate: one test per criterion, each reported in the summary.

Heavy inputs (the 1024-point labelings, the 4096-point probe) are session
fixtures shared across criteria; see conftest.py.
"""

import time

import numpy as np
import pytest

from bruteforce import dense_ellipse_distance, grid_dual_min
from conftest import TIMINGS, record_criterion
from feasmap import storage
from feasmap.config import RunConfig, validate_config
from feasmap.dynamics import BoxSet, PiecewiseConstant, SystemModel, integrate, make_cart_spring
from feasmap.oracle import (
    CART_SPRING_K,
    CART_SPRING_P,
    LabeledSample,
    cart_spring_ocp,
    solve_feasibility,
)
from feasmap.pipeline import run_pipeline
from feasmap.region import build_region, erode_region, extract_boundary
from feasmap.sampling import halton, star_discrepancy
from feasmap.setgeom import EllipsoidSet, boundary_distances, erode_ellipsoid, verify_rci
from feasmap.svm import (
    KernelSpec,
    TrainConfig,
    decision_values,
    dual_objective,
    predict_batch,
    train,
)

N = 1024


def test_criterion_1_origin_feasibility():
    spec = cart_spring_ocp(horizon_T=1.0, mu=0.5)
    start = time.perf_counter()
    result = solve_feasibility(spec, np.zeros(2))
    elapsed = time.perf_counter() - start
    ok = result.label == 1 and result.violation == 0.0 and elapsed < 1.0
    record_criterion(
        1,
        "origin labeled feasible with zero violation in under 1 s",
        ok,
        f"violation={result.violation}, {elapsed:.3f}s",
    )
    assert result.label == 1
    assert result.violation == 0.0
    assert elapsed < 1.0


def test_criterion_2_terminal_level_monotonicity(labels_mu05_T1, labels_mu09_T1):
    count_a = labels_mu05_T1.positive_count
    count_b = labels_mu09_T1.positive_count
    runtime = TIMINGS["labels_mu09_T1"]
    ok = count_b >= count_a - 0.01 * N and runtime <= 600.0
    record_criterion(
        2,
        "larger terminal level keeps at least as many feasible labels",
        ok,
        f"{count_a} -> {count_b}, {runtime:.0f}s",
    )
    assert count_b >= count_a - 0.01 * N
    assert runtime <= 600.0


def test_criterion_3_horizon_monotonicity(labels_mu05_T1, labels_mu05_T2):
    count_a = labels_mu05_T1.positive_count
    count_c = labels_mu05_T2.positive_count
    runtime = TIMINGS["labels_mu05_T2"]
    ok = count_c >= count_a - 0.01 * N and runtime <= 900.0
    record_criterion(
        3,
        "longer horizon keeps at least as many feasible labels",
        ok,
        f"{count_a} -> {count_c}, {runtime:.0f}s",
    )
    assert count_c >= count_a - 0.01 * N
    assert runtime <= 900.0


def test_criterion_4_svm_dual_correctness(model_1024, labels_mu05_T1):
    # small instances against the independent grid minimizer
    worst_gap = 0.0
    rng = np.random.default_rng(11)
    instances = [
        (np.array([[-1.0], [1.0]]), np.array([-1, 1]), 10.0),
        (
            np.array([[-1.0, -0.5], [-0.5, 1.0], [0.8, 0.6], [1.0, -0.8]]),
            np.array([-1, -1, 1, 1]),
            10.0,
        ),
    ]
    for _ in range(6):
        n = int(rng.integers(3, 7))
        X = rng.uniform(-2.0, 2.0, (n, int(rng.integers(1, 4))))
        y = np.ones(n, dtype=int)
        y[rng.permutation(n)[: max(1, n // 2)]] = -1
        instances.append((X, y, float(rng.choice([1.0, 5.0, 10.0]))))
    for X, y, L in instances:
        data = [LabeledSample(x, int(l), 0.0) for x, l in zip(X, y)]
        model = train(
            data, KernelSpec(sigma=0.8), TrainConfig(regularization_L=L, kkt_tol=1e-6)
        )
        worst_gap = max(worst_gap, abs(dual_objective(model) - grid_dual_min(X, y, 0.8, L)))

    # structural constraints on the benchmark-scale model
    equality = abs(float(model_1024.alphas @ model_1024.labels))
    box_ok = bool(
        np.all(model_1024.alphas >= 0.0) and np.all(model_1024.alphas <= 10.0)
    )
    pts = np.array([s.state for s in labels_mu05_T1])
    y_all = np.array([s.label for s in labels_mu05_T1], dtype=float)
    margins = y_all * decision_values(model_1024, pts)
    alphas = np.zeros(len(labels_mu05_T1))
    for sv, a in zip(model_1024.support_points, model_1024.alphas):
        alphas[int(np.argmin(((pts - sv) ** 2).sum(axis=1)))] = a
    tol = 1e-3
    kkt_ok = bool(
        np.all(margins[alphas <= 1e-12] >= 1.0 - tol)
        and np.all(margins[alphas >= 10.0 - 1e-12] <= 1.0 + tol)
        and np.all(
            np.abs(margins[(alphas > 1e-12) & (alphas < 10.0 - 1e-12)] - 1.0) <= tol
        )
    )
    ok = worst_gap <= 1e-4 and equality <= 1e-8 and box_ok and kkt_ok
    record_criterion(
        4,
        "SMO dual matches brute force; constraints and KKT hold",
        ok,
        f"gap={worst_gap:.2e}, equality={equality:.2e}",
    )
    assert worst_gap <= 1e-4
    assert equality <= 1e-8
    assert box_ok
    assert kkt_ok


def test_criterion_5_strictness(model_1024, labels_mu05_T1):
    region = build_region(model_1024, labels_mu05_T1.samples)
    pts = np.array([s.state for s in labels_mu05_T1])
    lab = np.array([s.label for s in labels_mu05_T1])
    phi = decision_values(model_1024, pts)
    inner_leaks = int(((lab == -1) & (phi > region.eps_plus)).sum())
    outer_leaks = int(((lab == 1) & (phi < region.eps_minus)).sum())
    ok = inner_leaks == 0 and outer_leaks == 0
    record_criterion(
        5,
        "no infeasible sample in the inner set, none feasible in the outer",
        ok,
        f"leaks={inner_leaks}+{outer_leaks}",
    )
    assert inner_leaks == 0
    assert outer_leaks == 0


def test_criterion_6_convergence_trend(
    model_256, model_1024, labels_mu05_T1, probe_points, probe_labels
):
    X = probe_points.points
    y = probe_labels.labels
    acc_256 = float((predict_batch(model_256, X) == y).mean())
    acc_1024 = float((predict_batch(model_1024, X) == y).mean())

    region_256 = build_region(model_256, labels_mu05_T1.samples[:256])
    region_1024 = build_region(model_1024, labels_mu05_T1.samples)
    phi_256 = decision_values(model_256, X)
    phi_1024 = decision_values(model_1024, X)
    band_256 = float(
        ((phi_256 <= region_256.eps_plus) & (phi_256 >= region_256.eps_minus)).mean()
    )
    band_1024 = float(
        ((phi_1024 <= region_1024.eps_plus) & (phi_1024 >= region_1024.eps_minus)).mean()
    )
    ok = acc_1024 >= acc_256 - 0.02 and band_1024 <= band_256 + 0.02
    record_criterion(
        6,
        "held-out accuracy nondecreasing and band volume nonincreasing in N",
        ok,
        f"acc {acc_256:.4f}->{acc_1024:.4f}, band {band_256:.4f}->{band_1024:.4f}",
    )
    assert acc_1024 >= acc_256 - 0.02
    assert band_1024 <= band_256 + 0.02


def test_criterion_7_rci_invariance():
    cart = make_cart_spring()
    ell = EllipsoidSet(CART_SPRING_P, 0.5)
    lam_max = float(np.linalg.eigvalsh(CART_SPRING_P).max())
    eroded = erode_ellipsoid(ell, 0.01)
    expected_level = (np.sqrt(0.5) - 0.01 * np.sqrt(lam_max)) ** 2
    start = time.perf_counter()
    report = verify_rci(cart, eroded, CART_SPRING_K, n_trials=100, horizon=10.0)
    elapsed = time.perf_counter() - start
    level_ok = eroded.eroded_level == pytest.approx(expected_level, rel=1e-12)
    ok = level_ok and report.exits == 0 and elapsed < 60.0
    record_criterion(
        7,
        "eroded terminal set is invariant under the local feedback",
        ok,
        f"mu0={eroded.eroded_level:.6f}, exits={report.exits}/{report.n_runs}, {elapsed:.1f}s",
    )
    assert level_ok
    assert report.exits == 0
    assert elapsed < 60.0


def test_criterion_8_erosion_geometry():
    ell = EllipsoidSet(CART_SPRING_P, 0.5)
    w_bar = 0.05
    eroded = erode_ellipsoid(ell, w_bar)
    samples = eroded.shrunk.sample_inside(10_000, seed=0)
    dists = boundary_distances(ell, samples)
    margin_ok = bool(dists.min() >= w_bar - 1e-9)

    queries = ell.sample_inside(100, seed=1)
    computed = boundary_distances(ell, queries)
    worst = 0.0
    for q, d in zip(queries, computed):
        worst = max(worst, abs(d - dense_ellipse_distance(CART_SPRING_P, 0.5, q)))
    ok = margin_ok and worst <= 1e-6
    record_criterion(
        8,
        "eroded points keep the margin; distances match dense sampling",
        ok,
        f"min dist={dists.min():.6f}, oracle gap={worst:.2e}",
    )
    assert margin_ok
    assert worst <= 1e-6


def test_criterion_9_robust_nesting(model_1024, labels_mu05_T1, cart):
    region = build_region(model_1024, labels_mu05_T1.samples)
    extract_boundary(region, cart.state_set, resolution=128)
    rng = np.random.default_rng(5)
    probes = rng.uniform(-2.0, 2.0, (1000, 2))
    inner = decision_values(model_1024, probes) > region.eps_plus
    counts = []
    nested = True
    for w_bar in (0.0, 0.01, 0.1):
        flags = erode_region(region, w_bar)(probes)
        nested &= bool(np.all(~flags | inner))
        counts.append(int(flags.sum()))
    shrinking = counts[0] >= counts[1] >= counts[2]
    ok = nested and shrinking
    record_criterion(
        9,
        "robust membership implies inner and shrinks with the margin",
        ok,
        f"counts={counts}",
    )
    assert nested
    assert shrinking


def test_criterion_10_sampling_and_integrator_quality():
    disc = {n: star_discrepancy(halton(n, 2, 1)).value for n in (64, 256, 1024)}
    disc_ok = disc[1024] < disc[256] < disc[64]

    decay = SystemModel(
        n=1,
        m=1,
        rhs=lambda x, u, w: -x,
        state_set=BoxSet([-10.0], [10.0]),
        input_set=BoxSet([-1.0], [1.0]),
    )
    errs = {}
    for dt in (0.02, 0.01, 0.005):
        traj = integrate(
            decay, [1.0], PiecewiseConstant.constant([0.0], 1.0), None, 1.0, dt
        )
        errs[dt] = abs(traj.final_state[0] - np.exp(-1.0))
    r1 = errs[0.02] / errs[0.01]
    r2 = errs[0.01] / errs[0.005]
    rk_ok = 12.0 <= r1 <= 20.0 and 12.0 <= r2 <= 20.0
    ok = disc_ok and rk_ok
    record_criterion(
        10,
        "Halton discrepancy decreases and RK4 shows fourth-order decay",
        ok,
        f"D={disc[64]:.4f}/{disc[256]:.4f}/{disc[1024]:.4f}, ratios={r1:.1f},{r2:.1f}",
    )
    assert disc_ok
    assert rk_ok


def test_criterion_11_determinism(tmp_path):
    text = """
model = cart_spring
n = 128
horizon_T = 1.0
mu = 0.5
sigma = 0.8
regularization_L = 10.0
boundary_resolution = 32
grid_resolution = 40
seed = 0
"""
    base = validate_config(text)
    runs = []
    for name in ("d1", "d2"):
        config = RunConfig(**{**base.to_dict(), "out_dir": str(tmp_path / name)})
        runs.append(run_pipeline(config))
    bytes_a = runs[0].artifact("labels.csv").read_bytes()
    bytes_b = runs[1].artifact("labels.csv").read_bytes()
    labels_ok = bytes_a == bytes_b

    # round-trip: retrain from the labels file, compare to the persisted model
    data = storage.read_labels_csv(runs[0].artifact("labels.csv"))
    retrained = train(
        data, KernelSpec(sigma=0.8), TrainConfig(regularization_L=10.0, seed=0)
    )
    loaded = storage.load_svm_model(runs[0].artifact("model.svm"))
    probes = halton(512, 2, 1) * 4.0 - 2.0
    gap = float(
        np.abs(decision_values(retrained, probes) - decision_values(loaded, probes)).max()
    )
    ok = labels_ok and gap <= 1e-12
    record_criterion(
        11,
        "identical runs are byte-identical; persistence is exact",
        ok,
        f"labels identical={labels_ok}, round-trip gap={gap:.2e}",
    )
    assert labels_ok
    assert gap <= 1e-12
