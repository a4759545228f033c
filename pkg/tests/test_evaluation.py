import numpy as np
import pytest

import rashgam as rg
from rashgam.errors import RashgamError
from rashgam.evaluation import (
    bootstrap_models,
    estimate_precision,
    fork_rng,
    method_ratio_report,
    mvee_fit,
    recall_proxy,
    sphere_baseline,
    tradeoff_curve,
)
from rashgam.rsetfit import RashomonConfig
from conftest import QuadraticLoss, random_binned, random_spd


def quad_setup(rng, d=3, lstar=0.2, slack=0.1):
    quad = QuadraticLoss(random_spd(rng, d), rng.normal(size=d), lstar)
    theta = lstar + slack
    return quad, theta, quad.true_set(theta)


def test_precision_exact_quadratic_is_one():
    rng = np.random.default_rng(0)
    quad, theta, truth = quad_setup(rng)
    est = estimate_precision(truth, quad.value_many, theta, 10_000, fork_rng(1, 0))
    assert est.precision == 1.0
    assert est.n_inside == est.n_samples == 10_000


def test_precision_rescaled_matches_measure_ratio():
    rng = np.random.default_rng(1)
    quad, theta, truth = quad_setup(rng, d=2)
    blown = truth.rescale(10.0)
    est = estimate_precision(blown, quad.value_many, theta, 10_000, fork_rng(2, 0))
    assert est.precision == pytest.approx(10.0**-2, abs=3 * est.half_width + 3e-3)


def test_precision_half_width_formula():
    rng = np.random.default_rng(2)
    quad, theta, truth = quad_setup(rng, d=2)
    est = estimate_precision(truth.rescale(1.2), quad.value_many, theta, 5000, fork_rng(3, 0))
    p = est.precision
    assert est.half_width == pytest.approx(1.96 * np.sqrt(p * (1 - p) / 5000))


def test_recall_proxy_algebra():
    assert recall_proxy(0.7, 1.5, 1.5) == pytest.approx(0.7)
    assert recall_proxy(0.5, np.log(2.0), 0.0) == pytest.approx(1.0)
    assert recall_proxy(0.9, 1.0, 0.0) > 1.0  # flags an inconsistent volume


def test_recall_proxy_against_rejection_oracle():
    rng = np.random.default_rng(3)
    quad, theta, truth = quad_setup(rng, d=2)
    approx = truth.rescale(1.4)  # sticks out; known volume ratio
    est = estimate_precision(approx, quad.value_many, theta, 200_000, fork_rng(4, 0))
    recall = recall_proxy(est.precision, approx.log_volume(), truth.log_volume())
    # oracle: fraction of the true set covered, by sampling the true set
    W = truth.sample(fork_rng(4, 1), 200_000)
    _, q = approx.contains(W)
    covered = float(np.mean(q <= 1.0))
    assert recall == pytest.approx(covered, abs=0.02)


def test_sphere_baseline_volume_and_shape():
    d = 3
    center = np.zeros(d)
    log_unit = rg.Ellipsoid(np.eye(d), center).log_volume()
    ball = sphere_baseline(center, log_unit)
    np.testing.assert_allclose(ball.Q, np.eye(d), atol=1e-12)
    target = log_unit + 1.7
    assert sphere_baseline(center, target).log_volume() == pytest.approx(target, abs=1e-10)


def test_sphere_worse_than_shape_matched_on_anisotropic_set():
    rng = np.random.default_rng(5)
    M = np.diag([50.0, 1.0])
    quad = QuadraticLoss(M, np.zeros(2), 0.0)
    theta = 0.1
    truth = quad.true_set(theta)
    ball = sphere_baseline(truth.center, truth.log_volume())
    est_true = estimate_precision(truth, quad.value_many, theta, 20_000, fork_rng(6, 0))
    est_ball = estimate_precision(ball, quad.value_many, theta, 20_000, fork_rng(6, 1))
    assert est_true.precision > est_ball.precision


def test_bootstrap_models_finite_and_sized():
    rng = np.random.default_rng(6)
    data = random_binned(rng, p=2, bins=3, n=120)
    support = rg.SupportSet.trivial(data)
    V = bootstrap_models(data, support, 16, 0.01, fork_rng(7, 0))
    assert V.shape == (16, 1 + data.m)
    assert np.isfinite(V).all()


def test_bootstrap_survives_rare_bins():
    # a bin holding a single sample empties in most resamples
    x = np.concatenate([np.full(40, 0.5), np.full(40, 1.5), [2.5]])
    y = np.concatenate([np.zeros(40, dtype=int), np.ones(40, dtype=int), [1]])
    raw = rg.RawDataset(x=x[:, None], y=y, feature_names=["f"])
    data = rg.bin_dataset(raw, rg.BinningSpec([[0, 1, 2, 3]]))
    V = bootstrap_models(data, rg.SupportSet.trivial(data), 12, 0.01, fork_rng(8, 0))
    assert np.isfinite(V).all()


def test_bootstrap_spread_shrinks_with_n():
    rng = np.random.default_rng(9)

    def spread(n):
        x = rng.uniform(0, 2, n)
        z = np.where(x <= 1.0, -0.7, 0.7)
        y = (rng.uniform(size=n) < 1 / (1 + np.exp(-z))).astype(int)
        raw = rg.RawDataset(x=x[:, None], y=y, feature_names=["f"])
        data = rg.bin_dataset(raw, rg.BinningSpec([[0, 1, 2]]))
        V = bootstrap_models(data, rg.SupportSet.trivial(data), 40, 0.01, fork_rng(10, n))
        return float(np.trace(np.cov(V.T)))

    assert spread(4000) < spread(150)


def test_mvee_recovers_known_ellipsoid():
    rng = np.random.default_rng(10)
    d = 3
    truth = rg.Ellipsoid(random_spd(rng, d), rng.normal(size=d))
    # points on the boundary: unit directions through the eigen map
    u = rng.standard_normal((400, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    lam, V = np.linalg.eigh(truth.Q)
    pts = truth.center + (u / np.sqrt(lam)) @ V.T
    fitted, info = mvee_fit(pts, C=1000.0, learning_rate=0.01, iterations=2000)
    assert info["coverage"] >= 0.99
    assert fitted.log_volume() == pytest.approx(truth.log_volume(), abs=np.log(1.05))


def test_mvee_identical_points_ridge_path():
    pts = np.tile([1.0, 2.0], (30, 1))
    fitted, info = mvee_fit(pts, iterations=50)
    assert info["ridge_added"]
    assert np.isfinite(fitted.log_volume())


def test_mvee_requires_enough_points():
    with pytest.raises(RashgamError):
        mvee_fit(np.zeros((2, 3)))


def test_tradeoff_curve_monotone_and_limits():
    rng = np.random.default_rng(11)
    quad, theta, truth = quad_setup(rng, d=2)
    rows = tradeoff_curve(truth, quad.value_many, theta, [0.2, 1.0, 2.0, 4.0], 20_000, seed=5)
    precs = [p for _, p, _ in rows]
    hws = [h for _, _, h in rows]
    assert precs[0] == 1.0  # deep shrink sits inside
    for k in range(len(precs) - 1):
        assert precs[k] >= precs[k + 1] - 2 * (hws[k] + hws[k + 1])
    # the quadratic case has an analytic containment ratio
    assert precs[2] == pytest.approx(2.0**-2, abs=0.02)
    assert precs[3] == pytest.approx(4.0**-2, abs=0.01)


def test_tradeoff_cells_reproducible():
    rng = np.random.default_rng(13)
    quad, theta, truth = quad_setup(rng, d=2)
    a = tradeoff_curve(truth, quad.value_many, theta, [0.5, 1.5], 5000, seed=9)
    b = tradeoff_curve(truth, quad.value_many, theta, [0.5, 1.5], 5000, seed=9)
    assert a == b


def test_shipped_config_soundness(diabetes_small_artifacts):
    # <= 5% of fresh draws may exceed theta on any shipped example config
    art = diabetes_small_artifacts
    data = art["data"]
    model = art["model"]
    ell = art["ellipsoid"]
    support = model.support
    tl = rg.TotalLossEvaluator(data, support, model.lambda2, model.lambda_s)
    est = estimate_precision(ell, tl, ell.meta["theta"], 10_000, fork_rng(99, 0))
    assert est.precision >= 0.95


def test_method_ratio_smoke():
    rng = np.random.default_rng(12)
    n = 800
    x = rng.uniform(0, 4, (n, 2))
    z = 0.25 * np.floor(x[:, 0]) - 0.25 * np.floor(x[:, 1])
    y = (rng.uniform(size=n) < 1 / (1 + np.exp(-z))).astype(int)
    raw = rg.RawDataset(x=x, y=y, feature_names=["a", "b"])
    data = rg.bin_dataset(raw, rg.BinningSpec([[0, 1, 2, 3, 4], [0, 1, 2, 3, 4]]))
    support = rg.SupportSet.trivial(data)
    cfg = RashomonConfig(lambda2=0.01, lambda_s=0.001, theta_mult=1.05,
                         learning_rate=0.01, iterations=150, C=2000)
    rows, skipped = method_ratio_report(data, support, cfg, K_tilde=7, n_plans=3, seed=3,
                                        n_precision_samples=1000)
    assert rows or skipped
    for r in rows:
        assert r.time_method2 < r.time_method1
        assert r.u > 0
        assert 0 < r.volume_ratio < 10
