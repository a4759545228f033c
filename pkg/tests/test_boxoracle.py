import numpy as np
import pytest

import rashgam as rg
from rashgam.boxoracle import (
    box_volume,
    bracketing_center_search,
    coord_intervals,
    get_bounds,
    segment_ends,
)
from rashgam.errors import RashgamError
from rashgam.rsetfit import GamObjective
from conftest import QuadraticLoss, random_binned


def quad_1d():
    return QuadraticLoss(np.array([[1.0]]), np.array([1.0]), 0.0)  # (w - 1)^2


def test_get_bounds_crosses_threshold():
    obj = quad_1d()
    w = np.array([1.0])
    right = get_bounds(obj, 0, w, theta=0.25, delta=0.1, left=False)
    assert right > 1.5
    assert obj.value(np.array([right])) > 0.25


def test_get_bounds_left_mirrors_right_on_symmetric_loss():
    obj = quad_1d()
    w = np.array([1.0])
    right = get_bounds(obj, 0, w, theta=0.25, delta=0.1, left=False)
    left = get_bounds(obj, 0, w, theta=0.25, delta=0.1, left=True)
    assert left == pytest.approx(2.0 - right, abs=1e-12)


def test_segment_ends_analytic_roots():
    obj = quad_1d()
    iv = segment_ends(obj, 0, np.array([1.0]), theta=0.25, delta=1e-6)
    assert iv.left == pytest.approx(0.5, abs=2e-6)
    assert iv.right == pytest.approx(1.5, abs=2e-6)
    # in-set guarantee at the returned endpoints
    assert obj.value(np.array([iv.left])) <= 0.25
    assert obj.value(np.array([iv.right])) <= 0.25
    # just beyond the tolerance the loss exceeds theta
    assert obj.value(np.array([iv.left - 2e-6])) > 0.25
    assert obj.value(np.array([iv.right + 2e-6])) > 0.25


def test_segment_ends_requires_inside_start():
    obj = quad_1d()
    with pytest.raises(RashgamError):
        segment_ends(obj, 0, np.array([9.0]), theta=0.25, delta=1e-6)


def test_segment_ends_degenerate_at_exact_threshold():
    # theta equal to the loss at the minimizer leaves only the point itself
    obj = quad_1d()
    iv = segment_ends(obj, 0, np.array([1.0]), theta=0.0, delta=1e-6)
    assert iv.right - iv.left <= 2e-6
    assert iv.left == pytest.approx(1.0, abs=2e-6)


def test_segment_matches_grid_scan_on_logistic_section():
    rng = np.random.default_rng(0)
    data = random_binned(rng, p=1, bins=1, n=120)
    obj = GamObjective(data, rg.SupportSet.trivial(data), 0.05)
    w = np.array([0.0, 0.0])
    theta = obj.value(w) + 0.02
    iv = segment_ends(obj, 1, w, theta, delta=1e-6)
    grid = np.linspace(iv.left - 0.5, iv.right + 0.5, 200_001)
    vals = np.array([obj.value(np.array([0.0, t])) for t in grid[:: 1000]])
    inside = grid[::1000][vals <= theta]
    assert iv.left == pytest.approx(inside.min(), abs=1e-2)
    assert iv.right == pytest.approx(inside.max(), abs=1e-2)


def test_segment_monotone_in_theta():
    obj = quad_1d()
    small = segment_ends(obj, 0, np.array([1.0]), theta=0.1, delta=1e-7)
    large = segment_ends(obj, 0, np.array([1.0]), theta=0.3, delta=1e-7)
    assert large.left <= small.left
    assert large.right >= small.right


def test_box_volume_separable_quadratic():
    d = 3
    obj = QuadraticLoss(np.eye(d), np.array([0.5, -1.0, 2.0]), 0.0)
    v = box_volume(obj, obj.a.copy(), theta=1.0, delta=1e-7)
    assert v == pytest.approx(2.0**d, rel=1e-4)


def test_coord_interval_widths_nonnegative():
    rng = np.random.default_rng(1)
    data = random_binned(rng, p=2, bins=2, n=80)
    obj = GamObjective(data, rg.SupportSet.trivial(data), 0.05)
    w = np.zeros(obj.dim)
    theta = obj.value(w) + 0.01
    for iv in coord_intervals(obj, w, theta, 1e-6):
        assert iv.width >= 0
        assert iv.left <= w[iv.j] <= iv.right


def test_center_search_separable_quadratic():
    d = 3
    a = np.array([0.5, -1.0, 2.0])
    obj = QuadraticLoss(np.eye(d), a, 0.0)
    start = a + np.array([0.6, -0.5, 0.4])
    w, v = bracketing_center_search(obj, start, theta=1.0, delta=1e-5, max_iter=6)
    np.testing.assert_allclose(w, a, atol=5e-3)
    assert v == pytest.approx(2.0**d, rel=1e-3)


def test_center_search_volume_non_decreasing():
    d = 2
    M = np.array([[1.0, 0.6], [0.6, 1.0]])
    obj = QuadraticLoss(M, np.zeros(d), 0.0)
    start = np.array([0.5, -0.3])
    v0 = box_volume(obj, start, theta=1.0, delta=1e-5)
    _, v1 = bracketing_center_search(obj, start, theta=1.0, delta=1e-5, max_iter=4)
    assert v1 >= v0 - 1e-12


def test_center_search_correlated_quadratic_vs_grid():
    M = np.array([[1.0, 0.7], [0.7, 2.0]])
    obj = QuadraticLoss(M, np.array([0.2, -0.1]), 0.0)
    theta = 1.0
    _, v = bracketing_center_search(
        obj, obj.a + np.array([0.3, 0.2]), theta=theta, delta=1e-5, max_iter=8
    )
    # exhaustive grid over candidate centers inside the set
    best = 0.0
    for x in np.linspace(-1.0, 1.4, 49):
        for y in np.linspace(-0.9, 0.7, 49):
            w = np.array([x, y])
            if obj.value(w) <= theta:
                best = max(best, box_volume(obj, w, theta, 1e-5))
    assert v >= 0.95 * best
