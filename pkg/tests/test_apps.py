import numpy as np
import pytest
from scipy.optimize import LinearConstraint, minimize

import rashgam as rg
from rashgam.apps import CoordLayout
from rashgam.errors import EnumerationGuardError
from conftest import random_spd


def layout_one_feature(block_pi, dim=None, start=1):
    """Single-feature layout; coordinate 0 is the intercept unless start=0."""
    B = len(block_pi)
    dim = dim if dim is not None else start + B
    pi = np.zeros(dim)
    pi[start : start + B] = block_pi
    return CoordLayout(feature_names=["f"], blocks=[(start, start + B)], pi=pi)


def test_vi_point_examples():
    lay = layout_one_feature([0.5, 0.5])
    assert rg.vi_point(lay, np.array([9.9, 1.0, -3.0]), 0) == pytest.approx(2.0)
    assert rg.vi_point(lay, np.zeros(3), 0) == 0.0
    w = np.array([0.0, 0.7, -0.2])
    assert rg.vi_point(lay, 2 * w, 0) == pytest.approx(2 * rg.vi_point(lay, w, 0))


def test_vi_lower_zero_feasible():
    lay = layout_one_feature([0.5, 0.5])
    e = rg.Ellipsoid(np.eye(3), np.array([0.0, 0.3, 0.0]))
    lo, witness = rg.vi_lower(e, lay, 0)
    assert lo == 0.0
    _, q = e.contains(witness)
    assert q <= 1.0 + 1e-8
    np.testing.assert_allclose(witness[1:], 0.0, atol=1e-12)


def test_vi_lower_far_block_matches_sampling():
    # block pushed away from zero: the weighted l1 minimum is positive
    lay = layout_one_feature([0.5, 0.5])
    e = rg.Ellipsoid(np.eye(3), np.array([0.0, 5.0, 0.0]))
    lo, witness = rg.vi_lower(e, lay, 0)
    rng = np.random.default_rng(0)
    W = e.sample(rng, 1_000_000)
    sampled = (np.abs(W[:, 1:]) @ lay.pi[1:]).min()
    assert lo <= sampled + 1e-9
    assert sampled - lo <= 1e-2
    _, q = e.contains(witness)
    assert q <= 1.0 + 1e-8


def test_vi_upper_closed_form_two_coords():
    # both coordinates belong to the feature; no intercept in this ellipsoid
    lay = layout_one_feature([0.5, 0.5], start=0)
    e = rg.Ellipsoid(np.eye(2), np.array([0.3, 0.0]))
    hi, witness = rg.vi_upper(e, lay, 0)
    assert hi == pytest.approx(0.15 + np.sqrt(0.5), abs=1e-10)
    rng = np.random.default_rng(1)
    W = e.sample(rng, 1_000_000)
    sampled = (np.abs(W) @ lay.pi).max()
    assert hi >= sampled - 1e-9
    assert hi - sampled <= 1e-2
    _, q = e.contains(witness)
    assert q <= 1.0 + 1e-8


def test_vi_upper_single_bin_exact():
    rng = np.random.default_rng(2)
    Q = random_spd(rng, 3)
    e = rg.Ellipsoid(Q, np.array([0.1, 0.8, -0.2]))
    lay = layout_one_feature([0.6], dim=3)  # block = coordinate 1 only
    hi, _ = rg.vi_upper(e, lay, 0)
    Qinv = np.linalg.inv(Q)
    expected = 0.6 * (abs(e.center[1]) + np.sqrt(Qinv[1, 1]))
    assert hi == pytest.approx(expected, abs=1e-10)


def test_vi_fix_others_bounds_tighter():
    rng = np.random.default_rng(3)
    Q = random_spd(rng, 4)
    e = rg.Ellipsoid(Q, np.array([0.05, 0.4, -0.3, 0.2]))
    lay = CoordLayout(feature_names=["f", "g"], blocks=[(1, 3), (3, 4)],
                      pi=np.array([0.0, 0.5, 0.5, 1.0]))
    hi_free, _ = rg.vi_upper(e, lay, 0, fix_others=False)
    hi_fix, _ = rg.vi_upper(e, lay, 0, fix_others=True)
    assert hi_fix <= hi_free + 1e-10
    lo_free, _ = rg.vi_lower(e, lay, 0, fix_others=False)
    lo_fix, _ = rg.vi_lower(e, lay, 0, fix_others=True)
    assert lo_fix >= lo_free - 1e-10


def test_vi_bracket_invariant_random_instances():
    rng = np.random.default_rng(4)
    for _ in range(20):
        d = 4
        Q = random_spd(rng, d)
        center = 0.5 * rng.normal(size=d)
        e = rg.Ellipsoid(Q, center)
        pi_block = rng.uniform(0.1, 1.0, size=2)
        lay = CoordLayout(feature_names=["f"], blocks=[(1, 3)],
                          pi=np.concatenate([[0.0], pi_block, [0.0]]))
        for fix in (False, True):
            lo, wlo = rg.vi_lower(e, lay, 0, fix)
            hi, whi = rg.vi_upper(e, lay, 0, fix)
            mid = rg.vi_point(lay, center, 0)
            assert lo <= mid + 1e-9
            assert hi >= mid - 1e-9
            for w in (wlo, whi):
                _, q = e.contains(w)
                assert q <= 1.0 + 1e-8


def test_vi_scale_monotonicity():
    rng = np.random.default_rng(5)
    Q = random_spd(rng, 3)
    e = rg.Ellipsoid(Q, np.array([0.0, 0.8, -0.5]))
    lay = layout_one_feature([0.5, 0.5])
    big = e.rescale(1.5)
    lo_small, _ = rg.vi_lower(e, lay, 0)
    lo_big, _ = rg.vi_lower(big, lay, 0)
    hi_small, _ = rg.vi_upper(e, lay, 0)
    hi_big, _ = rg.vi_upper(big, lay, 0)
    assert hi_big >= hi_small - 1e-10
    assert lo_big <= lo_small + 1e-10


def test_vi_enumeration_guard():
    d = 22
    e = rg.Ellipsoid(np.eye(d), np.zeros(d))
    lay = CoordLayout(feature_names=["f"], blocks=[(1, 22)], pi=np.ones(d) / d)
    with pytest.raises(EnumerationGuardError):
        rg.vi_upper(e, lay, 0)


def test_monotone_center_already_feasible():
    lay = layout_one_feature([0.5, 0.5])
    e = rg.Ellipsoid(np.eye(3), np.array([0.1, -0.5, 0.5]))
    w, q, feasible = rg.monotone_fit(e, lay, [(0, "increasing")])
    np.testing.assert_allclose(w, e.center, atol=1e-12)
    assert q == 0.0
    assert feasible


def test_monotone_halfspace_projection():
    lay = layout_one_feature([0.5, 0.5])
    e = rg.Ellipsoid(np.eye(3), np.array([0.0, 1.0, 0.0]))
    w, q, feasible = rg.monotone_fit(e, lay, [(0, "increasing")])
    np.testing.assert_allclose(w[1:], [0.5, 0.5], atol=1e-10)
    assert q == pytest.approx(0.5, abs=1e-10)
    assert feasible
    assert w[1] == w[2]  # exact tie


def test_monotone_matches_trust_constr_oracle():
    rng = np.random.default_rng(6)
    for _ in range(8):
        d = 5  # intercept + 4-bin feature
        Q = random_spd(rng, d)
        center = rng.normal(size=d)
        e = rg.Ellipsoid(Q, center)
        lay = layout_one_feature([0.25] * 4)
        w, q, _ = rg.monotone_fit(e, lay, [(0, "increasing")])
        # oracle: generic solver on the same QP
        A = np.zeros((3, d))
        for k in range(3):
            A[k, 1 + k] = 1.0
            A[k, 2 + k] = -1.0
        res = minimize(
            lambda v: float((v - center) @ Q @ (v - center)),
            np.zeros(d),
            jac=lambda v: 2.0 * Q @ (v - center),
            constraints=[LinearConstraint(A, -np.inf, 0.0)],
            method="trust-constr",
            options={"gtol": 1e-12, "xtol": 1e-14, "maxiter": 2000},
        )
        assert q == pytest.approx(res.fun, abs=1e-6)
        # KKT residual: gradient balanced by active constraint normals
        grad = 2.0 * Q @ (w - center)
        act = [k for k in range(3) if abs(w[1 + k] - w[2 + k]) < 1e-12]
        if act:
            Gact = A[act].T
            lam, *_ = np.linalg.lstsq(Gact, -grad, rcond=None)
            resid = Gact @ lam + grad
            assert np.abs(resid).max() <= 1e-8
            assert lam.min() >= -1e-9
        else:
            assert np.abs(grad).max() <= 1e-8
        # exact order constraints
        assert (np.diff(w[1:]) >= -1e-10).all()


def test_monotone_beats_filtered_samples():
    rng = np.random.default_rng(7)
    d = 4
    Q = random_spd(rng, d)
    center = rng.normal(size=d) * 0.8
    e = rg.Ellipsoid(Q, center)
    lay = layout_one_feature([1 / 3] * 3)
    w, q, feasible = rg.monotone_fit(e, lay, [(0, "decreasing")])
    W = e.sample(rng, 10_000)
    ok = (np.diff(W[:, 1:], axis=1) <= 1e-12).all(axis=1)
    if ok.any():
        qs = e.qform(W[ok])
        assert q <= qs.min() + 1e-9


def test_monotone_two_features_and_fixed():
    rng = np.random.default_rng(8)
    d = 5
    Q = random_spd(rng, d)
    e = rg.Ellipsoid(Q, rng.normal(size=d))
    lay = CoordLayout(feature_names=["f", "g"], blocks=[(1, 3), (3, 5)],
                      pi=np.array([0.0, 0.5, 0.5, 0.5, 0.5]))
    w, q, _ = rg.monotone_fit(
        e, lay, [(0, "increasing"), (1, "decreasing")], fixed=[(0, 0.12)]
    )
    assert w[1] <= w[2] + 1e-10
    assert w[3] >= w[4] - 1e-10
    assert w[0] == pytest.approx(0.12, abs=1e-14)


def test_project_identity_inside():
    e = rg.Ellipsoid(np.eye(2), np.zeros(2))
    w, dist, inside = rg.project_edit(e, np.array([0.1, 0.2]))
    assert inside
    assert dist == 0.0
    np.testing.assert_allclose(w, [0.1, 0.2])


def test_project_radial():
    e = rg.Ellipsoid(np.eye(2), np.zeros(2))
    w, dist, inside = rg.project_edit(e, np.array([2.0, 0.0]))
    assert not inside
    np.testing.assert_allclose(w, [1.0, 0.0], atol=1e-10)
    assert dist == pytest.approx(1.0, abs=1e-10)


def test_project_kkt_and_sampling_dominance():
    rng = np.random.default_rng(9)
    d = 5
    Q = random_spd(rng, d)
    center = rng.normal(size=d)
    e = rg.Ellipsoid(Q, center)
    req = center + 3.0 * rng.normal(size=d)
    w, dist, inside = rg.project_edit(e, req)
    assert not inside
    _, q = e.contains(w)
    assert q == pytest.approx(1.0, abs=1e-8)
    # KKT: (w - req) + mu Q (w - center) = 0 for some mu > 0
    lhs = w - req
    rhs = Q @ (w - center)
    mu = -(lhs @ rhs) / (rhs @ rhs)
    assert np.abs(lhs + mu * rhs).max() <= 1e-8
    assert mu >= 0.0  # outward projection has a nonnegative multiplier
    W = e.sample(rng, 100_000)
    assert dist <= np.linalg.norm(W - req, axis=1).min() + 1e-9


def test_project_distance_monotone_along_ray():
    rng = np.random.default_rng(10)
    Q = random_spd(rng, 3)
    e = rg.Ellipsoid(Q, np.zeros(3))
    direction = rng.normal(size=3)
    dists = []
    for t in (2.0, 3.0, 5.0):
        _, dist, _ = rg.project_edit(e, t * direction)
        dists.append(dist)
    assert dists[0] <= dists[1] <= dists[2]


def test_jump_analysis_clear_downward():
    lay = layout_one_feature([0.5, 0.5])
    e = rg.Ellipsoid(1e8 * np.eye(3), np.array([0.0, 1.0, 0.2]))  # tiny set
    rep = rg.jump_analysis(e, lay, 0, 0, 2000, 0.0, np.random.default_rng(11))
    assert rep.fraction_down == pytest.approx(1.0)
    assert rep.fraction_down + rep.fraction_up + rep.fraction_flat == pytest.approx(1.0, abs=1e-12)


def test_jump_analysis_reproducible():
    rng_spec = 13
    lay = layout_one_feature([0.5, 0.5])
    e = rg.Ellipsoid(np.eye(3), np.array([0.0, 0.1, 0.0]))
    a = rg.jump_analysis(e, lay, 0, 0, 5000, 0.05, np.random.default_rng(rng_spec))
    b = rg.jump_analysis(e, lay, 0, 0, 5000, 0.05, np.random.default_rng(rng_spec))
    assert a == b
    assert a.fraction_down + a.fraction_up + a.fraction_flat == pytest.approx(1.0, abs=1e-12)
