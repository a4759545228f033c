from pathlib import Path

import numpy as np
import pytest

import rashgam as rg
from rashgam.rsetfit import PenalizedLoss, RashomonConfig, approximate
from rashgam.evaluation import fork_rng

DIABETES_CSV = Path(__file__).resolve().parent.parent / "data" / "diabetes.csv"


class QuadraticLoss(PenalizedLoss):
    """L(w) = lstar + (w - a)^T M (w - a); the exact-Rashomon test loss."""

    def __init__(self, M, a, lstar=0.0):
        self.M = np.asarray(M, dtype=float)
        self.a = np.asarray(a, dtype=float)
        self.lstar = float(lstar)

    def value(self, w):
        d = w - self.a
        return self.lstar + float(d @ self.M @ d)

    def value_many(self, W):
        D = np.atleast_2d(W) - self.a
        return self.lstar + np.einsum("si,ij,sj->s", D, self.M, D)

    def gradient(self, w):
        return 2.0 * self.M @ (w - self.a)

    def true_set(self, theta):
        return rg.Ellipsoid(self.M / (theta - self.lstar), self.a)


def random_quadratic(rng, d, lstar=0.2):
    B = rng.normal(size=(d, d))
    M = B @ B.T + 0.5 * np.eye(d)
    return QuadraticLoss(M, rng.normal(size=d), lstar)


def random_spd(rng, d, scale=1.0):
    B = rng.normal(size=(d, d))
    return scale * (B @ B.T + d * 0.1 * np.eye(d))


def random_binned(rng, p=2, bins=3, n=60):
    """Small random binned dataset for derivative and property tests."""
    x = rng.uniform(0, 4, (n, p))
    y = rng.integers(0, 2, n)
    raw = rg.RawDataset(x=x, y=y, feature_names=[f"f{j}" for j in range(p)])
    return rg.bin_dataset(raw, rg.make_quantile_spec(raw, bins))


@pytest.fixture(scope="session")
def diabetes_raw():
    return rg.read_csv(DIABETES_CSV)


@pytest.fixture(scope="session")
def diabetes_data(diabetes_raw):
    return rg.bin_dataset(diabetes_raw, rg.make_quantile_spec(diabetes_raw, 32))


@pytest.fixture(scope="session")
def diabetes_rset(diabetes_data):
    """Full-data Diabetes fit at theta = 1.01 L*; shared by several suites."""
    support = rg.SupportSet.trivial(diabetes_data)
    erm = rg.fit_erm(diabetes_data, support, 0.001)
    cfg = RashomonConfig(
        lambda2=0.001,
        lambda_s=0.001,
        theta_mult=1.01,
        learning_rate=0.003,
        iterations=1000,
        C=20000.0,
    )
    ell, erm, trace = approximate(diabetes_data, support, cfg, fork_rng(42, 0), erm=erm)
    return {
        "data": diabetes_data,
        "support": support,
        "erm": erm,
        "ellipsoid": ell,
        "cfg": cfg,
        "trace": trace,
    }


@pytest.fixture(scope="session")
def diabetes_small_artifacts(tmp_path_factory, diabetes_raw):
    """8-bin Diabetes model + ellipsoid JSON files for service/CLI tests."""
    data = rg.bin_dataset(diabetes_raw, rg.make_quantile_spec(diabetes_raw, 8))
    support = rg.SupportSet.trivial(data)
    erm = rg.fit_erm(data, support, 0.001)
    model = rg.GamModel(
        feature_names=erm.feature_names,
        edges=erm.edges,
        omega0=erm.omega0,
        omega=erm.omega,
        support=support,
        lambda2=0.001,
        lambda_s=0.001,
        pi=erm.pi,
    )
    cfg = RashomonConfig(
        lambda2=0.001,
        lambda_s=0.001,
        theta_mult=1.01,
        learning_rate=0.003,
        iterations=400,
        C=5000.0,
    )
    ell, _, _ = approximate(data, support, cfg, fork_rng(42, 0), erm=erm)
    outdir = tmp_path_factory.mktemp("diabetes_small")
    model.save(outdir / "model.json")
    ell.save(outdir / "ellipsoid.json")
    return {
        "model_path": outdir / "model.json",
        "ellipsoid_path": outdir / "ellipsoid.json",
        "data": data,
        "model": model,
        "ellipsoid": ell,
    }
