"""GAM representation and all loss / derivative computations.

A model is an intercept plus one step function per feature.  Coordinates
follow a single convention everywhere: index 0 is the intercept, indices
1..m are the flat bin columns of the binned dataset.  A *support set*
partitions each feature's bins into contiguous runs of equal coefficients;
fixing the support reduces the model to one free coordinate per run.
"""

import json
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .binning import BinnedDataset
from .errors import ConvergenceError, DataError, DimensionMismatchError


@dataclass(frozen=True, eq=False)
class SupportSet:
    """Per feature, the lengths of its runs of tied adjacent bins.

    ``runs[j]`` sums to the bin count of feature j.  The trivial support has
    every bin in its own run.
    """

    runs: list[np.ndarray]

    def __post_init__(self):
        clean = []
        for j, r in enumerate(self.runs):
            r = np.asarray(r, dtype=np.int64)
            if r.ndim != 1 or r.size < 1 or (r < 1).any():
                raise DataError(f"feature {j}: run lengths must be positive")
            clean.append(r)
        object.__setattr__(self, "runs", clean)

    @property
    def p(self) -> int:
        return len(self.runs)

    @property
    def size(self) -> int:
        """K: total number of runs across features."""
        return sum(r.size for r in self.runs)

    @property
    def run_starts(self) -> list[np.ndarray]:
        return [np.concatenate([[0], np.cumsum(r)])[:-1] for r in self.runs]

    def run_of_bin(self) -> np.ndarray:
        """Flat bin column -> global run index (0..K-1)."""
        out = []
        offset = 0
        for r in self.runs:
            out.append(np.repeat(np.arange(offset, offset + r.size), r))
            offset += r.size
        return np.concatenate(out)

    def blocks(self) -> list[tuple[int, int]]:
        """Per feature, the [lo, hi) global run-index range."""
        sizes = [r.size for r in self.runs]
        starts = np.concatenate([[0], np.cumsum(sizes)])
        return [(int(starts[j]), int(starts[j + 1])) for j in range(len(sizes))]

    def steps(self) -> int:
        """Step count of any coefficient vector exactly consistent with this support."""
        return sum(r.size - 1 for r in self.runs)

    @staticmethod
    def trivial(data: BinnedDataset) -> "SupportSet":
        return SupportSet([np.ones(b, dtype=np.int64) for b in data.bins_per_feature])

    @staticmethod
    def from_coefficients(data: BinnedDataset, omega: np.ndarray, tol: float = 0.0) -> "SupportSet":
        """Derive runs by grouping adjacent bins with (near-)equal coefficients."""
        runs = []
        start = 0
        for b in data.bins_per_feature:
            w = omega[start : start + b]
            breaks = np.nonzero(np.abs(np.diff(w)) > tol)[0]
            bounds = np.concatenate([[0], breaks + 1, [b]])
            runs.append(np.diff(bounds))
            start += b
        return SupportSet(runs)


def expand_support(support: SupportSet, v: np.ndarray) -> np.ndarray:
    """Run-coordinate vector (1+K,) -> full vector (1+m,); intercept first."""
    reps = np.concatenate([r for r in support.runs])
    return np.concatenate([v[:1], np.repeat(v[1:], reps)])


def reduce_support(support: SupportSet, beta: np.ndarray, tol: float = 1e-9):
    """Full vector (1+m,) -> run coordinates (1+K,).

    Returns (v, max_dev) where max_dev is the largest within-run deviation;
    callers reject vectors that are not support-consistent.
    """
    omega = beta[1:]
    starts = np.concatenate([[0], np.cumsum(np.concatenate(support.runs))])
    vals = np.empty(support.size)
    max_dev = 0.0
    for g in range(support.size):
        seg = omega[starts[g] : starts[g + 1]]
        vals[g] = seg.mean()
        if seg.size > 1:
            max_dev = max(max_dev, float(np.abs(seg - vals[g]).max()))
    return np.concatenate([beta[:1], vals]), max_dev


@dataclass(frozen=True, eq=False)
class GamModel:
    """Fitted GAM: intercept, full-bin coefficients, and their support."""

    feature_names: list[str]
    edges: list[np.ndarray]
    omega0: float
    omega: np.ndarray
    support: SupportSet
    lambda2: float
    lambda_s: float
    pi: list[np.ndarray]

    def __post_init__(self):
        omega = np.asarray(self.omega, dtype=float)
        m = sum(e.size - 1 for e in self.edges)
        if omega.shape != (m,):
            raise DimensionMismatchError(f"omega must have length {m}")
        object.__setattr__(self, "omega", omega)

    @property
    def beta(self) -> np.ndarray:
        """Full coordinate vector (omega0, omega)."""
        return np.concatenate([[self.omega0], self.omega])

    @property
    def m(self) -> int:
        return self.omega.size

    def to_json(self) -> dict:
        return {
            "feature_names": list(self.feature_names),
            "bin_edges": [e.tolist() for e in self.edges],
            "omega0": float(self.omega0),
            "omega": self.omega.tolist(),
            "lambda2": float(self.lambda2),
            "lambda_s": float(self.lambda_s),
            "support_runs": [r.tolist() for r in self.support.runs],
            "pi": [p.tolist() for p in self.pi],
        }

    @staticmethod
    def from_json(doc: dict) -> "GamModel":
        return GamModel(
            feature_names=list(doc["feature_names"]),
            edges=[np.asarray(e, dtype=float) for e in doc["bin_edges"]],
            omega0=float(doc["omega0"]),
            omega=np.asarray(doc["omega"], dtype=float),
            support=SupportSet([np.asarray(r, dtype=np.int64) for r in doc["support_runs"]]),
            lambda2=float(doc["lambda2"]),
            lambda_s=float(doc["lambda_s"]),
            pi=[np.asarray(p, dtype=float) for p in doc["pi"]],
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, sort_keys=True, indent=1)

    @staticmethod
    def load(path) -> "GamModel":
        with open(path, encoding="utf-8") as f:
            return GamModel.from_json(json.load(f))


@dataclass(frozen=True)
class LossBreakdown:
    classification: float
    l2: float
    steps: int
    lambda2: float
    lambda_s: float

    @property
    def total(self) -> float:
        return self.classification + self.lambda2 * self.l2 + self.lambda_s * self.steps


def _check_dims(data: BinnedDataset, beta: np.ndarray):
    if beta.shape[-1] != 1 + data.m:
        raise DimensionMismatchError(
            f"coefficient vector has {beta.shape[-1]} entries, dataset needs {1 + data.m}"
        )


def margins(data: BinnedDataset, beta: np.ndarray) -> np.ndarray:
    """Linear predictor z_i = omega0 + sum_j omega[bin(i, j)].

    ``beta`` may be a single vector (1+m,) or a batch (s, 1+m); the result is
    (n,) or (s, n) accordingly.
    """
    _check_dims(data, beta)
    if beta.ndim == 1:
        z = beta[1 + data.flat_cols].sum(axis=1)
        return z + beta[0]
    # batch path through the sparse one-hot keeps memory at s*n
    z = beta[:, 1:] @ data.onehot().T
    return np.asarray(z) + beta[:, :1]


def classification_loss(data: BinnedDataset, beta: np.ndarray) -> float:
    """Mean logistic loss (1/n) sum log(1 + exp(-yhat*z)), yhat in {-1, +1}."""
    z = margins(data, beta)
    yz = np.where(data.y == 1, z, -z)
    return float(np.mean(np.logaddexp(0.0, -yz)))


def predict_probability(data: BinnedDataset, beta: np.ndarray) -> np.ndarray:
    """P(y = 1) per sample (or per batch row for a 2-d beta)."""
    return 1.0 / (1.0 + np.exp(-margins(data, beta)))


def accuracy(y: np.ndarray, prob: np.ndarray) -> float:
    return float(np.mean((prob > 0.5) == (y == 1)))


def auc(y: np.ndarray, score: np.ndarray) -> float:
    """Rank-based AUC with midranks for ties."""
    y = np.asarray(y)
    order = np.argsort(score, kind="mergesort")
    s = np.asarray(score)[order]
    ranks = np.empty(s.size)
    i = 0
    while i < s.size:
        k = i
        while k + 1 < s.size and s[k + 1] == s[i]:
            k += 1
        ranks[i : k + 1] = 0.5 * (i + k) + 1.0
        i = k + 1
    pos = y[order] == 1
    n1 = int(pos.sum())
    n0 = y.size - n1
    if n1 == 0 or n0 == 0:
        raise DataError("AUC needs both classes present")
    return float((ranks[pos].sum() - n1 * (n1 + 1) / 2.0) / (n1 * n0))


def classification_loss_many(data: BinnedDataset, betas: np.ndarray) -> np.ndarray:
    z = margins(data, betas)
    yhat = np.where(data.y == 1, 1.0, -1.0)
    return np.logaddexp(0.0, -z * yhat[None, :]).mean(axis=1)


def penalty_l2(data: BinnedDataset, beta: np.ndarray) -> float:
    """Occupancy-weighted squared coefficients; the intercept is excluded."""
    _check_dims(data, beta)
    return float(np.dot(data.pi_flat, beta[1:] ** 2))


def penalty_steps(data: BinnedDataset, beta: np.ndarray) -> int:
    """Within-feature count of adjacent bins with differing coefficients."""
    _check_dims(data, beta)
    total = 0
    start = 1
    for b in data.bins_per_feature:
        w = beta[start : start + b]
        total += int(np.count_nonzero(np.diff(w)))
        start += b
    return total


def total_loss(data: BinnedDataset, beta: np.ndarray, lambda2: float, lambda_s: float) -> LossBreakdown:
    if lambda2 < 0 or lambda_s < 0:
        raise DataError("penalty multipliers must be nonnegative")
    return LossBreakdown(
        classification=classification_loss(data, beta),
        l2=penalty_l2(data, beta),
        steps=penalty_steps(data, beta),
        lambda2=lambda2,
        lambda_s=lambda_s,
    )


def total_loss_many(data: BinnedDataset, betas: np.ndarray, lambda2: float, lambda_s: float) -> np.ndarray:
    """Total loss per row of a batch; the step count is evaluated per vector."""
    lc = classification_loss_many(data, betas)
    l2 = (betas[:, 1:] ** 2) @ data.pi_flat
    steps = np.zeros(betas.shape[0])
    start = 1
    for b in data.bins_per_feature:
        w = betas[:, start : start + b]
        steps += np.count_nonzero(np.diff(w, axis=1), axis=1)
        start += b
    return lc + lambda2 * l2 + lambda_s * steps


def gradient(data: BinnedDataset, beta: np.ndarray, lambda2: float) -> np.ndarray:
    """Exact gradient of L_c + lambda2*L_2 in (omega0, omega) coordinates.

    The step penalty is piecewise constant and contributes zero almost
    everywhere, so it is excluded.
    """
    _check_dims(data, beta)
    z = margins(data, beta)
    p = 1.0 / (1.0 + np.exp(-z))
    r = (p - data.y) / data.n
    g = np.empty(1 + data.m)
    g[0] = r.sum()
    flat = data.flat_cols
    acc = np.zeros(data.m)
    for j in range(data.p):
        acc += np.bincount(flat[:, j], weights=r, minlength=data.m)
    g[1:] = acc + 2.0 * lambda2 * data.pi_flat * beta[1:]
    return g


def hessian(data: BinnedDataset, beta: np.ndarray, lambda2: float) -> np.ndarray:
    """Exact Hessian of L_c + lambda2*L_2: (1/n) Xt S X + 2*lambda2*diag(0, pi)."""
    _check_dims(data, beta)
    z = margins(data, beta)
    p = 1.0 / (1.0 + np.exp(-z))
    s = p * (1.0 - p) / data.n
    X = data.onehot()
    Xs = X.multiply(s[:, None]).tocsr()
    H = np.empty((1 + data.m, 1 + data.m))
    H[0, 0] = s.sum()
    cross = np.asarray(Xs.sum(axis=0)).ravel()
    H[0, 1:] = cross
    H[1:, 0] = cross
    H[1:, 1:] = (X.T @ Xs).toarray()
    H[1:, 1:] += np.diag(2.0 * lambda2 * data.pi_flat)
    return H


class SupportView:
    """Loss pieces of a dataset seen through a support set.

    Presents the merged-run coordinates (1+K,) as if they were a plain binned
    dataset, so the Newton solver and the ellipsoid machinery work in the
    reduced space directly.
    """

    def __init__(self, data: BinnedDataset, support: SupportSet):
        if support.p != data.p or any(
            int(r.sum()) != b for r, b in zip(support.runs, data.bins_per_feature)
        ):
            raise DimensionMismatchError("support does not match the dataset bins")
        self.data = data
        self.support = support
        run_of = support.run_of_bin()
        # run index per (sample, feature); reuses the flat bin columns
        self.run_cols = run_of[data.flat_cols]
        self.pi_run = np.bincount(run_of, weights=data.pi_flat, minlength=support.size)
        self.K = support.size
        self._onehot = None

    @property
    def dim(self) -> int:
        return 1 + self.K

    def onehot(self) -> sp.csr_matrix:
        if self._onehot is None:
            n, p = self.run_cols.shape
            rows = np.repeat(np.arange(n), p)
            self._onehot = sp.csr_matrix(
                (np.ones(n * p), (rows, self.run_cols.ravel())), shape=(n, self.K)
            )
        return self._onehot

    def margins(self, v: np.ndarray) -> np.ndarray:
        if v.ndim == 1:
            return v[0] + v[1 + self.run_cols].sum(axis=1)
        z = v[:, 1:] @ self.onehot().T
        return np.asarray(z) + v[:, :1]

    def classification_loss(self, v: np.ndarray):
        z = self.margins(v)
        yhat = np.where(self.data.y == 1, 1.0, -1.0)
        ce = np.logaddexp(0.0, -z * yhat)
        return ce.mean(axis=-1)

    def penalized_loss(self, v: np.ndarray, lambda2: float):
        """L_c + lambda2*L_2 (the step term is constant under this support)."""
        l2 = (v[..., 1:] ** 2) @ self.pi_run
        return self.classification_loss(v) + lambda2 * l2

    def gradient(self, v: np.ndarray, lambda2: float) -> np.ndarray:
        z = self.margins(v)
        prob = 1.0 / (1.0 + np.exp(-z))
        r = (prob - self.data.y) / self.data.n
        g = np.empty(self.dim)
        g[0] = r.sum()
        acc = np.zeros(self.K)
        for j in range(self.data.p):
            acc += np.bincount(self.run_cols[:, j], weights=r, minlength=self.K)
        g[1:] = acc + 2.0 * lambda2 * self.pi_run * v[1:]
        return g

    def hessian(self, v: np.ndarray, lambda2: float) -> np.ndarray:
        z = self.margins(v)
        prob = 1.0 / (1.0 + np.exp(-z))
        s = prob * (1.0 - prob) / self.data.n
        X = self.onehot()
        Xs = X.multiply(s[:, None]).tocsr()
        H = np.empty((self.dim, self.dim))
        H[0, 0] = s.sum()
        cross = np.asarray(Xs.sum(axis=0)).ravel()
        H[0, 1:] = cross
        H[1:, 0] = cross
        H[1:, 1:] = (X.T @ Xs).toarray()
        H[1:, 1:] += np.diag(2.0 * lambda2 * self.pi_run)
        return H

    def expand(self, v: np.ndarray) -> np.ndarray:
        return expand_support(self.support, v)


def fit_erm(
    data: BinnedDataset,
    support: SupportSet,
    lambda2: float,
    tol: float = 1e-8,
    max_iters: int = 100,
) -> GamModel:
    """Damped Newton on the run coordinates until the sup-norm gradient <= tol."""
    view = SupportView(data, support)
    v, _ = newton_minimize(
        lambda w: float(view.penalized_loss(w, lambda2)),
        lambda w: view.gradient(w, lambda2),
        lambda w: view.hessian(w, lambda2),
        np.zeros(view.dim),
        tol=tol,
        max_iters=max_iters,
    )
    beta = view.expand(v)
    return GamModel(
        feature_names=list(data.feature_names),
        edges=list(data.edges),
        omega0=float(beta[0]),
        omega=beta[1:],
        support=support,
        lambda2=lambda2,
        lambda_s=0.0,
        pi=[p.copy() for p in data.pi],
    )


def newton_minimize(value, grad, hess, x0, tol=1e-8, max_iters=100, never_fail=False):
    """Damped Newton with step halving; shared by the ERM and bootstrap fits.

    With ``never_fail`` a singular Newton system falls back to a least-squares
    step and iteration limits return the last iterate instead of raising.
    """
    x = np.asarray(x0, dtype=float).copy()
    f = value(x)
    for _ in range(max_iters):
        g = grad(x)
        gnorm = float(np.abs(g).max())
        if gnorm <= tol:
            return x, gnorm
        H = hess(x)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            if not never_fail:
                raise
            step = np.linalg.lstsq(H, g, rcond=None)[0]
        t = 1.0
        for _ in range(60):
            xn = x - t * step
            fn = value(xn)
            if fn <= f:
                break
            t *= 0.5
        else:
            # no decrease along the Newton direction; fall back to gradient
            xn = x - 1e-3 * g / max(gnorm, 1.0)
            fn = value(xn)
        x, f = xn, fn
    g = grad(x)
    gnorm = float(np.abs(g).max())
    if gnorm <= tol or never_fail:
        return x, gnorm
    raise ConvergenceError(
        f"Newton did not reach tol={tol} in {max_iters} iterations (|grad|={gnorm:.3e})",
        last_iterate=x,
        grad_norm=gnorm,
    )
