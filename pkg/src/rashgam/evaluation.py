"""Evaluation harness: precision estimates, baseline ellipsoids (sphere,
Hessian seed, bootstrap + minimum-volume cover), rescaling tradeoff curves,
and the Method-1 vs Method-2 comparison table.

All cross-method comparisons happen at matched ellipsoid volume; precision
figures always carry their binomial half-width.
"""

import time
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.linalg import cholesky
from scipy.special import gammaln

from .binning import BinnedDataset
from .blocking import enumerate_plans, intersect
from .ellipsoid import Ellipsoid
from .errors import RashgamError
from .gam import SupportSet, SupportView, fit_erm, newton_minimize
from .rsetfit import GamObjective, RashomonConfig, approximate


class BaselineKind(str, Enum):
    OPTIMIZED = "optimized"
    HESSIAN_INIT = "hessian-init"
    SPHERE = "sphere"
    BOOTSTRAP_MVEE = "bootstrap-logistic-mvee"


@dataclass(frozen=True)
class PrecisionEstimate:
    n_samples: int
    n_inside: int

    @property
    def precision(self) -> float:
        return self.n_inside / self.n_samples

    @property
    def half_width(self) -> float:
        p = self.precision
        return 1.96 * float(np.sqrt(p * (1.0 - p) / self.n_samples))


def fork_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for a (seed, cell key) pair; reproducible."""
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=tuple(key)))


class TotalLossEvaluator:
    """Total loss (classification + both penalties) on run coordinates."""

    def __init__(self, data: BinnedDataset, support: SupportSet, lambda2: float, lambda_s: float):
        self.view = SupportView(data, support)
        self.lambda2 = lambda2
        self.lambda_s = lambda_s
        self._steps = support.steps()

    def __call__(self, V: np.ndarray) -> np.ndarray:
        V = np.atleast_2d(V)
        base = self.view.penalized_loss(V, self.lambda2)
        # distinct sampled run values keep the support's step count; exact
        # ties between adjacent runs would only lower it, which never flips
        # an inside verdict
        return base + self.lambda_s * self._steps


def estimate_precision(
    e: Ellipsoid,
    total_loss,
    theta: float,
    n_samples: int,
    rng: np.random.Generator,
    batch: int = 2048,
) -> PrecisionEstimate:
    """Share of uniform ellipsoid samples whose total loss stays below theta."""
    if n_samples < 1:
        raise RashgamError("need at least one sample")
    inside = 0
    done = 0
    while done < n_samples:
        take = min(batch, n_samples - done)
        W = e.sample(rng, take)
        inside += int(np.count_nonzero(total_loss(W) <= theta))
        done += take
    return PrecisionEstimate(n_samples=n_samples, n_inside=inside)


def recall_proxy(precision: float, log_vol_e: float, log_vol_true: float) -> float:
    """recall = precision * Vol(approx) / Vol(true); > 1 flags a bad volume."""
    return precision * float(np.exp(log_vol_e - log_vol_true))


def sphere_baseline(center: np.ndarray, target_log_volume: float) -> Ellipsoid:
    """Ball centered at the ERM whose volume matches the target."""
    d = center.size
    log_unit = 0.5 * d * np.log(np.pi) - gammaln(0.5 * d + 1.0)
    c = np.exp(2.0 * (log_unit - target_log_volume) / d)
    return Ellipsoid(c * np.eye(d), np.asarray(center, dtype=float))


def bootstrap_models(
    data: BinnedDataset,
    support: SupportSet,
    n_boot: int,
    lambda2: float,
    rng: np.random.Generator,
) -> np.ndarray:
    """Run-coordinate ERM vectors fitted on resampled-with-replacement data.

    Resamples can leave bins empty; the refit then recomputes pi from the
    resample and falls back to least-squares Newton steps, so it never
    crashes.
    """
    view = SupportView(data, support)
    if n_boot < view.dim + 1:
        raise RashgamError("need at least dim + 1 bootstrap fits")
    out = np.empty((n_boot, view.dim))
    n = data.n
    for b in range(n_boot):
        idx = rng.integers(0, n, size=n)
        boot = BinnedDataset(
            feature_names=data.feature_names,
            edges=data.edges,
            bin_index=data.bin_index[idx],
            pi=[
                np.bincount(data.bin_index[idx, j], minlength=len(data.pi[j])) / n
                for j in range(data.p)
            ],
            y=data.y[idx],
        )
        bview = SupportView(boot, support)
        v, _ = newton_minimize(
            lambda w: float(bview.penalized_loss(w, lambda2)),
            lambda w: bview.gradient(w, lambda2),
            lambda w: bview.hessian(w, lambda2),
            np.zeros(bview.dim),
            tol=1e-8,
            max_iters=60,
            never_fail=True,
        )
        out[b] = v
    return out


def mvee_fit(
    samples: np.ndarray,
    C: float = 1000.0,
    learning_rate: float = 0.01,
    iterations: int = 1000,
):
    """Minimum-volume ellipsoid covering (almost all of) a point cloud.

    Gradient descent on a lower-triangular factor of Q and the center for
        -det(Q)^(1/(2d)) + C * mean(max(|Q^(1/2) (w_i - c)|^2 - 1, 0)),
    seeded with the whitening transform of the sample covariance.  Returns
    (ellipsoid, info) where info records coverage and any ridge repair.
    """
    W = np.asarray(samples, dtype=float)
    n, d = W.shape
    if n < d + 1:
        raise RashgamError("need at least dim + 1 sample points")
    mean = W.mean(axis=0)
    cov = np.cov(W.T, bias=False).reshape(d, d)
    info = {"ridge_added": False}
    eig = np.linalg.eigvalsh(cov)
    if eig[0] <= 1e-12 * max(eig[-1], 1.0):
        cov = cov + 1e-8 * np.eye(d)
        info["ridge_added"] = True
    # whiten by the sample covariance: the seed Q^(1/2) is the whitening map
    # and all descent steps happen at O(1) scale
    A = cholesky(cov, lower=True)
    Z = np.linalg.solve(A, (W - mean).T).T

    G = np.eye(d)
    center = np.zeros(d)
    step_cap = 0.2
    best = (np.inf, G.copy(), center.copy())
    for it in range(iterations):
        # harmonic step decay lets the subgradient descent settle into the
        # nonsmooth corner instead of orbiting it
        lr = learning_rate / (1.0 + 10.0 * it / iterations)
        D = Z - center
        T = D @ G  # rows delta^T G, |row|^2 = delta^T Q delta
        viol = np.einsum("ij,ij->i", T, T) - 1.0
        mask = viol > 0.0
        logdiag = np.log(np.diag(G))
        vol = np.exp(logdiag.sum() / d)
        # deterministic objective: keep the best iterate of the descent
        obj = -vol + C * float(np.maximum(viol, 0.0).mean())
        if obj < best[0]:
            best = (obj, G.copy(), center.copy())
        grad_logdiag = np.full(d, -vol / d)
        grad_G = np.zeros((d, d))
        grad_center = np.zeros(d)
        if mask.any():
            scale = C / n
            Dm = D[mask]
            Tm = T[mask]
            grad_G += 2.0 * scale * (Dm.T @ Tm)
            grad_center -= 2.0 * scale * ((Tm @ G.T).sum(axis=0))
        grad_G = np.tril(grad_G)
        grad_logdiag += np.diag(grad_G) * np.diag(G)
        np.fill_diagonal(grad_G, 0.0)
        dG = lr * grad_G
        dlog = lr * grad_logdiag
        dc = lr * grad_center
        worst = max(np.abs(dG).max(), np.abs(dlog).max(), np.abs(dc).max(), 1e-300)
        if worst > step_cap:
            shrink = step_cap / worst
            dG *= shrink
            dlog *= shrink
            dc *= shrink
        G = G - dG
        np.fill_diagonal(G, np.exp(logdiag - dlog))
        center = center - dc

    _, G, center = best
    # back to the original coordinates: z = A^{-1}(w - mean)
    Gw = np.linalg.solve(A.T, G)
    ell = Ellipsoid(Gw @ Gw.T, mean + A @ center)
    _, q = ell.contains(W)
    info["coverage"] = float(np.mean(q <= 1.0 + 1e-9))
    return ell, info


def tradeoff_curve(
    e: Ellipsoid,
    total_loss,
    theta: float,
    ratios,
    n_samples: int,
    seed: int,
):
    """(rho, precision, half_width) rows for rescaled copies of the ellipsoid."""
    rows = []
    for k, rho in enumerate(ratios):
        if rho <= 0:
            raise RashgamError("scale ratios must be positive")
        est = estimate_precision(
            e.rescale(rho), total_loss, theta, n_samples, fork_rng(seed, 1, k)
        )
        rows.append((float(rho), est.precision, est.half_width))
    return rows


@dataclass(frozen=True)
class PlanComparison:
    plan_encoding: str
    u: float
    precision_ratio: float
    volume_ratio: float
    time_method1: float
    time_method2: float


def method_ratio_report(
    data: BinnedDataset,
    support: SupportSet,
    cfg: RashomonConfig,
    K_tilde: int,
    n_plans: int,
    seed: int,
    n_precision_samples: int = 2000,
    plan_limit: int = 10000,
):
    """Compare blocking against direct refits on sampled merge plans.

    The parent ellipsoid is fitted at theta = delta + lambda_s*(K - K_tilde)
    so each slice approximates the delta-Rashomon set of its merged support;
    Method 1 refits that support directly at delta.  Returns (rows, skipped)
    where skipped counts empty slices.
    """
    from .apps import CoordLayout  # local import to avoid a cycle

    K = support.size
    rng = fork_rng(seed, 0)
    # resolve delta on the parent ERM, then inflate for the parent fit
    erm = fit_erm(data, support, cfg.lambda2)
    objective = GamObjective(data, support, cfg.lambda2)
    center = np.concatenate([[erm.omega0], _run_starts_values(support, erm.omega)])
    l_star = float(objective.value(center)) + cfg.lambda_s * support.steps()
    delta = cfg.resolve_theta(l_star)
    theta_parent = delta + cfg.lambda_s * (K - K_tilde)
    parent_cfg = RashomonConfig(
        lambda2=cfg.lambda2,
        lambda_s=cfg.lambda_s,
        theta=theta_parent,
        theta_mult=None,
        C=cfg.C,
        learning_rate=cfg.learning_rate,
        iterations=cfg.iterations,
        samples_per_iter=cfg.samples_per_iter,
    )
    parent, erm, _ = approximate(data, support, parent_cfg, rng, erm=erm)
    layout = CoordLayout.from_model(erm)

    plans = enumerate_plans(layout.blocks, parent.dim, K_tilde, plan_limit, rng)
    if len(plans) > n_plans:
        pick = rng.choice(len(plans), size=n_plans, replace=False)
        plans = [plans[i] for i in sorted(pick)]

    rows = []
    skipped = 0
    for k, plan in enumerate(plans):
        t0 = time.perf_counter()
        sliced = intersect(parent, plan)
        t2 = time.perf_counter() - t0
        if sliced.is_empty:
            skipped += 1
            continue
        merged_support = _merge_support(support, plan, layout)
        t0 = time.perf_counter()
        m1_cfg = RashomonConfig(
            lambda2=cfg.lambda2,
            lambda_s=cfg.lambda_s,
            theta=delta,
            theta_mult=None,
            C=cfg.C,
            learning_rate=cfg.learning_rate,
            iterations=cfg.iterations,
            samples_per_iter=cfg.samples_per_iter,
        )
        e1, _, _ = approximate(data, merged_support, m1_cfg, fork_rng(seed, 2, k))
        t1 = time.perf_counter() - t0

        total1 = TotalLossEvaluator(data, merged_support, cfg.lambda2, cfg.lambda_s)
        p1 = estimate_precision(e1, total1, delta, n_precision_samples, fork_rng(seed, 3, k))
        p2 = estimate_precision(
            sliced.ellipsoid, total1, delta, n_precision_samples, fork_rng(seed, 4, k)
        )
        vol_ratio = float(
            np.exp((e1.log_volume() - sliced.ellipsoid.log_volume()) / K_tilde)
        )
        prec_ratio = p1.precision / max(p2.precision, 1e-12)
        rows.append(
            PlanComparison(
                plan_encoding=plan.encode(),
                u=sliced.u,
                precision_ratio=prec_ratio,
                volume_ratio=vol_ratio,
                time_method1=t1,
                time_method2=t2,
            )
        )
    return rows, skipped


def _run_starts_values(support: SupportSet, omega: np.ndarray) -> np.ndarray:
    starts = np.concatenate([[0], np.cumsum(np.concatenate(support.runs))])[:-1]
    return omega[starts]


def _merge_support(support: SupportSet, plan, layout) -> SupportSet:
    """Apply an ellipsoid-coordinate merge plan to the support's run lengths."""
    new_runs = []
    for j, (lo, hi) in enumerate(layout.blocks):
        lengths = list(support.runs[j])
        merged = []
        i = 0
        while i < len(lengths):
            length = lengths[i]
            while lo + i in plan.pairs:
                i += 1
                length += lengths[i]
            merged.append(length)
            i += 1
        new_runs.append(np.asarray(merged, dtype=np.int64))
    return SupportSet(new_runs)
