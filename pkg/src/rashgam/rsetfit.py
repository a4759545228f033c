"""Method 1: approximate the fixed-support Rashomon set by an inscribed
ellipsoid.

The ellipsoid is seeded from the second-order expansion of the loss at the
empirical risk minimizer and then refined by stochastic gradient descent on

    det(Q)^(1/(2d)) + C * E_{w ~ ellipsoid}[ max(L(w) - theta, 0) ]

with samples reparameterized through a lower-triangular factor of Q, so the
noise is independent of the parameters being differentiated.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.special import gammaln

from .binning import BinnedDataset
from .ellipsoid import Ellipsoid
from .errors import EmptyRashomonError, RashgamError
from .gam import SupportSet, SupportView, fit_erm


@dataclass
class RashomonConfig:
    """Threshold and optimizer hyperparameters for Rashomon-set fitting.

    Exactly one of ``theta`` (absolute) and ``theta_mult`` (multiplier on the
    minimum loss) must be set.
    """

    lambda2: float = 0.001
    lambda_s: float = 0.001
    theta: float | None = None
    theta_mult: float | None = 1.01
    C: float = 500.0
    learning_rate: float = 0.0001
    iterations: int = 1000
    samples_per_iter: int = 32
    reestimate_every: int = 50
    reestimate_samples: int = 512
    # largest per-iteration parameter move, in units of the initialization
    # radius; keeps the descent stable when C is very large
    step_cap: float = 0.2
    # clamp each Q diagonal so the axis segment stays inside the true
    # coordinate interval; uniform sampling alone cannot police the
    # coordinate axes in high dimension
    axis_calibrate: bool = True
    calibration_delta: float = 1e-6

    def __post_init__(self):
        if (self.theta is None) == (self.theta_mult is None):
            raise RashgamError("set exactly one of theta and theta_mult")
        if self.theta_mult is not None and self.theta_mult <= 1.0:
            raise RashgamError("theta multiplier must exceed 1")
        if self.C <= 0 or self.learning_rate <= 0 or self.iterations < 0:
            raise RashgamError("C and learning_rate must be positive, iterations >= 0")

    def resolve_theta(self, loss_min: float) -> float:
        if self.theta is not None:
            if self.theta <= loss_min:
                raise EmptyRashomonError(
                    f"theta={self.theta} is not above the minimum loss {loss_min}"
                )
            return self.theta
        return self.theta_mult * loss_min


@dataclass
class FitTrace:
    objective: list[float] = field(default_factory=list)
    log_volume: list[float] = field(default_factory=list)
    overflow_mean: list[float] = field(default_factory=list)
    outside_frac: list[float] = field(default_factory=list)
    best_objective: list[float] = field(default_factory=list)

    def rows(self):
        for i in range(len(self.objective)):
            yield (
                i,
                self.objective[i],
                self.log_volume[i],
                self.overflow_mean[i],
                self.outside_frac[i],
            )

    def save_csv(self, path):
        with open(path, "w", encoding="utf-8") as f:
            f.write("iter,objective,log_volume,overflow_mean,outside_frac\n")
            for row in self.rows():
                f.write("{},{!r},{!r},{!r},{!r}\n".format(*row))


class PenalizedLoss:
    """Minimal objective contract for the ellipsoid optimizer.

    value_many: batch of coordinate vectors -> loss per row.
    gradient:   single vector -> gradient.
    """

    def value_many(self, w: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def gradient(self, w: np.ndarray) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError


class GamObjective(PenalizedLoss):
    """L_c + lambda2*L_2 on the run coordinates of a fixed support."""

    def __init__(self, data: BinnedDataset, support: SupportSet, lambda2: float):
        self.view = SupportView(data, support)
        self.lambda2 = lambda2

    @property
    def dim(self) -> int:
        return self.view.dim

    def value(self, w: np.ndarray) -> float:
        return float(self.view.penalized_loss(w, self.lambda2))

    def value_many(self, w: np.ndarray) -> np.ndarray:
        return np.asarray(self.view.penalized_loss(w, self.lambda2))

    def gradient(self, w: np.ndarray) -> np.ndarray:
        return self.view.gradient(w, self.lambda2)

    def hessian(self, w: np.ndarray) -> np.ndarray:
        return self.view.hessian(w, self.lambda2)


def hessian_init(center: np.ndarray, hess: np.ndarray, loss_at_center: float, theta: float) -> Ellipsoid:
    """Ellipsoid of the quadratic loss model: Q = H / (2 (theta - L))."""
    if theta <= loss_at_center:
        raise EmptyRashomonError(
            "empty Rashomon set under quadratic model: "
            f"theta={theta} <= loss at center {loss_at_center}"
        )
    return Ellipsoid(hess / (2.0 * (theta - loss_at_center)), np.asarray(center, dtype=float))


def _log_unit_ball(d: int) -> float:
    return float(0.5 * d * np.log(np.pi) - gammaln(0.5 * d + 1.0))


def _draw_ball(rng: np.random.Generator, size: int, dim: int) -> np.ndarray:
    u = rng.standard_normal((size, dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    r = rng.uniform(size=size) ** (1.0 / dim)
    return r[:, None] * u


def _objective_estimate(G, center, objective, theta, C, rng, n):
    d = center.size
    Y = _draw_ball(rng, n, d)
    W = center + solve_triangular(G, Y.T, lower=True, trans="T").T
    over = np.maximum(objective.value_many(W) - theta, 0.0)
    vol_term = float(np.exp(np.log(np.diag(G)).sum() / d))
    return vol_term + C * float(over.mean()), float((over > 0).mean())


def penalty_term(G, center, Y, objective, theta, C):
    """Value and parameter gradients of C * mean(max(L(w) - theta, 0)).

    ``Y`` holds fixed unit-ball noise rows; samples are w = center + G^{-T} y
    per the reparameterization, so the gradients differentiate only the
    deterministic map.  Returns (value, dG, dcenter, outside_mask,
    overflow_mean) with dG already restricted to the lower triangle.
    """
    S, d = Y.shape
    X = solve_triangular(G, Y.T, lower=True, trans="T").T  # offsets G^{-T} y
    W = center + X
    losses = objective.value_many(W)
    over = losses - theta
    outside = over > 0.0
    overflow = np.maximum(over, 0.0)
    grad_G = np.zeros((d, d))
    grad_center = np.zeros(d)
    if outside.any():
        scale = C / S
        for s in np.nonzero(outside)[0]:
            g = objective.gradient(W[s])
            grad_center += scale * g
            v = solve_triangular(G, g, lower=True)
            # d loss / dG = -x v^T (x = G^{-T} y), lower triangle only
            grad_G -= scale * np.outer(X[s], v)
    grad_G = np.tril(grad_G)
    return C * float(overflow.mean()), grad_G, grad_center, outside, float(overflow.mean())


class _WhitenedObjective(PenalizedLoss):
    """The loss seen through the coordinates that map the initial ellipsoid
    to the unit ball: w = c0 + G0^{-T} z.  Descending in these coordinates
    makes the step size insensitive to the scale of the problem."""

    def __init__(self, objective: PenalizedLoss, G0: np.ndarray, c0: np.ndarray):
        self.inner = objective
        self.G0 = G0
        self.c0 = c0
        self._G0_inv = solve_triangular(G0, np.eye(G0.shape[0]), lower=True)

    def to_w(self, Z: np.ndarray) -> np.ndarray:
        return self.c0 + Z @ self._G0_inv

    def value_many(self, Z: np.ndarray) -> np.ndarray:
        return self.inner.value_many(self.to_w(np.atleast_2d(Z)))

    def gradient(self, z: np.ndarray) -> np.ndarray:
        return self._G0_inv @ self.inner.gradient(self.to_w(z[None, :])[0])


def optimize(
    init: Ellipsoid,
    objective: PenalizedLoss,
    theta: float,
    cfg: RashomonConfig,
    rng: np.random.Generator,
) -> tuple[Ellipsoid, FitTrace]:
    """Stochastic descent on the factorized ellipsoid parameters.

    Q is carried as G G^T with G lower triangular; the diagonal is stepped in
    log scale, which keeps Q positive definite without projections.  The
    descent runs in the initialization's whitened coordinates and the result
    is mapped back at the end.  Returns the best iterate under a periodic
    higher-precision re-estimate of the objective.
    """
    G0 = cholesky(init.Q, lower=True)
    white = _WhitenedObjective(objective, G0, init.center.copy())
    Gz, cz, trace = _optimize_factor(white, theta, cfg, rng, init.dim)
    # w-space factor G0 Gz stays lower triangular with positive diagonal
    Gw = G0 @ Gz
    center = init.center + solve_triangular(G0, cz, lower=True, trans="T")
    return Ellipsoid(Gw @ Gw.T, center), trace


def _optimize_factor(
    objective: PenalizedLoss,
    theta: float,
    cfg: RashomonConfig,
    rng: np.random.Generator,
    d: int,
) -> tuple[np.ndarray, np.ndarray, FitTrace]:
    G = np.eye(d)
    center = np.zeros(d)
    trace = FitTrace()

    best_obj, _ = _objective_estimate(
        G, center, objective, theta, cfg.C, rng, cfg.reestimate_samples
    )
    best = (G.copy(), center.copy())
    trace.best_objective.append(best_obj)

    tril_mask = np.tril(np.ones((d, d), dtype=bool), -1)
    lr = cfg.learning_rate
    S = cfg.samples_per_iter
    for it in range(cfg.iterations):
        Y = _draw_ball(rng, S, d)
        penalty, grad_G, grad_center, outside, overflow_mean = penalty_term(
            G, center, Y, objective, theta, cfg.C
        )
        logdiag = np.log(np.diag(G))
        vol_term = float(np.exp(logdiag.sum() / d))
        obj = vol_term + penalty

        grad_logdiag = np.full(d, vol_term / d)
        grad_logdiag += np.diag(grad_G) * np.diag(G)

        np.fill_diagonal(grad_G, 0.0)
        grad_G[~tril_mask] = 0.0
        dG = lr * grad_G
        dlog = lr * grad_logdiag
        dc = lr * grad_center
        worst = max(np.abs(dG).max(), np.abs(dlog).max(), np.abs(dc).max(), 1e-300)
        if worst > cfg.step_cap:
            shrink = cfg.step_cap / worst
            dG *= shrink
            dlog *= shrink
            dc *= shrink
        G = G - dG
        logdiag = logdiag - dlog
        np.fill_diagonal(G, np.exp(logdiag))
        center = center - dc

        trace.objective.append(obj)
        trace.log_volume.append(_log_unit_ball(d) - logdiag.sum())
        trace.overflow_mean.append(overflow_mean)
        trace.outside_frac.append(float(outside.mean()))

        if (it + 1) % cfg.reestimate_every == 0 or it + 1 == cfg.iterations:
            est, _ = _objective_estimate(
                G, center, objective, theta, cfg.C, rng, cfg.reestimate_samples
            )
            if est < best_obj:
                best_obj = est
                best = (G.copy(), center.copy())
            trace.best_objective.append(best_obj)

    Gb, cb = best
    return Gb, cb, trace


def axis_calibrate(
    e: Ellipsoid,
    objective: PenalizedLoss,
    theta: float,
    delta: float = 1e-6,
    margin: float = 1e-6,
) -> Ellipsoid:
    """Shrink Q's diagonal until every axis segment is truly inside R(theta).

    The per-coordinate in-set intervals come from the independent bracketing
    + binary-search oracle.  Raising diagonal entries only shrinks the set,
    so membership soundness is preserved while axis overreach (which uniform
    samples almost never detect in high dimension) is removed.
    """
    from .boxoracle import segment_ends

    Q = e.Q.copy()
    center = e.center
    changed = False
    for j in range(e.dim):
        iv = segment_ends(objective, j, center, theta, delta)
        w = min(center[j] - iv.left, iv.right - center[j])
        w = max(w * (1.0 - margin), delta)
        need = 1.0 / w**2
        if Q[j, j] < need:
            Q[j, j] = need
            changed = True
    if not changed:
        return e
    return Ellipsoid(Q, center, dict(e.meta))


def approximate(
    data: BinnedDataset,
    support: SupportSet,
    cfg: RashomonConfig,
    rng: np.random.Generator,
    erm=None,
):
    """Full Method-1 pipeline: ERM fit, Hessian seed, stochastic refinement,
    and a final per-axis soundness calibration.

    Returns (ellipsoid, erm_model, trace); the ellipsoid lives on the run
    coordinates of ``support`` and carries theta and the penalty multipliers
    as metadata.
    """
    if erm is None:
        erm = fit_erm(data, support, cfg.lambda2)
    objective = GamObjective(data, support, cfg.lambda2)
    steps = support.steps()
    center = np.concatenate([[erm.omega0], _run_values(support, erm.omega)])
    loss_min = objective.value(center)
    theta_total = cfg.resolve_theta(loss_min + cfg.lambda_s * steps)
    theta_eff = theta_total - cfg.lambda_s * steps
    if theta_eff <= loss_min:
        raise EmptyRashomonError(
            f"theta {theta_total} leaves no slack above the minimum loss"
        )
    init = hessian_init(center, objective.hessian(center), loss_min, theta_eff)
    ell, trace = optimize(init, objective, theta_eff, cfg, rng)
    if cfg.axis_calibrate:
        ell = axis_calibrate(ell, objective, theta_eff, cfg.calibration_delta)
    meta = {
        "theta": float(theta_total),
        "lambda2": float(cfg.lambda2),
        "lambda_s": float(cfg.lambda_s),
        "loss_at_center": float(objective.value(ell.center) + cfg.lambda_s * steps),
    }
    return ell.with_meta(**meta), erm, trace


def _run_values(support: SupportSet, omega: np.ndarray) -> np.ndarray:
    starts = np.concatenate([[0], np.cumsum(np.concatenate(support.runs))])[:-1]
    return omega[starts]
