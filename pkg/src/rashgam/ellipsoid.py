"""The ellipsoid abstraction: membership, uniform sampling, volume,
closed-form linear optimization, rescaling, and coordinate slicing.

An ellipsoid is {w : (w - center)^T Q (w - center) <= 1} with Q symmetric
positive definite.  Every stochastic operation takes an explicit
numpy Generator so results are replayable.
"""

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import DimensionMismatchError, RashgamError


@dataclass(frozen=True, eq=False)
class EigenFactors:
    """Eigenvalues in descending order and the matching orthonormal vectors."""

    lambdas: np.ndarray
    vectors: np.ndarray


@dataclass(frozen=True, eq=False)
class Ellipsoid:
    Q: np.ndarray
    center: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        c = np.asarray(self.center, dtype=float)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise DimensionMismatchError("Q must be square")
        if c.shape != (Q.shape[0],):
            raise DimensionMismatchError("center length must match Q")
        scale = max(1.0, float(np.abs(Q).max()))
        asym = float(np.abs(Q - Q.T).max())
        if asym > 1e-10 * scale:
            raise RashgamError(f"Q is not symmetric (max asymmetry {asym:.3e})")
        Q = 0.5 * (Q + Q.T)
        lam, vec = np.linalg.eigh(Q)
        if lam[0] <= 1e-12 * lam[-1] or lam[0] <= 0.0:
            raise RashgamError(
                f"Q is not positive definite enough (eigenvalues in [{lam[0]:.3e}, {lam[-1]:.3e}])"
            )
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "_lam", lam[::-1].copy())
        object.__setattr__(self, "_vec", vec[:, ::-1].copy())

    @property
    def dim(self) -> int:
        return self.Q.shape[0]

    @property
    def eigen(self) -> EigenFactors:
        return EigenFactors(lambdas=self._lam, vectors=self._vec)

    def qform(self, omega: np.ndarray) -> np.ndarray:
        """(w - c)^T Q (w - c) for one vector or a batch of rows."""
        omega = np.asarray(omega, dtype=float)
        if omega.shape[-1] != self.dim:
            raise DimensionMismatchError(
                f"vector has {omega.shape[-1]} coordinates, ellipsoid has {self.dim}"
            )
        d = omega - self.center
        return np.einsum("...i,ij,...j->...", d, self.Q, d)

    def contains(self, omega: np.ndarray, tol: float = 0.0):
        """Returns (inside, q) with inside := q <= 1 + tol."""
        q = self.qform(omega)
        return q <= 1.0 + tol, q

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """Uniform draws: Gaussian direction, radius U^(1/d), eigen map, shift."""
        s = 1 if size is None else size
        u = rng.standard_normal((s, self.dim))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = rng.uniform(size=s) ** (1.0 / self.dim)
        y = r[:, None] * u
        x = (y / np.sqrt(self._lam)) @ self._vec.T
        out = x + self.center
        return out[0] if size is None else out

    def log_volume(self) -> float:
        d = self.dim
        log_unit_ball = 0.5 * d * np.log(np.pi) - gammaln(0.5 * d + 1.0)
        return float(log_unit_ball - 0.5 * np.log(self._lam).sum())

    def solve(self, c: np.ndarray) -> np.ndarray:
        """Q^{-1} c through the eigendecomposition."""
        return (self._vec / self._lam) @ (self._vec.T @ c)

    def minimize_linear(self, c: np.ndarray):
        """argmin c^T w over the ellipsoid: closed form on the boundary."""
        c = np.asarray(c, dtype=float)
        if c.shape != (self.dim,):
            raise DimensionMismatchError("objective vector dimension mismatch")
        if not np.any(c):
            raise RashgamError("linear objective must be nonzero")
        s = self.solve(c)
        t = float(np.sqrt(c @ s))
        w = self.center - s / t
        value = float(c @ self.center - t)
        return w, value

    def maximize_linear(self, c: np.ndarray):
        w, value = self.minimize_linear(-np.asarray(c, dtype=float))
        return w, -value

    def rescale(self, rho: float) -> "Ellipsoid":
        """Scale all radii by rho (> 0); volume scales by rho^dim."""
        if rho <= 0:
            raise RashgamError("scale factor must be positive")
        return Ellipsoid(self.Q / rho**2, self.center, dict(self.meta))

    def match_volume(self, target_log_volume: float) -> float:
        """Radius factor rho such that rescale(rho) hits the target volume."""
        return float(np.exp((target_log_volume - self.log_volume()) / self.dim))

    def with_meta(self, **meta) -> "Ellipsoid":
        merged = dict(self.meta)
        merged.update(meta)
        return Ellipsoid(self.Q, self.center, merged)

    def to_json(self) -> dict:
        doc = {
            "dim": self.dim,
            "center": self.center.tolist(),
            "Q": self.Q.ravel().tolist(),
        }
        for key in ("theta", "lambda2", "lambda_s", "loss_at_center"):
            if key in self.meta:
                doc[key] = self.meta[key]
        return doc

    @staticmethod
    def from_json(doc: dict) -> "Ellipsoid":
        d = int(doc["dim"])
        Q = np.asarray(doc["Q"], dtype=float).reshape(d, d)
        meta = {
            k: doc[k]
            for k in ("theta", "lambda2", "lambda_s", "loss_at_center")
            if k in doc
        }
        return Ellipsoid(Q, np.asarray(doc["center"], dtype=float), meta)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_json(), f, sort_keys=True, indent=1)

    @staticmethod
    def load(path) -> "Ellipsoid":
        with open(path, encoding="utf-8") as f:
            return Ellipsoid.from_json(json.load(f))


def restrict_quadratic(Q, center, fixed_idx, fixed_vals):
    """Restrict (w-c)^T Q (w-c) <= 1 to the subspace w[fixed_idx] = fixed_vals.

    Returns (Q_free, center_free, level): on the free coordinates the set is
    {(v - center_free)^T Q_free (v - center_free) <= level}; empty if
    level <= 0.  The level absorbs both the fixed-block quadratic and the
    completed square.
    """
    d = Q.shape[0]
    fixed_idx = np.asarray(fixed_idx, dtype=np.int64)
    fixed_vals = np.asarray(fixed_vals, dtype=float)
    mask = np.ones(d, dtype=bool)
    mask[fixed_idx] = False
    free = np.nonzero(mask)[0]
    if free.size == 0:
        raise RashgamError("cannot restrict away every coordinate")
    dx = fixed_vals - center[fixed_idx]
    Qff = Q[np.ix_(free, free)]
    Qfx = Q[np.ix_(free, fixed_idx)]
    Qxx = Q[np.ix_(fixed_idx, fixed_idx)]
    shift = np.linalg.solve(Qff, Qfx @ dx)
    level = 1.0 - dx @ Qxx @ dx + dx @ Qfx.T @ shift
    return Qff, center[free] - shift, float(level)


def slice_fix_coords(e: Ellipsoid, fixed_idx, fixed_vals) -> Ellipsoid | None:
    """Ellipsoid on the free coordinates after fixing some; None if empty.

    Fixing nothing returns the ellipsoid unchanged.
    """
    fixed_idx = np.asarray(fixed_idx, dtype=np.int64)
    if fixed_idx.size == 0:
        return e
    Qff, cf, level = restrict_quadratic(e.Q, e.center, fixed_idx, fixed_vals)
    if level <= 0.0:
        return None
    return Ellipsoid(Qff / level, cf)
