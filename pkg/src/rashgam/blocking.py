"""Method 2: Rashomon ellipsoids for merged support sets, derived
analytically by intersecting a fitted ellipsoid with bin-merging
hyperplanes.

A merge plan ties contiguous coordinates within a feature block.  The
intersected set on the reduced coordinates is again an ellipsoid, obtained
by summing the tied rows and columns of Q and the tied entries of the
linear term l = Q w_c; its level u decides emptiness.
"""

import itertools
import json
from dataclasses import dataclass
from math import comb

import numpy as np

from .ellipsoid import Ellipsoid
from .errors import PlanError, RashgamError
from .parallel import map_cells


@dataclass(frozen=True)
class MergePlan:
    """Tied adjacent coordinate pairs, stored as the lower pair index.

    A pair index i ties coordinates i and i+1 of the ellipsoid (coordinate 0
    is the intercept and can never appear in a pair).  Chains of pairs
    collapse into longer groups.
    """

    pairs: tuple[int, ...]
    dim: int

    def __post_init__(self):
        pairs = tuple(sorted(set(int(i) for i in self.pairs)))
        if pairs and (pairs[0] < 1 or pairs[-1] > self.dim - 2):
            raise PlanError("pair index out of range (the intercept cannot merge)")
        object.__setattr__(self, "pairs", pairs)

    @property
    def n_merges(self) -> int:
        return len(self.pairs)

    def groups(self) -> list[tuple[int, int]]:
        """Maximal merged ranges as inclusive (start, stop) coordinate pairs."""
        out = []
        for i in self.pairs:
            if out and i <= out[-1][1]:
                out[-1] = (out[-1][0], i + 1)
            else:
                out.append((i, i + 1))
        return out

    def segment_bounds(self) -> np.ndarray:
        """Start of every output segment on 0..dim-1, for reduceat summing."""
        keep = np.ones(self.dim, dtype=bool)
        keep[[i + 1 for i in self.pairs]] = False
        return np.nonzero(keep)[0]

    def old_of_new(self) -> list[np.ndarray]:
        """Per reduced coordinate, the original coordinates it absorbs."""
        bounds = self.segment_bounds()
        ends = np.concatenate([bounds[1:], [self.dim]])
        return [np.arange(a, b) for a, b in zip(bounds, ends)]

    def expansion_matrix(self) -> np.ndarray:
        """0/1 duplication matrix A with w_original = A @ w_reduced."""
        bounds = self.segment_bounds()
        A = np.zeros((self.dim, bounds.size))
        new_of_old = np.cumsum(~np.isin(np.arange(self.dim), [i + 1 for i in self.pairs])) - 1
        A[np.arange(self.dim), new_of_old] = 1.0
        return A

    def encode(self) -> str:
        return json.dumps(list(self.pairs))

    @staticmethod
    def decode(text: str, dim: int) -> "MergePlan":
        return MergePlan(tuple(json.loads(text)), dim)


def validate_plan(plan: MergePlan, blocks: list[tuple[int, int]]):
    """Every tied pair must lie inside a single feature block."""
    for i in plan.pairs:
        if not any(lo <= i and i + 1 < hi for lo, hi in blocks):
            raise PlanError(f"pair ({i}, {i + 1}) crosses a feature boundary")


def merge_quadratic(Q: np.ndarray, plan: MergePlan) -> np.ndarray:
    """Sum tied rows and columns of Q."""
    if Q.shape[0] != plan.dim:
        raise PlanError("plan dimension does not match Q")
    bounds = plan.segment_bounds()
    return np.add.reduceat(np.add.reduceat(Q, bounds, axis=0), bounds, axis=1)


def merge_linear(ell: np.ndarray, plan: MergePlan) -> np.ndarray:
    """Sum tied entries of the linear term."""
    if ell.shape[0] != plan.dim:
        raise PlanError("plan dimension does not match the linear term")
    return np.add.reduceat(ell, plan.segment_bounds())


@dataclass(frozen=True, eq=False)
class SlicedRashomon:
    plan: MergePlan
    ellipsoid: Ellipsoid | None
    u: float
    loss_bound: float | None

    @property
    def is_empty(self) -> bool:
        return self.ellipsoid is None

    def expand(self, v: np.ndarray) -> np.ndarray:
        """Reduced coordinates back to the parent ellipsoid's coordinates."""
        reps = [seg.size for seg in self.plan.old_of_new()]
        return np.repeat(v, reps, axis=-1)


def intersect(e: Ellipsoid, plan: MergePlan, loss_bound: float | None = None) -> SlicedRashomon:
    """Intersect the ellipsoid with the plan's tie hyperplanes.

    The reduced set is {(v - w~_c)^T (Q~/u) (v - w~_c) <= 1}; u <= 0 means the
    hyperplanes miss the ellipsoid entirely and the slice is empty.
    """
    if e.dim != plan.dim:
        raise PlanError("plan dimension does not match the ellipsoid")
    Q = e.Q
    wc = e.center
    lin = Q @ wc
    Qm = merge_quadratic(Q, plan)
    lm = merge_linear(lin, plan)
    wm = np.linalg.solve(Qm, lm)
    u = 1.0 - float(wc @ lin) + float(wm @ lm)
    if u <= 0.0:
        return SlicedRashomon(plan, None, u, loss_bound)
    return SlicedRashomon(plan, Ellipsoid(Qm / u, wm), u, loss_bound)


def count_subsets(K: int, p: int, K_tilde: int) -> int:
    """Number of ways to merge a size-K support (p features) down to size K_tilde."""
    if K_tilde < p:
        raise RashgamError("cannot merge below one run per feature")
    if not p <= K_tilde <= K:
        raise RashgamError("need p <= K_tilde <= K")
    return comb(K - p, K - K_tilde)


def _mergeable_pairs(blocks: list[tuple[int, int]]) -> list[int]:
    pairs = []
    for lo, hi in blocks:
        pairs.extend(range(lo, hi - 1))
    return pairs


def enumerate_plans(
    blocks: list[tuple[int, int]],
    dim: int,
    K_tilde: int,
    limit: int,
    rng: np.random.Generator | None = None,
) -> list[MergePlan]:
    """All plans reaching K_tilde, or a uniform sample of ``limit`` of them.

    ``blocks`` are the per-feature coordinate ranges of the ellipsoid (the
    intercept coordinate 0 belongs to no block).  Sampling is without
    replacement; plans come back in canonical (sorted encoding) order.
    """
    pairs = _mergeable_pairs(blocks)
    K = sum(hi - lo for lo, hi in blocks)
    need = K - K_tilde
    if need < 0 or need > len(pairs):
        raise RashgamError("K_tilde out of range for this support")
    total = comb(len(pairs), need)
    if total <= limit:
        chosen = itertools.combinations(pairs, need)
        return [MergePlan(c, dim) for c in chosen]
    if rng is None:
        raise RashgamError(f"{total} plans exceed limit={limit}; an rng is required to sample")
    seen = set()
    out = []
    attempts = 0
    while len(out) < limit and attempts < 100 * limit:
        attempts += 1
        pick = tuple(sorted(rng.choice(pairs, size=need, replace=False).tolist()))
        if pick in seen:
            continue
        seen.add(pick)
        out.append(MergePlan(pick, dim))
    out.sort(key=lambda pl: pl.pairs)
    return out


def explore(
    e: Ellipsoid,
    blocks: list[tuple[int, int]],
    K_tilde: int,
    limit: int,
    rng: np.random.Generator | None = None,
    theta: float | None = None,
    lambda_s: float | None = None,
    threads: int | None = None,
) -> list[tuple[MergePlan, SlicedRashomon]]:
    """Nonempty slices for every (or ``limit`` sampled) plan at size K_tilde.

    When theta and lambda_s are known, each slice carries the tightened loss
    bound theta - lambda_s * (K - K_tilde).
    """
    K = sum(hi - lo for lo, hi in blocks)
    if theta is None:
        theta = e.meta.get("theta")
    if lambda_s is None:
        lambda_s = e.meta.get("lambda_s")
    bound = None
    if theta is not None and lambda_s is not None:
        bound = float(theta) - float(lambda_s) * (K - K_tilde)
    plans = enumerate_plans(blocks, e.dim, K_tilde, limit, rng)
    sliced_all = map_cells(lambda plan: intersect(e, plan, bound), plans, threads)
    return [(plan, s) for plan, s in zip(plans, sliced_all) if not s.is_empty]
