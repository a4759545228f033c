"""User-facing queries against a fitted Rashomon ellipsoid: variable
importance ranges, monotone model search, projection of user edits, and
shape-function jump prevalence.

All geometry happens on the ellipsoid's coordinates (intercept first, then
one coordinate per support run).  A CoordLayout localizes each feature's
coordinate block and its occupancy weights.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np
from scipy.optimize import brentq

from .ellipsoid import Ellipsoid, slice_fix_coords
from .errors import DimensionMismatchError, EnumerationGuardError, RashgamError

SIGN_ENUM_GUARD = 20
ZERO_FACE_LIMIT = 8


@dataclass(frozen=True, eq=False)
class CoordLayout:
    """Feature blocks and weights on the ellipsoid coordinates."""

    feature_names: list[str]
    blocks: list[tuple[int, int]]
    pi: np.ndarray

    @property
    def dim(self) -> int:
        return 1 + sum(hi - lo for lo, hi in self.blocks)

    def block(self, j: int) -> np.ndarray:
        lo, hi = self.blocks[j]
        return np.arange(lo, hi)

    @staticmethod
    def from_model(model) -> "CoordLayout":
        """Layout of the run coordinates of a GamModel (intercept at 0)."""
        blocks = []
        pi = [0.0]
        start = 1
        for j, runs in enumerate(model.support.runs):
            blocks.append((start, start + runs.size))
            bin_pi = model.pi[j]
            edges = np.concatenate([[0], np.cumsum(runs)])
            pi.extend(
                float(bin_pi[edges[g] : edges[g + 1]].sum()) for g in range(runs.size)
            )
            start += runs.size
        return CoordLayout(
            feature_names=list(model.feature_names), blocks=blocks, pi=np.asarray(pi)
        )


@dataclass(frozen=True, eq=False)
class VariableImportanceRange:
    feature: int
    vi_minus: float
    vi_plus: float
    argmin: np.ndarray
    argmax: np.ndarray
    fix_others: bool


@dataclass(frozen=True)
class JumpReport:
    feature: int
    boundary: int
    n_samples: int
    fraction_down: float
    fraction_up: float
    fraction_flat: float
    tau: float


def vi_point(layout: CoordLayout, w: np.ndarray, j: int) -> float:
    """Occupancy-weighted mean absolute coefficient of feature j."""
    idx = layout.block(j)
    return float(np.abs(w[idx]) @ layout.pi[idx])


def _workspace(e: Ellipsoid, layout: CoordLayout, j: int, fix_others: bool):
    """(ellipsoid, block pi, block coords within it, embed function).

    With fix_others the ellipsoid is sliced at the center values of every
    coordinate outside the block, intercept included; embed() maps a point
    of the workspace back to full ellipsoid coordinates.
    """
    block = layout.block(j)
    if not fix_others:
        def embed(w):
            return np.asarray(w, dtype=float)

        return e, layout.pi[block], block, embed

    others = np.setdiff1d(np.arange(e.dim), block)
    sliced = slice_fix_coords(e, others, e.center[others])
    if sliced is None:
        raise RashgamError("center-slice infeasible; the center must lie inside")

    def embed(w):
        full = e.center.copy()
        full[block] = w
        return full

    return sliced, layout.pi[block], np.arange(block.size), embed


def _guard(B: int):
    if B > SIGN_ENUM_GUARD:
        raise EnumerationGuardError(
            f"feature has {B} coordinates; sign enumeration capped at {SIGN_ENUM_GUARD}. "
            "Use fix_others or coarser bins."
        )


def _sign_matrix(B: int) -> np.ndarray:
    bits = np.arange(2**B, dtype=np.int64)
    S = ((bits[:, None] >> np.arange(B)[None, :]) & 1).astype(float)
    return 2.0 * S - 1.0


def vi_lower(e: Ellipsoid, layout: CoordLayout, j: int, fix_others: bool = False):
    """Minimum of the feature importance over the ellipsoid.

    Zero feasibility is tested first by slicing the block to zero; otherwise
    the weighted l1 objective is minimized by enumerating sign patterns
    (and, for small blocks, partially-zeroed faces) and keeping the best
    sign-consistent closed-form optimizer.
    """
    work, pi_b, block, embed = _workspace(e, layout, j, fix_others)
    B = block.size
    _guard(B)

    # a feasible all-zero block gives importance 0 immediately
    if B == work.dim:
        zero = np.zeros(work.dim)
        inside, _ = work.contains(zero, tol=1e-12)
        if inside:
            return 0.0, embed(zero)
    else:
        sliced = slice_fix_coords(work, block, np.zeros(B))
        if sliced is not None:
            witness = work.center.copy()
            free = np.setdiff1d(np.arange(work.dim), block)
            witness[free] = sliced.center
            witness[block] = 0.0
            return 0.0, embed(witness)

    best_val = np.inf
    best_w = None

    def consider(value, w_work):
        nonlocal best_val, best_w
        if value < best_val - 1e-15:
            best_val = value
            best_w = w_work

    for s in _sign_matrix(B):
        c = np.zeros(work.dim)
        c[block] = pi_b * s
        if not np.any(c):
            continue
        w, value = work.minimize_linear(c)
        if np.all(s * w[block] >= -1e-10):
            consider(value, w)

    if B <= ZERO_FACE_LIMIT and B > 1:
        for nz in range(1, B):
            for zeros in combinations(range(B), nz):
                zl = list(zeros)
                rest = [k for k in range(B) if k not in zeros]
                sub = slice_fix_coords(work, block[zl], np.zeros(nz))
                if sub is None:
                    continue
                free = np.setdiff1d(np.arange(work.dim), block[zl])
                pos_in_sub = np.searchsorted(free, block[rest])
                for s in _sign_matrix(len(rest)):
                    c = np.zeros(sub.dim)
                    c[pos_in_sub] = pi_b[rest] * s
                    if not np.any(c):
                        continue
                    w_sub, value = sub.minimize_linear(c)
                    if np.all(s * w_sub[pos_in_sub] >= -1e-10):
                        w_full = np.zeros(work.dim)
                        w_full[free] = w_sub
                        consider(value, w_full)

    if best_w is None:
        # every closed-form optimizer violated its sign pattern; fall back to
        # the best sign value as an upper bound anchored at the center side
        best_val = vi_point(layout, embed(work.center), j) if fix_others else vi_point(
            layout, work.center, j
        )
        best_w = work.center
    return max(best_val, 0.0), embed(best_w)


def vi_upper(e: Ellipsoid, layout: CoordLayout, j: int, fix_others: bool = False):
    """Maximum of the feature importance over the ellipsoid.

    The pointwise identity max_s (pi*s)^T w = sum pi |w| makes the maximum
    over all sign patterns exact; patterns need not be sign-consistent.
    """
    work, pi_b, block, embed = _workspace(e, layout, j, fix_others)
    B = block.size
    _guard(B)

    sols = np.stack([work.solve(_unit(work.dim, b)) for b in block])
    Qinv_bb = sols[:, block]
    M = (pi_b[:, None] * Qinv_bb) * pi_b[None, :]
    a = pi_b * work.center[block]

    best_val = -np.inf
    best_s = None
    for start in range(0, 2**B, 65536):
        stop = min(start + 65536, 2**B)
        bits = np.arange(start, stop, dtype=np.int64)
        S = 2.0 * ((bits[:, None] >> np.arange(B)[None, :]) & 1).astype(float) - 1.0
        vals = S @ a + np.sqrt(np.maximum(np.einsum("si,ij,sj->s", S, M, S), 0.0))
        k = int(np.argmax(vals))
        if vals[k] > best_val:
            best_val = float(vals[k])
            best_s = S[k]

    c = np.zeros(work.dim)
    c[block] = pi_b * best_s
    w, _ = work.maximize_linear(c)
    return best_val, embed(w)


def _unit(d: int, i: int) -> np.ndarray:
    v = np.zeros(d)
    v[i] = 1.0
    return v


def vi_range(e: Ellipsoid, layout: CoordLayout, j: int, fix_others: bool = False) -> VariableImportanceRange:
    lo, argmin = vi_lower(e, layout, j, fix_others)
    hi, argmax = vi_upper(e, layout, j, fix_others)
    return VariableImportanceRange(
        feature=j, vi_minus=lo, vi_plus=hi, argmin=argmin, argmax=argmax, fix_others=fix_others
    )


def monotone_fit(
    e: Ellipsoid,
    layout: CoordLayout,
    constraints: list[tuple[int, str]],
    fixed: list[tuple[int, float]] | None = None,
):
    """Closest model (in the ellipsoid metric) with monotone shape functions.

    ``constraints`` lists (feature, "increasing"|"decreasing") pairs; the
    order constraints bind adjacent run coordinates.  ``fixed`` pins chosen
    coordinates to exact values.  Solved by a primal active-set method whose
    equality subproblems tie adjacent coordinates, i.e. they are bin merges.
    Returns (w, q, feasible) where feasible means q <= 1.
    """
    d = e.dim
    pairs = []  # (low_coord, sign): constraint sign*(w[i] - w[i+1]) <= 0
    for j, direction in constraints:
        if direction not in ("increasing", "decreasing"):
            raise RashgamError("direction must be 'increasing' or 'decreasing'")
        sign = 1.0 if direction == "increasing" else -1.0
        blk = layout.block(j)
        pairs.extend((int(i), sign) for i in blk[:-1])
    fixed = list(fixed or [])
    fixed_idx = np.asarray([i for i, _ in fixed], dtype=np.int64)
    fixed_val = np.asarray([v for _, v in fixed], dtype=float)
    if np.unique(fixed_idx).size != fixed_idx.size:
        raise RashgamError("duplicate fixed coordinates")

    x = _feasible_start(e.center, layout, constraints, fixed_idx, fixed_val)
    active: set[int] = set()
    max_rounds = 50 * (len(pairs) + 1)
    for _ in range(max_rounds):
        xhat = _tied_minimizer(e, pairs, active, fixed_idx, fixed_val)
        step = xhat - x
        blocker = None
        alpha = 1.0
        for k, (i, s) in enumerate(pairs):
            if k in active:
                continue
            den = s * (step[i] - step[i + 1])
            if den <= 1e-14:
                continue  # step does not push toward this constraint
            slack = -s * (x[i] - x[i + 1])  # >= 0 at a feasible x
            a = max(slack, 0.0) / den
            if a < alpha - 1e-15:
                alpha = a
                blocker = k
        if blocker is not None:
            x = x + alpha * step
            active.add(blocker)
            continue
        x = xhat
        lam = _multipliers(e, x, pairs, sorted(active), fixed_idx)
        if lam.size == 0 or lam.min() >= -1e-9:
            break
        drop = sorted(active)[int(np.argmin(lam))]
        active.discard(drop)
    else:
        raise RashgamError("active-set iteration limit reached")
    q = float(e.qform(x))
    return x, q, q <= 1.0


def _feasible_start(center, layout, constraints, fixed_idx, fixed_val) -> np.ndarray:
    """Monotone (and fix-respecting) starting point near the center."""
    x = center.copy()
    for j, direction in constraints:
        blk = layout.block(j)
        seg = x[blk]
        iso = _isotonic(seg if direction == "increasing" else seg[::-1])
        x[blk] = iso if direction == "increasing" else iso[::-1]
    if fixed_idx.size:
        x[fixed_idx] = fixed_val
        fixed_set = set(fixed_idx.tolist())
        for j, direction in constraints:
            blk = layout.block(j)
            lo = 1.0 if direction == "increasing" else -1.0
            # push non-fixed coords off fixed ones, backward then forward
            for i in range(blk.size - 2, -1, -1):
                a, b = blk[i], blk[i + 1]
                if a not in fixed_set and lo * (x[a] - x[b]) > 0:
                    x[a] = x[b]
            for i in range(blk.size - 1):
                a, b = blk[i], blk[i + 1]
                if b not in fixed_set and lo * (x[a] - x[b]) > 0:
                    x[b] = x[a]
                elif b in fixed_set and lo * (x[a] - x[b]) > 0:
                    raise RashgamError("fixed values contradict the monotone constraints")
    return x


def _isotonic(v: np.ndarray) -> np.ndarray:
    """Pool-adjacent-violators, unweighted, nondecreasing."""
    v = np.asarray(v, dtype=float)
    vals = []
    counts = []
    for t in v:
        vals.append(float(t))
        counts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            tot = vals[-2] * counts[-2] + vals[-1] * counts[-1]
            cnt = counts[-2] + counts[-1]
            vals[-2:] = [tot / cnt]
            counts[-2:] = [cnt]
    return np.repeat(vals, counts)


def _tied_minimizer(e: Ellipsoid, pairs, active, fixed_idx, fixed_val) -> np.ndarray:
    """Minimize the ellipsoid quadratic subject to active ties and fixes."""
    d = e.dim
    parent = np.arange(d)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for k in active:
        i, _ = pairs[k]
        a, b = find(i), find(i + 1)
        if a != b:
            parent[b] = a
    groups = {}
    for i in range(d):
        groups.setdefault(find(i), []).append(i)
    free_groups = []
    offset = np.zeros(d)
    fixed_set = dict(zip(fixed_idx.tolist(), fixed_val.tolist()))
    for root, members in groups.items():
        fvals = [fixed_set[i] for i in members if i in fixed_set]
        if fvals:
            offset[members] = fvals[0]
        else:
            free_groups.append(members)
    if not free_groups:
        return offset
    A = np.zeros((d, len(free_groups)))
    for g, members in enumerate(free_groups):
        A[members, g] = 1.0
    Qa = e.Q @ A
    lhs = A.T @ Qa
    rhs = A.T @ (e.Q @ (e.center - offset))
    v = np.linalg.solve(lhs, rhs)
    return A @ v + offset


def _multipliers(e: Ellipsoid, x, pairs, active_sorted, fixed_idx) -> np.ndarray:
    """KKT multipliers of the active order constraints at x."""
    if not active_sorted and fixed_idx.size == 0:
        return np.array([])
    d = e.dim
    r = 2.0 * (e.Q @ (x - e.center))
    cols = []
    for k in active_sorted:
        i, s = pairs[k]
        gcol = np.zeros(d)
        gcol[i] = s
        gcol[i + 1] = -s
        cols.append(gcol)
    for i in fixed_idx:
        gcol = np.zeros(d)
        gcol[i] = 1.0
        cols.append(gcol)
    if not cols:
        return np.array([])
    Gmat = np.stack(cols, axis=1)
    lam, *_ = np.linalg.lstsq(Gmat, -r, rcond=None)
    return lam[: len(active_sorted)]


def project_edit(e: Ellipsoid, w_req: np.ndarray):
    """Euclidean projection of a requested coefficient vector onto the set.

    Inside requests return unchanged.  Otherwise the unique boundary
    minimizer w(mu) = (I + mu Q)^{-1} (w_req + mu Q w_c) is found by solving
    the scalar membership equation for mu, which is monotone decreasing.
    Returns (w, distance, inside_already).
    """
    w_req = np.asarray(w_req, dtype=float)
    if w_req.shape != (e.dim,):
        raise DimensionMismatchError("requested vector dimension mismatch")
    inside, _ = e.contains(w_req)
    if inside:
        return w_req.copy(), 0.0, True
    eig = e.eigen
    dvec = eig.vectors.T @ (w_req - e.center)
    lam = eig.lambdas

    def member(mu):
        return float(np.sum(lam * dvec**2 / (1.0 + mu * lam) ** 2)) - 1.0

    hi = 1.0
    for _ in range(200):
        if member(hi) < 0.0:
            break
        hi *= 4.0
    mu = brentq(member, 0.0, hi, xtol=1e-15, rtol=8.9e-16, maxiter=300)
    w = e.center + eig.vectors @ (dvec / (1.0 + mu * lam))
    return w, float(np.linalg.norm(w - w_req)), False


def jump_analysis(
    e: Ellipsoid,
    layout: CoordLayout,
    j: int,
    k: int,
    n_samples: int,
    tau: float,
    rng: np.random.Generator,
) -> JumpReport:
    """Prevalence of a down/up jump between runs k and k+1 of feature j."""
    blk = layout.block(j)
    if not 0 <= k < blk.size - 1:
        raise RashgamError(f"boundary {k} out of range for feature {j}")
    if n_samples < 1:
        raise RashgamError("need at least one sample")
    W = e.sample(rng, n_samples)
    diff = W[:, blk[k + 1]] - W[:, blk[k]]
    down = int(np.count_nonzero(diff < -tau))
    up = int(np.count_nonzero(diff > tau))
    flat = n_samples - down - up
    return JumpReport(
        feature=j,
        boundary=k,
        n_samples=n_samples,
        fraction_down=down / n_samples,
        fraction_up=up / n_samples,
        fraction_flat=flat / n_samples,
        tau=tau,
    )
