"""Coordinate-wise Rashomon intervals by bracketing plus binary search,
and the axis-aligned box-volume proxy built from them.

These routines are deliberately independent of the ellipsoid machinery:
they only evaluate the loss along one coordinate at a time, which makes
them a useful cross-check for any fitted ellipsoid.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, RashgamError

_MAX_DOUBLINGS = 200


@dataclass(frozen=True)
class CoordInterval:
    j: int
    left: float
    right: float
    tolerance: float

    @property
    def width(self) -> float:
        return self.right - self.left


def _coord_value(objective, omega: np.ndarray, j: int, t: float) -> float:
    w = omega.copy()
    w[j] = t
    return float(objective.value(w))


def get_bounds(objective, j: int, omega: np.ndarray, theta: float, delta: float, left: bool) -> float:
    """Step-double away from omega[j] until the loss exceeds theta."""
    if delta <= 0:
        raise RashgamError("search step must be positive")
    step = -delta if left else delta
    end = float(omega[j])
    for _ in range(_MAX_DOUBLINGS):
        end += step
        if _coord_value(objective, omega, j, end) > theta:
            return end
        step *= 2.0
    raise ConvergenceError(
        f"no loss crossing within {_MAX_DOUBLINGS} doublings along coordinate {j}"
    )


def _bisect_boundary(objective, j, omega, theta, delta, inside: float, outside: float) -> float:
    """Shrink the (inside, outside) bracket below delta; returns the in-set end."""
    while abs(outside - inside) >= delta:
        mid = 0.5 * (inside + outside)
        if _coord_value(objective, omega, j, mid) > theta:
            outside = mid
        else:
            inside = mid
    return inside


def segment_ends(objective, j: int, omega: np.ndarray, theta: float, delta: float) -> CoordInterval:
    """In-set interval of coordinate j with all other coordinates held fixed."""
    base = _coord_value(objective, omega, j, float(omega[j]))
    if base > theta:
        raise RashgamError(
            f"starting point is outside the Rashomon set (loss {base} > theta {theta})"
        )
    lo_out = get_bounds(objective, j, omega, theta, delta, left=True)
    hi_out = get_bounds(objective, j, omega, theta, delta, left=False)
    left = _bisect_boundary(objective, j, omega, theta, delta, float(omega[j]), lo_out)
    right = _bisect_boundary(objective, j, omega, theta, delta, float(omega[j]), hi_out)
    return CoordInterval(j=j, left=left, right=right, tolerance=delta)


def coord_intervals(objective, omega: np.ndarray, theta: float, delta: float) -> list[CoordInterval]:
    return [segment_ends(objective, j, omega, theta, delta) for j in range(omega.size)]


def box_volume(objective, omega: np.ndarray, theta: float, delta: float) -> float:
    """Product of the coordinate interval widths at omega."""
    v = 1.0
    for iv in coord_intervals(objective, omega, theta, delta):
        v *= iv.width
    return v


def bracketing_center_search(
    objective,
    omega0: np.ndarray,
    theta: float,
    delta: float,
    max_iter: int = 10,
    ternary_tol: float | None = None,
):
    """Cyclic coordinate ternary search maximizing the box volume.

    Per coordinate, the in-set segment is bracketed and probed at thirds;
    a candidate replaces the current point only when it does not decrease
    the box volume, so the best-so-far volume is non-decreasing.
    Returns (omega, volume) for the best visited point.
    """
    omega = np.asarray(omega0, dtype=float).copy()
    if ternary_tol is None:
        ternary_tol = delta
    best_v = box_volume(objective, omega, theta, delta)
    best_w = omega.copy()
    for _ in range(max_iter):
        moved = False
        for j in range(omega.size):
            seg = segment_ends(objective, j, omega, theta, delta)
            lo, hi = seg.left, seg.right

            def vol_at(t):
                w = omega.copy()
                w[j] = t
                return box_volume(objective, w, theta, delta)

            while hi - lo > ternary_tol:
                m1 = lo + (hi - lo) / 3.0
                m2 = lo + 2.0 * (hi - lo) / 3.0
                if vol_at(m1) < vol_at(m2):
                    lo = m1
                else:
                    hi = m2
            v_lo, v_hi = vol_at(lo), vol_at(hi)
            t, v = (hi, v_hi) if v_lo < v_hi else (lo, v_lo)
            if v >= best_v and abs(t - omega[j]) > ternary_tol:
                moved = True
            if v >= best_v:
                omega[j] = t
                best_v = v
                best_w = omega.copy()
        if not moved:
            break
    return best_w, best_v
