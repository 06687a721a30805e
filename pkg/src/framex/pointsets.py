"""Finite-window density estimation for discrete point sets.

The density of an infinite set is defined through window counts as the
window radius grows without bound.  Finite samples cannot take that limit,
so the estimator here scans a ladder of radii, reports the inf/sup count
densities per radius, and quotes the values at the largest window.  The
full curve stays in the result for convergence inspection.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, PreconditionError

__all__ = [
    "PointSet",
    "DensityEstimate",
    "ball_volume",
    "density",
    "uniformly_discrete",
    "union_density",
    "STEP_DIVISOR",
]

# default center grid step is radius / STEP_DIVISOR
STEP_DIVISOR = 20

_EDGE_TOL = 1e-12
_CENTER_BATCH = 2048


def _thread_cap(tasks: int) -> int:
    raw = os.environ.get("FRAMEX_THREADS", "")
    try:
        cap = int(raw)
    except ValueError:
        cap = os.cpu_count() or 1
    if cap < 1:
        cap = 1
    return max(1, min(cap, tasks))


class PointSet:
    """Finite sample of a point configuration, faithful inside a ball.

    declared_extent is the radius R of the ball around the origin inside
    which the sample is complete; density windows must stay inside it.
    """

    __slots__ = ("_points", "_extent")

    def __init__(self, points, declared_extent: float, ambient_dim: int | None = None):
        p = np.asarray(points, dtype=np.float64)
        if p.size == 0:
            if ambient_dim is None:
                ambient_dim = p.shape[1] if p.ndim == 2 else 1
            p = np.zeros((0, int(ambient_dim)))
        if p.ndim == 1:
            p = p[:, None]
        if p.ndim != 2:
            raise PreconditionError(f"expected (count, dim) coordinates, got shape {p.shape}")
        if ambient_dim is not None and p.shape[1] != int(ambient_dim):
            raise DimensionMismatchError(
                f"points live in dim {p.shape[1]}, declared {ambient_dim}"
            )
        extent = float(declared_extent)
        if extent <= 0:
            raise PreconditionError(f"declared extent must be positive, got {extent}")
        if p.shape[0]:
            worst = float(np.max(np.linalg.norm(p, axis=1)))
            if worst > extent * (1.0 + _EDGE_TOL):
                raise PreconditionError(
                    f"point at radius {worst:.6g} escapes the declared extent {extent:.6g}"
                )
        p.setflags(write=False)
        self._points = p
        self._extent = extent

    @property
    def points(self) -> np.ndarray:
        return self._points

    @property
    def ambient_dim(self) -> int:
        return self._points.shape[1]

    @property
    def declared_extent(self) -> float:
        return self._extent

    def __len__(self) -> int:
        return self._points.shape[0]

    def __repr__(self):
        return (
            f"PointSet(count={len(self)}, dim={self.ambient_dim}, "
            f"extent={self._extent:.6g})"
        )


@dataclass(frozen=True)
class DensityEstimate:
    """Window-count densities: quoted values plus the full radius curve.

    per_window holds one (radius, lower, upper) triple per scanned radius;
    lower and upper are the entries of the largest radius.
    """

    lower: float
    upper: float
    window_radii: tuple
    per_window: tuple

    def __post_init__(self):
        if self.lower < 0 or self.upper < 0:
            raise PreconditionError("densities cannot be negative")
        if self.lower > self.upper:
            raise PreconditionError(
                f"lower estimate {self.lower} exceeds upper {self.upper}"
            )
        if len(self.window_radii) != len(self.per_window):
            raise PreconditionError("one curve entry per radius is required")


def ball_volume(dim: int, radius: float) -> float:
    """Euclidean ball volume pi^(k/2) r^k / Gamma(k/2 + 1)."""
    k = int(dim)
    if k < 1:
        raise PreconditionError(f"dimension must be at least 1, got {k}")
    r = float(radius)
    if r < 0:
        raise PreconditionError(f"negative radius {r}")
    return math.pi ** (k / 2.0) / math.gamma(k / 2.0 + 1.0) * r**k


def _center_grid(half: float, step: float, dim: int) -> np.ndarray:
    axis = np.arange(-half, half + step / 2.0, step)
    if axis.size == 0:
        axis = np.zeros(1)
    grids = np.meshgrid(*([axis] * dim), indexing="ij")
    return np.stack(grids, axis=-1).reshape(-1, dim)


def _window_extrema(ps: PointSet, radius: float, step: float):
    vol = ball_volume(ps.ambient_dim, radius)
    centers = _center_grid(ps.declared_extent - radius, step, ps.ambient_dim)
    if len(ps) == 0:
        return radius, 0.0, 0.0
    pts = ps.points
    cap = radius * radius * (1.0 + _EDGE_TOL)
    lo = math.inf
    hi = 0.0
    for start in range(0, centers.shape[0], _CENTER_BATCH):
        chunk = centers[start : start + _CENTER_BATCH]
        d2 = np.sum((chunk[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        counts = np.count_nonzero(d2 <= cap, axis=1)
        lo = min(lo, int(counts.min()))
        hi = max(hi, int(counts.max()))
    return radius, lo / vol, hi / vol


def density(ps: PointSet, radii, center_grid_step: float | None = None) -> DensityEstimate:
    """Scan window centers inside the faithful region at each radius.

    Windows must fit twice into the declared extent so that the center grid
    retains room to move.  The default grid step is radius / STEP_DIVISOR.
    """
    rads = sorted(float(r) for r in radii)
    if not rads:
        raise PreconditionError("need at least one window radius")
    if rads[0] <= 0:
        raise PreconditionError(f"window radii must be positive, got {rads[0]}")
    if rads[-1] > ps.declared_extent / 2.0 * (1.0 + _EDGE_TOL):
        raise PreconditionError(
            f"radius {rads[-1]:.6g} exceeds half the declared extent "
            f"{ps.declared_extent:.6g}; the window escapes the faithful region"
        )

    def scan(r: float):
        step = center_grid_step if center_grid_step is not None else r / STEP_DIVISOR
        if step <= 0:
            raise PreconditionError(f"grid step must be positive, got {step}")
        return _window_extrema(ps, r, step)

    with ThreadPoolExecutor(max_workers=_thread_cap(len(rads))) as pool:
        curve = list(pool.map(scan, rads))
    return DensityEstimate(
        lower=curve[-1][1],
        upper=curve[-1][2],
        window_radii=tuple(rads),
        per_window=tuple(curve),
    )


def uniformly_discrete(ps: PointSet):
    """Minimum pairwise separation; zero or fewer than two points count as discrete.

    Returns (separated, delta) where delta is the brute-force minimum
    distance (infinite for at most one point) and separated says delta > 0.
    A duplicated point yields (False, 0.0).
    """
    n = len(ps)
    if n <= 1:
        return True, math.inf
    pts = ps.points
    best = math.inf
    for start in range(0, n, _CENTER_BATCH):
        chunk = pts[start : start + _CENTER_BATCH]
        d2 = np.sum((chunk[:, None, :] - pts[None, :, :]) ** 2, axis=-1)
        offset = start + np.arange(chunk.shape[0])
        d2[np.arange(chunk.shape[0]), offset] = math.inf
        best = min(best, float(d2.min()))
    delta = math.sqrt(max(best, 0.0))
    return delta > 0.0, delta


def union_density(sets, radii, center_grid_step: float | None = None) -> DensityEstimate:
    """Density of the multiset union; points keep their multiplicity.

    The faithful region of the union is the smallest declared extent;
    points beyond it are unreachable by any admissible window and are
    dropped from the scan (the multiset inside the region is unchanged).
    """
    group = list(sets)
    if not group:
        raise PreconditionError("need at least one point set")
    dim = group[0].ambient_dim
    for ps in group[1:]:
        if ps.ambient_dim != dim:
            raise DimensionMismatchError(
                f"ambient dims differ: {ps.ambient_dim} vs {dim}"
            )
    extent = min(ps.declared_extent for ps in group)
    stacked = np.vstack([ps.points for ps in group]) if group else np.zeros((0, dim))
    if stacked.shape[0]:
        keep = np.linalg.norm(stacked, axis=1) <= extent * (1.0 + _EDGE_TOL)
        stacked = stacked[keep]
    merged = PointSet(stacked, extent, ambient_dim=dim)
    return density(merged, radii, center_grid_step)
