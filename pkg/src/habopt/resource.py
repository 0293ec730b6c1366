"""Resource distributions in the bathtub set and their structural metrics.

A resource field ``m`` is admissible when ``0 <= m <= kappa`` cell-wise and its
mean equals ``m0``. Bang-bang fields take only the values 0 and ``kappa``; on a
grid the mean constraint generally forces one fractional cell, which the
metrics tolerate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import Grid, ScalarField, integrate

BOUND_TOL = 1e-12
MEAN_TOL = 1e-10


@dataclass(frozen=True)
class ConstraintSet:
    kappa: float
    m0: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if not 0 < self.m0 < self.kappa:
            raise ValueError(f"m0 must lie in (0, kappa={self.kappa}), got {self.m0}")

    def to_dict(self):
        return {"kappa": float(self.kappa), "m0": float(self.m0)}


@dataclass(frozen=True)
class ResourceField:
    """An admissible resource distribution. Construction validates admissibility."""

    field: ScalarField
    constraints: ConstraintSet

    def __post_init__(self):
        v = self.field.values
        kappa, m0 = self.constraints.kappa, self.constraints.m0
        if v.min() < -BOUND_TOL or v.max() > kappa + BOUND_TOL:
            raise ValueError(
                f"values outside [0, {kappa}]: range [{v.min()}, {v.max()}]"
            )
        mean = integrate(self.field.grid, self.field)
        if abs(mean - m0) > MEAN_TOL:
            raise ValueError(f"mean {mean!r} differs from m0={m0!r}")

    @property
    def grid(self) -> Grid:
        return self.field.grid

    @property
    def values(self) -> np.ndarray:
        return self.field.values

    def reflected(self, axis: int = 0) -> "ResourceField":
        flipped = np.flip(self.field.reshaped(), axis=axis)
        return ResourceField(ScalarField(self.grid, flipped), self.constraints)

    def to_dict(self) -> dict:
        data = self.field.to_dict()
        data["constraints"] = self.constraints.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "ResourceField":
        c = data["constraints"]
        return cls(ScalarField.from_dict(data), ConstraintSet(c["kappa"], c["m0"]))


def _clamped_mean(f, t, kappa):
    return float(np.mean(np.clip(f + t, 0.0, kappa)))


def project_admissible(f: ScalarField, c: ConstraintSet) -> ResourceField:
    """L2 projection onto the bathtub set: ``clip(f + t, 0, kappa)``.

    The shift ``t`` is bracketed by bisection on the (monotone, piecewise
    linear) clamped mean, then solved exactly on the final free set.
    """
    v = np.asarray(f.values, dtype=float)
    kappa, m0 = c.kappa, c.m0
    lo = -float(v.max())          # clamped mean is 0 here
    hi = kappa - float(v.min())   # and kappa here
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if _clamped_mean(v, mid, kappa) < m0:
            lo = mid
        else:
            hi = mid
    t = 0.5 * (lo + hi)
    # Exact solve for t with the active sets frozen at the bisection point.
    shifted = v + t
    free = (shifted > 0.0) & (shifted < kappa)
    if np.any(free):
        n_upper = np.count_nonzero(shifted >= kappa)
        t_exact = (m0 * v.size - kappa * n_upper - v[free].sum()) / np.count_nonzero(free)
        cand = v + t_exact
        if np.array_equal(free, (cand > 0.0) & (cand < kappa)):
            t = t_exact
    out = np.clip(v + t, 0.0, kappa)
    # For large |f| the sum v + t loses digits; put the mass residue on the
    # free cells, which keeps the KKT structure.
    free = (out > 0.0) & (out < kappa)
    if np.any(free):
        out[free] += (m0 * v.size - out.sum()) / np.count_nonzero(free)
        np.clip(out, 0.0, kappa, out=out)
    return ResourceField(ScalarField(f.grid, out), c)


def constant_field(grid: Grid, c: ConstraintSet) -> ResourceField:
    return ResourceField(grid.constant(c.m0), c)


def make_crenel_1d(grid: Grid, c: ConstraintSet, intervals) -> ResourceField:
    """Bang-bang profile equal to ``kappa`` on a union of intervals.

    Cells are filled in proportion to their overlap with the intervals. When
    the total length differs slightly from ``m0 / kappa``, the mismatch is
    absorbed by the cells at the interval ends, so the mean is exact and at
    most one fractional cell sits at each end.

    >>> from habopt.grid import build_grid
    >>> g = build_grid(1, [16])
    >>> make_crenel_1d(g, ConstraintSet(1.0, 0.4), [(0.0, 0.4)]).values[5:8]
    array([1. , 0.4, 0. ])
    """
    if grid.dim != 1:
        raise ValueError("crenels are defined on 1D grids only")
    ivs = sorted((float(a), float(b)) for a, b in intervals)
    if not ivs:
        raise ValueError("at least one interval is required")
    for a, b in ivs:
        if not 0.0 <= a < b <= 1.0:
            raise ValueError(f"invalid interval ({a}, {b})")
    for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
        if a1 < b0:
            raise ValueError("intervals overlap")

    n = grid.cells_per_axis[0]
    h = grid.spacing[0]
    left = np.arange(n) * h
    right = left + h
    cover = np.zeros(n)
    for a, b in ivs:
        cover += np.clip(np.minimum(right, b) - np.maximum(left, a), 0.0, None) / h
    cover = np.clip(cover, 0.0, 1.0)
    # overlaps computed from h-multiples carry rounding noise; snap it away
    snap = np.abs(cover - np.round(cover)) < 1e-9
    cover[snap] = np.round(cover[snap])
    vals = c.kappa * cover

    deficit = c.m0 * n - vals.sum()  # in units of cell values
    if abs(deficit) > c.kappa * 1e-12 * n:
        ends = []
        for a, b in ivs:
            ends.append(min(int(np.floor(b / h - 1e-12)), n - 1))
            ends.append(min(int(np.floor(a / h + 1e-12)), n - 1))
        if abs(deficit) > c.kappa * len(ends):
            raise ValueError(
                f"interval length {sum(b - a for a, b in ivs)} inconsistent with "
                f"m0/kappa={c.m0 / c.kappa}"
            )
        for i in ends:
            if deficit > 0:
                room = c.kappa - vals[i]
                add = min(room, deficit)
            else:
                add = -min(vals[i], -deficit)
            vals[i] += add
            deficit -= add
            if deficit == 0:
                break
        else:
            # Neighbouring cells take what the interval ends could not.
            for a, b in ivs:
                for i in (min(int(np.ceil(b / h)), n - 1), max(int(np.floor(a / h)) - 1, 0)):
                    if deficit > 0:
                        add = min(c.kappa - vals[i], deficit)
                    else:
                        add = -min(vals[i], -deficit)
                    vals[i] += add
                    deficit -= add
        if abs(deficit) > c.kappa * 1e-9:
            raise ValueError("could not match the prescribed mean with interval-end cells")
    # Remove the rounding residue on the last fractional cell.
    frac = np.flatnonzero((vals > 0) & (vals < c.kappa))
    if frac.size:
        i = frac[-1]
        vals[i] = np.clip(vals[i] + (c.m0 * n - vals.sum()), 0.0, c.kappa)
    return ResourceField(ScalarField(grid, vals), c)


def left_crenel(grid: Grid, c: ConstraintSet) -> ResourceField:
    return make_crenel_1d(grid, c, [(0.0, c.m0 / c.kappa)])


def right_crenel(grid: Grid, c: ConstraintSet) -> ResourceField:
    return make_crenel_1d(grid, c, [(1.0 - c.m0 / c.kappa, 1.0)])


def make_random(grid: Grid, c: ConstraintSet, seed: int) -> ResourceField:
    """Seeded i.i.d. uniform values in ``[0, kappa]``, projected onto the set.

    Uses numpy's PCG64 bit generator, so a given seed replays bit-identically.
    """
    rng = np.random.default_rng(seed)
    raw = rng.uniform(0.0, c.kappa, size=grid.total_cells)
    return project_admissible(ScalarField(grid, raw), c)


def bang_bang_fraction(m: ResourceField, tol: float | None = None) -> float:
    """Fraction of cells within ``tol`` of 0 or of ``kappa``."""
    kappa = m.constraints.kappa
    if tol is None:
        tol = 1e-3 * kappa
    if not 0 < tol < kappa / 2:
        raise ValueError(f"tol must lie in (0, kappa/2), got {tol}")
    v = m.values
    hit = (np.abs(v) <= tol) | (np.abs(v - kappa) <= tol)
    return float(np.count_nonzero(hit)) / v.size


def resource_set(m: ResourceField, threshold: float | None = None) -> np.ndarray:
    """Boolean array (grid shape) of cells above ``threshold`` (default kappa/2)."""
    if threshold is None:
        threshold = m.constraints.kappa / 2
    return m.field.reshaped() > threshold


def fragment_count_1d(m: ResourceField) -> int:
    """Number of maximal runs of consecutive cells above ``kappa / 2``."""
    if m.grid.dim != 1:
        raise ValueError("fragment_count_1d needs a 1D field")
    on = resource_set(m).astype(np.int8)
    return int(np.count_nonzero(np.diff(np.concatenate(([0], on))) == 1))


def monotone_concentration_defect(m: ResourceField, threshold: float | None = None) -> float:
    """Fraction of (axis, grid line) pairs along which the resource set is not monotone.

    The set is thresholded to 0/1. Along each axis, every grid line is
    classified as non-increasing, non-decreasing, both (constant) or neither.
    The axis orientation is the majority among oriented lines (ties go to
    non-increasing); non-monotone lines and lines oriented against the
    majority count as defects. Zero means the set is monotone in every
    variable.
    """
    e = resource_set(m, threshold).astype(np.int8)
    failed = 0
    total = 0
    for d in range(e.ndim):
        lines = np.moveaxis(e, d, -1).reshape(-1, e.shape[d])
        steps = np.diff(lines, axis=1)
        dec = np.all(steps <= 0, axis=1)
        inc = np.all(steps >= 0, axis=1)
        n_dec = np.count_nonzero(dec & ~inc)
        n_inc = np.count_nonzero(inc & ~dec)
        ok = dec if n_dec >= n_inc else inc
        failed += int(np.count_nonzero(~ok))
        total += lines.shape[0]
    return failed / total


def l1_distance(a: ResourceField, b: ResourceField) -> float:
    return a.grid.cell_volume * float(np.sum(np.abs(a.values - b.values)))


def distance_to_boundary_crenel(m: ResourceField) -> float:
    """L1 distance to the nearer of the two crenels touching the boundary."""
    if m.grid.dim != 1:
        raise ValueError("distance_to_boundary_crenel needs a 1D field")
    return min(
        l1_distance(m, left_crenel(m.grid, m.constraints)),
        l1_distance(m, right_crenel(m.grid, m.constraints)),
    )
