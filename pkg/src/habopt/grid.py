"""Cell-centered tensor grids on the unit box, the Neumann Laplacian and quadrature.

Fields are stored flat in row-major order over the cell multi-index, the last
axis varying fastest (numpy's C order). Cell ``(i_1, ..., i_n)`` is centered at
``((i_1 + 1/2) h_1, ..., (i_n + 1/2) h_n)``.

The zero-flux boundary condition is realized with mirrored ghost cells: the
ghost value beyond a boundary face equals the adjacent interior value, so the
boundary flux vanishes and the assembled operator stays symmetric.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache, reduce

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import GridMismatchError, SingularSystemError

FIELD_ORDER = "row-major-last-axis-fastest"

#: Relative residual required from every shifted linear solve.
SOLVE_RTOL = 1e-10

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centered grid on ``(0, 1)^dim``."""

    dim: int
    cells_per_axis: tuple[int, ...]

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(1.0 / n for n in self.cells_per_axis)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def total_cells(self) -> int:
        return int(np.prod(self.cells_per_axis))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells_per_axis

    def centers(self, axis: int) -> np.ndarray:
        """1D array of cell-center coordinates along ``axis``."""
        n = self.cells_per_axis[axis]
        return (np.arange(n) + 0.5) / n

    def mesh(self) -> list[np.ndarray]:
        """Cell-center coordinates as ``dim`` arrays of shape ``self.shape``."""
        return np.meshgrid(*(self.centers(d) for d in range(self.dim)), indexing="ij")

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def constant(self, value: float) -> "ScalarField":
        return ScalarField(self, np.full(self.total_cells, float(value)))

    def sample(self, func) -> "ScalarField":
        """Evaluate ``func(*coords)`` at the cell centers."""
        vals = np.broadcast_to(func(*self.mesh()), self.shape)
        return ScalarField(self, np.asarray(vals, dtype=float).ravel())


def build_grid(dim: int, cells_per_axis) -> Grid:
    """Create a grid, rejecting degenerate axes.

    An axis with a single cell has no interior face, so the mirrored Neumann
    stencil reduces to zero along it; at least two cells are required.
    """
    cells = tuple(int(n) for n in cells_per_axis)
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if len(cells) != dim:
        raise ValueError(f"expected {dim} cell counts, got {len(cells)}")
    if any(n < 2 for n in cells):
        raise ValueError(f"every axis needs at least 2 cells, got {list(cells)}")
    return Grid(dim, cells)


class ScalarField:
    """One real value per grid cell. Immutable; ``values`` is a read-only view."""

    __slots__ = ("grid", "values")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float).reshape(-1)
        if arr.size != grid.total_cells:
            raise GridMismatchError(
                f"field has {arr.size} values, grid has {grid.total_cells} cells"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "values", arr)

    def __setattr__(self, name, value):
        raise AttributeError("ScalarField is immutable")

    def __repr__(self):
        return f"ScalarField(cells={list(self.grid.cells_per_axis)})"

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)

    def to_dict(self) -> dict:
        return {
            "dim": self.grid.dim,
            "cells": list(self.grid.cells_per_axis),
            "order": FIELD_ORDER,
            "values": [float(v) for v in self.values],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScalarField":
        if data.get("order", FIELD_ORDER) != FIELD_ORDER:
            raise ValueError(f"unsupported value order {data['order']!r}")
        grid = build_grid(int(data["dim"]), data["cells"])
        return cls(grid, data["values"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "ScalarField":
        return cls.from_dict(json.loads(text))


def _check(grid: Grid, f: ScalarField):
    if f.grid != grid:
        raise GridMismatchError(
            f"field lives on {list(f.grid.cells_per_axis)}, "
            f"expected {list(grid.cells_per_axis)}"
        )


def _laplacian_array(grid: Grid, values: np.ndarray) -> np.ndarray:
    # Flux form: differences are taken before scaling, which keeps the rounding
    # error proportional to the local variation rather than to |f|.
    f = values.reshape(grid.shape)
    out = np.zeros_like(f)
    for d, h in enumerate(grid.spacing):
        flux = np.diff(f, axis=d)
        pad = [(0, 0)] * grid.dim
        pad[d] = (1, 1)
        flux = np.pad(flux, pad)  # zero flux through the boundary faces
        out += np.diff(flux, axis=d) / (h * h)
    return out.reshape(-1)


def laplacian_apply(grid: Grid, f: ScalarField) -> ScalarField:
    """Discrete Laplacian with homogeneous Neumann condition."""
    _check(grid, f)
    return ScalarField(grid, _laplacian_array(grid, f.values))


def laplacian_norm(grid: Grid) -> float:
    """Infinity norm of the discrete Laplacian, ``sum_d 4 / h_d^2``."""
    return sum(4.0 / (h * h) for h in grid.spacing)


def residual_floor(grid: Grid, mu: float, x_norm: float) -> float:
    """Smallest residual of ``mu L x + ...`` resolvable for a float64 ``x``.

    Rounding ``x`` to double precision perturbs ``mu L x`` by up to
    ``eps * |mu L| * |x|``; for ``mu / h^2`` around 1e7 this exceeds any
    absolute tolerance near 1e-10, so residual tests use
    ``max(tol, residual_floor(...))``.
    """
    return 8.0 * _EPS * mu * laplacian_norm(grid) * x_norm


def integrate(grid: Grid, f: ScalarField) -> float:
    """Midpoint quadrature over the unit box (equals the mean of ``f``)."""
    _check(grid, f)
    return grid.cell_volume * float(np.sum(f.values))


@lru_cache(maxsize=32)
def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Assembled Neumann Laplacian as a sparse Kronecker sum."""
    blocks = []
    for d, (n, h) in enumerate(zip(grid.cells_per_axis, grid.spacing)):
        main = np.full(n, -2.0)
        main[0] = main[-1] = -1.0
        t = sp.diags([np.ones(n - 1), main, np.ones(n - 1)], [-1, 0, 1]) / (h * h)
        before = int(np.prod(grid.cells_per_axis[:d]))
        after = int(np.prod(grid.cells_per_axis[d + 1:]))
        blocks.append(sp.kron(sp.kron(sp.identity(before), t), sp.identity(after)))
    return reduce(lambda a, b: a + b, blocks).tocsr()


def shifted_apply(grid: Grid, mu: float, c, x) -> np.ndarray:
    """``(mu L + diag(c)) x`` on raw arrays, Laplacian in flux form."""
    return mu * _laplacian_array(grid, np.asarray(x, dtype=float)) + np.asarray(c) * x


class ShiftedOperator:
    """Factorized ``mu * L + diag(c)`` reusable across right-hand sides.

    Each solve is followed by iterative refinement until the residual meets
    ``SOLVE_RTOL * max(1, |b|_inf)`` (or the float64 floor of
    :func:`residual_floor` when that is larger); failure to get there is
    reported as :class:`SingularSystemError`.
    """

    max_refinements = 4

    def __init__(self, grid: Grid, mu: float, c):
        if not mu > 0:
            raise ValueError(f"mu must be positive, got {mu}")
        self.grid = grid
        self.mu = float(mu)
        self.c = np.array(c.values if isinstance(c, ScalarField) else c, dtype=float)
        if self.c.shape != (grid.total_cells,):
            raise GridMismatchError("shift field does not match the grid")
        mat = self.mu * laplacian_matrix(grid) + sp.diags(self.c)
        try:
            self._lu = splu(mat.tocsc())
        except RuntimeError as exc:
            raise SingularSystemError(f"factorization failed: {exc}") from exc

    def apply(self, x: np.ndarray) -> np.ndarray:
        return shifted_apply(self.grid, self.mu, self.c, x)

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b.values if isinstance(b, ScalarField) else b, dtype=float)
        if b.ndim == 0:
            b = np.full(self.grid.total_cells, float(b))
        tol = SOLVE_RTOL * max(1.0, float(np.max(np.abs(b))))
        with np.errstate(all="ignore"):
            x = self._lu.solve(b)
            for _ in range(self.max_refinements + 1):
                if not np.all(np.isfinite(x)):
                    break
                r = b - self.apply(x)
                res = float(np.max(np.abs(r)))
                floor = residual_floor(self.grid, self.mu, float(np.max(np.abs(x))))
                if res <= max(tol, floor):
                    return x
                x = x + self._lu.solve(r)
        raise SingularSystemError(
            "shifted operator is singular or too ill-conditioned "
            f"(mu={self.mu:g}, min|c|={np.min(np.abs(self.c)):.3g})"
        )


def solve_shifted(grid: Grid, mu: float, c: ScalarField, b: ScalarField) -> ScalarField:
    """Solve ``(mu L + diag(c)) x = b``."""
    _check(grid, c)
    _check(grid, b)
    return ScalarField(grid, ShiftedOperator(grid, mu, c).solve(b.values))
