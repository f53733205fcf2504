"""Finite carrier grid and nonnegative cell measures.

Everything in this package lives on a finite grid of cells: index sets are
unions of whole cells and a measure assigns one nonnegative weight per cell.
This keeps every distributional quantity exactly computable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, GridMismatchError

PROBABILITY_TOTAL_TOL = 1e-12


@dataclass(frozen=True)
class GroundGrid:
    """A d-dimensional box of cells, indexed 0..cell_count-1 in row-major order."""

    extents: tuple[int, ...]

    def __post_init__(self):
        ext = tuple(int(e) for e in self.extents)
        if len(ext) < 1:
            raise ConfigError("grid needs at least one axis")
        if any(e < 1 for e in ext):
            raise ConfigError("every grid extent must be >= 1")
        object.__setattr__(self, "extents", ext)

    @property
    def dims(self) -> int:
        return len(self.extents)

    @property
    def cell_count(self) -> int:
        return math.prod(self.extents)

    @property
    def full_mask(self) -> int:
        return (1 << self.cell_count) - 1

    def coords(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.cell_count:
            raise ConfigError(f"cell index {index} outside grid")
        out = []
        for e in reversed(self.extents):
            out.append(index % e)
            index //= e
        return tuple(reversed(out))

    def index(self, coords) -> int:
        coords = tuple(int(c) for c in coords)
        if len(coords) != self.dims:
            raise ConfigError("coordinate arity does not match grid dimension")
        idx = 0
        for c, e in zip(coords, self.extents):
            if not 0 <= c < e:
                raise ConfigError(f"coordinate {coords} outside grid")
            idx = idx * e + c
        return idx


def mask_cells(mask: int) -> list[int]:
    """Indices of the set bits of ``mask``, ascending."""
    cells = []
    while mask:
        low = mask & -mask
        cells.append(low.bit_length() - 1)
        mask ^= low
    return cells


class CellMeasure:
    """Nonnegative weights on grid cells.

    ``kind`` tags the role the measure plays for a process family:
    ``intensity`` (mean/variance measure), ``probability`` (must sum to one)
    or ``dirichlet`` (parameter measure, positive total).
    """

    KINDS = ("intensity", "probability", "dirichlet")

    def __init__(self, grid: GroundGrid, weights, kind: str = "intensity"):
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (grid.cell_count,):
            raise ConfigError(
                f"measure needs {grid.cell_count} weights, got {weights.shape}"
            )
        if np.any(weights < 0):
            raise ConfigError("measure weights must be nonnegative")
        if kind not in self.KINDS:
            raise ConfigError(f"unknown measure kind {kind!r}")
        total = float(weights.sum())
        if kind == "probability" and abs(total - 1.0) > PROBABILITY_TOTAL_TOL:
            raise ConfigError(f"probability measure sums to {total}, not 1")
        if kind == "dirichlet" and total <= 0:
            raise ConfigError("dirichlet parameter measure must have positive total")
        self.grid = grid
        self.weights = weights
        self.weights.setflags(write=False)
        self.kind = kind
        self.total = total

    @classmethod
    def uniform_probability(cls, grid: GroundGrid) -> "CellMeasure":
        n = grid.cell_count
        return cls(grid, np.full(n, 1.0 / n), "probability")

    @classmethod
    def counting(cls, grid: GroundGrid, kind: str = "intensity") -> "CellMeasure":
        return cls(grid, np.ones(grid.cell_count), kind)

    def __repr__(self):
        return f"CellMeasure(kind={self.kind!r}, total={self.total!r})"


def measure_of(measure: CellMeasure, subset) -> float:
    """Total weight of the cells in ``subset`` (an IndexedSet or raw mask)."""
    mask = getattr(subset, "mask", subset)
    grid = getattr(subset, "grid", None)
    if grid is not None and grid != measure.grid:
        raise GridMismatchError("set and measure live on different grids")
    w = measure.weights
    return float(sum(w[c] for c in mask_cells(mask)))
