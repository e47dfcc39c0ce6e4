"""Tensor-product spatial grid over (R, rhat, y, z) and multilinear interpolation.

Axis order is fixed as (R, rhat, y, z) with the z index fastest
(C-order flattening).  Grids are uniform per axis.  When jumps are
active the rhat axis is extended by the factor 1+gamma_rhat (positive
jumps) and the z axis is truncated by 1+gamma_z (negative jumps) so
that post-jump states remain resolved.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sps

from .model import ModelParams

__all__ = ["GridConfig", "Grid4D", "ScalarField", "build_grid",
           "interpolate", "interpolation_matrix"]

AXIS_NAMES = ("R", "rhat", "y", "z")


@dataclass(frozen=True)
class GridConfig:
    """Axis bounds and node counts before any jump adjustment.

    R spans exactly [0, 1]; rhat in [0, rhat_max]; y in [y_min, 0];
    z in [0, z_max].  All node counts must be at least 4 so a 3-point
    stencil never exhausts an axis.
    """

    rhat_max: float = 1.0
    y_min: float = -6.0
    z_max: float = 4.0
    n_R: int = 10
    n_rhat: int = 10
    n_y: int = 10
    n_z: int = 10

    def __post_init__(self):
        for name in ("n_R", "n_rhat", "n_y", "n_z"):
            if getattr(self, name) < 4:
                raise ValueError(f"{name} must be >= 4 (3-point stencil support)")
        if not self.rhat_max > 0.0:
            raise ValueError("rhat_max must be positive")
        if not self.y_min < 0.0:
            raise ValueError("y_min must be negative")
        if not self.z_max > 0.0:
            raise ValueError("z_max must be positive")


@dataclass(frozen=True)
class Grid4D:
    """Uniform tensor-product grid with C-order flattening (z fastest)."""

    axes: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(float(a[1] - a[0]) for a in self.axes)

    def flatten_index(self, multi) -> np.ndarray:
        return np.ravel_multi_index(multi, self.shape)

    def unflatten_index(self, flat) -> tuple:
        return np.unravel_index(flat, self.shape)

    def coordinate_fields(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """Nodal coordinate arrays (R, rhat, y, z), each of length N."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return tuple(m.ravel() for m in mesh)


@dataclass
class ScalarField:
    """Nodal values of a scalar quantity on a Grid4D."""

    grid: Grid4D
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.size,):
            raise ValueError(
                f"field length {self.values.shape} does not match grid size {self.grid.size}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field contains non-finite values")

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


def build_grid(cfg: GridConfig, p: ModelParams) -> Grid4D:
    """Build the computational grid, jump-adjusting the rhat/z upper bounds.

    A positive rhat jump extends the rhat axis to rhat_max*(1+gamma_rhat);
    a negative FX jump truncates the z axis to z_max*(1+gamma_z).  Node
    counts are unchanged.
    """
    rhat_hi = cfg.rhat_max * (1.0 + p.gamma_rhat) if p.gamma_rhat > 0 else cfg.rhat_max
    # full devaluation (gamma_z = -1) would collapse the axis; the
    # post-jump FX is identically zero then, so the domain stays unscaled
    z_hi = cfg.z_max * (1.0 + p.gamma_z) if -1.0 < p.gamma_z < 0.0 else cfg.z_max
    axes = (
        np.linspace(0.0, 1.0, cfg.n_R),
        np.linspace(0.0, rhat_hi, cfg.n_rhat),
        np.linspace(cfg.y_min, 0.0, cfg.n_y),
        np.linspace(0.0, z_hi, cfg.n_z),
    )
    return Grid4D(axes)


def _cells_and_weights(axis: np.ndarray, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Bracketing cell index and local coordinate along one axis.

    Points outside the hull keep the nearest boundary cell and a local
    coordinate outside [0, 1]: that is multilinear extrapolation.
    """
    i = np.clip(np.searchsorted(axis, x, side="right") - 1, 0, len(axis) - 2)
    t = (x - axis[i]) / (axis[i + 1] - axis[i])
    return i, t


def interpolation_matrix(grid: Grid4D, points: np.ndarray) -> sps.csr_matrix:
    """Sparse operator evaluating fields at arbitrary points.

    Row m of the result applied to a flattened field gives the
    multilinear interpolation (or out-of-hull extrapolation) at
    ``points[m]``.  At most 16 entries per row.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 4:
        raise ValueError("points must have 4 columns (R, rhat, y, z)")
    m = pts.shape[0]
    cells, locs = [], []
    for k in range(4):
        i, t = _cells_and_weights(grid.axes[k], pts[:, k])
        cells.append(i)
        locs.append(t)
    rows, cols, vals = [], [], []
    for corner in range(16):
        bits = [(corner >> k) & 1 for k in range(4)]
        w = np.ones(m)
        multi = []
        for k in range(4):
            w = w * (locs[k] if bits[k] else 1.0 - locs[k])
            multi.append(cells[k] + bits[k])
        rows.append(np.arange(m))
        cols.append(grid.flatten_index(multi))
        vals.append(w)
    out = sps.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, grid.size))
    out.sum_duplicates()
    return out


def interpolate(f: ScalarField, x) -> float:
    """Multilinear interpolation of ``f`` at a single 4D point.

    Inside the hull this is ordinary multilinear interpolation, exact at
    nodes and on fields affine in each coordinate; outside the hull the
    boundary cell's multilinear form is extended (extrapolation).
    """
    E = interpolation_matrix(f.grid, np.asarray(x, dtype=float)[None, :])
    return float((E @ f.values)[0])
