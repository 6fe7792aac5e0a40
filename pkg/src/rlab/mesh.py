"""Structured grids and field storage.

Two domain kinds are supported:

* periodic tori T^n (n = 1..4), the only domains on which time evolution
  and integration are performed;
* open coordinate charts, used for static pointwise curvature tests only.
  A chart carries a boundary collar of non-evaluable points whose width
  grows by one layer per derivative applied (tracked by ``margin``).

All fields store their components in structure-of-arrays layout: component
indices first, the n grid axes last.  Derivatives are second-order centered
stencils; on a torus they wrap periodically, on a chart the collar cells
contain wrap garbage and must be discarded via ``interior``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

STENCIL_RADIUS = 1
TORUS_MIN_RES = 8
CHART_MIN_RES = 2 * STENCIL_RADIUS + 1


class GridError(ValueError):
    pass


class SPDError(RuntimeError):
    """Metric lost positive definiteness (flow blow-up or bad input)."""


@dataclass(frozen=True)
class Grid:
    kind: str                      # "torus" | "chart"
    n: int
    shape: tuple[int, ...]         # resolution per axis
    extents: tuple[float, ...]
    spacing: tuple[float, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "spacing",
                           tuple(e / r for e, r in zip(self.extents, self.shape)))

    @property
    def periodic(self) -> bool:
        return self.kind == "torus"

    @property
    def npoints(self) -> int:
        return int(np.prod(self.shape))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_coords(self, axis: int) -> np.ndarray:
        h = self.spacing[axis]
        if self.kind == "torus":
            return np.arange(self.shape[axis]) * h
        # chart: cell-centered, symmetric about the origin
        return -0.5 * self.extents[axis] + (np.arange(self.shape[axis]) + 0.5) * h

    def coords(self) -> list[np.ndarray]:
        """Meshgrid coordinate arrays, one per axis, each of shape ``self.shape``."""
        axes = [self.axis_coords(a) for a in range(self.n)]
        return list(np.meshgrid(*axes, indexing="ij"))

    def evaluable_mask(self, margin: int = STENCIL_RADIUS) -> np.ndarray:
        """True where a field with the given collar margin is valid."""
        mask = np.ones(self.shape, dtype=bool)
        if self.kind == "chart" and margin > 0:
            for ax in range(self.n):
                sl = [slice(None)] * self.n
                sl[ax] = slice(0, margin)
                mask[tuple(sl)] = False
                sl[ax] = slice(-margin, None)
                mask[tuple(sl)] = False
        return mask

    def descriptor(self) -> dict:
        return {"kind": self.kind, "n": self.n,
                "shape": list(self.shape), "extents": list(self.extents)}


def build_grid(kind: str, n: int, resolutions: Sequence[int],
               extents: Sequence[float]) -> Grid:
    if kind not in ("torus", "chart"):
        raise GridError(f"unknown grid kind {kind!r}")
    if not 1 <= n <= 4:
        raise GridError(f"dimension n={n} outside 1..4")
    if len(resolutions) != n or len(extents) != n:
        raise GridError("resolutions/extents length must equal n")
    min_res = TORUS_MIN_RES if kind == "torus" else CHART_MIN_RES
    for r in resolutions:
        if r < min_res:
            raise GridError(f"resolution {r} below stencil minimum {min_res} for {kind}")
    for e in extents:
        if not e > 0:
            raise GridError("extents must be positive")
    return Grid(kind, n, tuple(int(r) for r in resolutions),
                tuple(float(e) for e in extents))


# --------------------------------------------------------------------------
# raw stencils on component-first arrays (grid axes are the last grid.n axes)

def _grid_axis(values: np.ndarray, grid: Grid, axis: int) -> int:
    return values.ndim - grid.n + axis


def diff1(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Centered first derivative along grid axis ``axis``; periodic wrap."""
    ax = _grid_axis(values, grid, axis)
    h = grid.spacing[axis]
    return (np.roll(values, -1, axis=ax) - np.roll(values, 1, axis=ax)) / (2.0 * h)


def diff2(values: np.ndarray, grid: Grid, axis: int) -> np.ndarray:
    """Centered second derivative along grid axis ``axis``."""
    ax = _grid_axis(values, grid, axis)
    h = grid.spacing[axis]
    return (np.roll(values, -1, axis=ax) - 2.0 * values
            + np.roll(values, 1, axis=ax)) / (h * h)


def grad_stack(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Stack of first derivatives; new derivative axis comes first."""
    return np.stack([diff1(values, grid, a) for a in range(grid.n)])


# --------------------------------------------------------------------------
# fields

@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray
    margin: int = 0

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise GridError("scalar values shape does not match grid")
        if not np.all(np.isfinite(self.values)):
            raise GridError("scalar field contains non-finite values")


SYMMETRIES = ("none", "sym2", "riemann-like")


@dataclass(frozen=True)
class TensorField:
    """Componentwise tensor field; ``con`` upper indices first, then ``cov`` lower."""
    grid: Grid
    values: np.ndarray
    cov: int
    con: int = 0
    symmetry: str = "none"
    margin: int = 0

    def __post_init__(self):
        n, rank = self.grid.n, self.cov + self.con
        if self.values.shape != (n,) * rank + self.grid.shape:
            raise GridError("tensor component array shape mismatch")
        if self.symmetry not in SYMMETRIES:
            raise GridError(f"unknown symmetry tag {self.symmetry!r}")
        scale = max(float(np.max(np.abs(self.values))), 1e-30)
        if self.symmetry == "sym2":
            if rank != 2:
                raise GridError("sym2 requires rank 2")
            if np.max(np.abs(self.values - np.swapaxes(self.values, 0, 1))) \
                    > 1e-10 * scale:
                raise GridError("declared sym2 symmetry violated")
        elif self.symmetry == "riemann-like":
            if rank != 4:
                raise GridError("riemann-like requires rank 4")
            v = self.values
            perm = (2, 3, 0, 1) + tuple(range(4, v.ndim))
            bad = max(np.max(np.abs(v + np.swapaxes(v, 0, 1))),
                      np.max(np.abs(v + np.swapaxes(v, 2, 3))),
                      np.max(np.abs(v - np.transpose(v, perm))))
            if bad > 1e-10 * scale:
                raise GridError("declared riemann-like symmetry violated")

    @property
    def rank(self) -> tuple[int, int]:
        return (self.con, self.cov)


def partial_derivative(fld, axis: int, order: int = 1):
    """Componentwise coordinate derivative of a scalar or tensor field.

    order 1/2 is a first/second centered difference; chart fields lose one
    boundary layer of validity per application.
    """
    if order not in (1, 2):
        raise GridError("derivative order must be 1 or 2")
    op = diff1 if order == 1 else diff2
    if isinstance(fld, ScalarField):
        return ScalarField(fld.grid, op(fld.values, fld.grid, axis),
                           margin=fld.margin + 1)
    return TensorField(fld.grid, op(fld.values, fld.grid, axis),
                       cov=fld.cov, con=fld.con, symmetry="none",
                       margin=fld.margin + 1)


def interior(values: np.ndarray, grid: Grid, margin: int) -> np.ndarray:
    """Drop ``margin`` collar layers on a chart (no-op on a torus)."""
    if grid.kind == "torus" or margin == 0:
        return values
    sl = (slice(None),) * (values.ndim - grid.n) + (slice(margin, -margin),) * grid.n
    return values[sl]


# --------------------------------------------------------------------------
# metric

class MetricField:
    """Symmetric positive-definite (0,2) field with cached inverse and sqrt(det)."""

    def __init__(self, grid: Grid, values: np.ndarray, check: bool = True):
        self.grid = grid
        n = grid.n
        if values.shape != (n, n) + grid.shape:
            raise GridError("metric component array shape mismatch")
        self.values = 0.5 * (values + np.swapaxes(values, 0, 1))
        mats = np.moveaxis(self.values.reshape(n, n, -1), -1, 0)   # (P, n, n)
        if check:
            eig = np.linalg.eigvalsh(mats)
            spd_tol = 1e-10 * float(np.max(np.abs(np.einsum("ii...->i...", self.values))))
            self.min_eig = float(eig.min())
            if not self.min_eig > spd_tol:
                raise SPDError(f"metric not SPD: min eigenvalue {self.min_eig:.3e}")
        else:
            self.min_eig = float("nan")
        inv = np.linalg.inv(mats)
        self.inv = np.moveaxis(inv, 0, -1).reshape(n, n, *grid.shape)
        det = np.linalg.det(mats).reshape(grid.shape)
        if np.any(det <= 0):
            raise SPDError("metric determinant non-positive")
        self.sqrt_det = np.sqrt(det)

    @property
    def n(self) -> int:
        return self.grid.n

    def scaled(self, c: float) -> "MetricField":
        return MetricField(self.grid, c * self.values, check=False)


def flat_metric(grid: Grid) -> MetricField:
    n = grid.n
    vals = np.zeros((n, n) + grid.shape)
    for i in range(n):
        vals[i, i] = 1.0
    return MetricField(grid, vals)


def integrate(values, metric: MetricField) -> float:
    """Integral over a closed torus: sum of value * sqrt(det g) * cell volume."""
    if metric.grid.kind != "torus":
        raise GridError("integration requires a torus grid (closed manifold)")
    arr = values.values if isinstance(values, ScalarField) else np.asarray(values)
    return float(np.sum(arr * metric.sqrt_det) * metric.grid.cell_volume)


def l2_norm(values: np.ndarray, metric: MetricField) -> float:
    """L2 norm of a pointwise-scalar array (e.g. a pointwise tensor norm)."""
    return float(np.sqrt(integrate(values * values, metric)))
