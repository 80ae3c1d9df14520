"""Uniform cell-centered grids, cubes, and cube families.

A Grid covers an axis-aligned box in R^n (n = 1 or 2) with m cells per axis,
all axes sharing the spacing h. Samples live at cell centers a + (k + 1/2)h.
Cubes are axis-aligned with half-open membership: a cell belongs to
Q(x0, r) iff x0 - r/2 <= c < x0 + r/2 holds per axis for its center c.
Integrals are cell sums times h^n, so |Q| means count * h^n throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .errors import EmptyCube, GridMismatch, OutOfDomain, ResolutionTooCoarse

# Absolute snap tolerance on the cell-index scale. Cell centers that land on
# a cube face within this tolerance are resolved by the half-open rule
# (included at the lower face, excluded at the upper) so dyadic children
# partition their parent's cells exactly even when m is not a power of two.
_SNAP = 1e-9


def _as_tuple(x) -> tuple[float, ...]:
    if np.isscalar(x):
        return (float(x),)
    return tuple(float(v) for v in x)


def _ceil_snap(t: float) -> int:
    r = round(t)
    if abs(t - r) <= _SNAP:
        return int(r)
    return int(math.ceil(t))


@dataclass(frozen=True)
class Grid:
    """Uniform grid on a box with equal per-axis width and m cells per axis."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    m: int

    def __post_init__(self):
        object.__setattr__(self, "lo", _as_tuple(self.lo))
        object.__setattr__(self, "hi", _as_tuple(self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("lo and hi must have the same length")
        if not 1 <= len(self.lo) <= 2:
            raise ValueError(f"dimension must be 1 or 2, got {len(self.lo)}")
        if self.m < 4:
            raise ValueError(f"need m >= 4 cells per axis, got {self.m}")
        widths = [b - a for a, b in zip(self.lo, self.hi)]
        if min(widths) <= 0:
            raise ValueError(f"degenerate box: {self.lo}..{self.hi}")
        w0 = widths[0]
        if any(abs(w - w0) > 1e-12 * abs(w0) for w in widths):
            raise ValueError(f"box must be square (equal widths), got {widths}")

    @property
    def n(self) -> int:
        return len(self.lo)

    @property
    def h(self) -> float:
        return (self.hi[0] - self.lo[0]) / self.m

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.m,) * self.n

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    def axis_centers(self, axis: int) -> np.ndarray:
        return self.lo[axis] + (np.arange(self.m) + 0.5) * self.h

    def meshes(self) -> tuple[np.ndarray, ...]:
        """Coordinate arrays of shape `self.shape`, one per axis."""
        axes = [self.axis_centers(i) for i in range(self.n)]
        if self.n == 1:
            return (axes[0],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def box_cube(self) -> "Cube":
        c = tuple((a + b) / 2 for a, b in zip(self.lo, self.hi))
        return Cube(c, self.hi[0] - self.lo[0])


@dataclass(frozen=True)
class Cube:
    """Axis-aligned cube Q(center, side) with half-open cell membership."""

    center: tuple[float, ...]
    side: float

    def __post_init__(self):
        object.__setattr__(self, "center", _as_tuple(self.center))
        object.__setattr__(self, "side", float(self.side))
        if self.side <= 0:
            raise ValueError(f"cube side must be positive, got {self.side}")

    @property
    def n(self) -> int:
        return len(self.center)

    def lo_faces(self) -> tuple[float, ...]:
        return tuple(c - self.side / 2 for c in self.center)

    def hi_faces(self) -> tuple[float, ...]:
        return tuple(c + self.side / 2 for c in self.center)

    def dilate(self, factor: float) -> "Cube":
        return Cube(self.center, self.side * factor)

    def translate(self, shift: Sequence[float]) -> "Cube":
        s = _as_tuple(shift)
        return Cube(tuple(c + d for c, d in zip(self.center, s)), self.side)

    def contains_cube(self, other: "Cube", slack: float = 1e-12) -> bool:
        pad = slack * max(1.0, self.side)
        return all(
            ol >= sl - pad and oh <= sh + pad
            for ol, sl, oh, sh in zip(
                other.lo_faces(), self.lo_faces(), other.hi_faces(), self.hi_faces()
            )
        )

    def disjoint_from(self, other: "Cube") -> bool:
        """True when the open interiors do not meet (touching faces count)."""
        return any(
            oh <= sl + 1e-15 or ol >= sh - 1e-15
            for ol, oh, sl, sh in zip(
                other.lo_faces(), other.hi_faces(), self.lo_faces(), self.hi_faces()
            )
        )

    def __str__(self):
        c = ",".join(f"{v:.6g}" for v in self.center)
        return f"Q({c};{self.side:.6g})"


def cube_index_ranges(grid: Grid, cube: Cube) -> tuple[tuple[int, int], ...]:
    """Per-axis inclusive index range [k0, k1] of cells inside the cube.

    Raises OutOfDomain when the cube leaves the grid box and EmptyCube when
    no cell center falls inside.
    """
    if cube.n != grid.n:
        raise GridMismatch(f"cube dim {cube.n} on grid dim {grid.n}")
    h = grid.h
    ranges = []
    for ax in range(grid.n):
        lo, hi = cube.lo_faces()[ax], cube.hi_faces()[ax]
        pad = _SNAP * h
        if lo < grid.lo[ax] - pad or hi > grid.hi[ax] + pad:
            raise OutOfDomain(
                f"{cube} exceeds box [{grid.lo[ax]:.6g}, {grid.hi[ax]:.6g}] on axis {ax}"
            )
        k0 = _ceil_snap((lo - grid.lo[ax]) / h - 0.5)
        k1 = _ceil_snap((hi - grid.lo[ax]) / h - 0.5) - 1
        k0 = max(k0, 0)
        k1 = min(k1, grid.m - 1)
        if k1 < k0:
            raise EmptyCube(f"{cube} holds no cell center (h = {h:.6g})")
        ranges.append((k0, k1))
    return tuple(ranges)


def cube_slices(grid: Grid, cube: Cube) -> tuple[slice, ...]:
    return tuple(slice(k0, k1 + 1) for k0, k1 in cube_index_ranges(grid, cube))


def cube_cell_count(grid: Grid, cube: Cube) -> int:
    return int(
        np.prod([k1 - k0 + 1 for k0, k1 in cube_index_ranges(grid, cube)])
    )


def cube_measure(grid: Grid, cube: Cube) -> float:
    """Cell-counted measure |Q| = (number of member cells) * h^n."""
    return cube_cell_count(grid, cube) * grid.cell_volume


class GridFunction:
    """Samples at cell centers, with an optional validity mask.

    values has shape grid.shape (row-major), real or complex, all finite.
    mask is None (everything valid) or a boolean array of the same shape;
    operators attach masks to flag outputs that saw truncated data.
    """

    __slots__ = ("grid", "values", "mask")

    def __init__(self, grid: Grid, values, mask: np.ndarray | None = None):
        arr = np.asarray(values)
        if arr.shape != grid.shape:
            raise GridMismatch(f"values shape {arr.shape} != grid shape {grid.shape}")
        if not np.iscomplexobj(arr):
            arr = arr.astype(np.float64, copy=False)
        if not np.all(np.isfinite(arr)):
            raise ValueError("grid function values must be finite")
        self.grid = grid
        self.values = arr
        if mask is not None:
            mask = np.asarray(mask, dtype=bool)
            if mask.shape != grid.shape:
                raise GridMismatch("mask shape mismatch")
        self.mask = mask

    @classmethod
    def from_callable(cls, grid: Grid, fn: Callable) -> "GridFunction":
        return cls(grid, np.asarray(fn(*grid.meshes())))

    @classmethod
    def zeros(cls, grid: Grid, complex_: bool = False) -> "GridFunction":
        dt = np.complex128 if complex_ else np.float64
        return cls(grid, np.zeros(grid.shape, dtype=dt))

    def copy(self) -> "GridFunction":
        m = None if self.mask is None else self.mask.copy()
        return GridFunction(self.grid, self.values.copy(), m)

    def _merge_mask(self, other) -> np.ndarray | None:
        om = other.mask if isinstance(other, GridFunction) else None
        if self.mask is None:
            return None if om is None else om.copy()
        return self.mask.copy() if om is None else (self.mask & om)

    def _coerce(self, other):
        if isinstance(other, GridFunction):
            if other.grid != self.grid:
                raise GridMismatch("grid functions live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return GridFunction(self.grid, self.values + self._coerce(other), self._merge_mask(other))

    def __radd__(self, other):
        return self.__add__(other)

    def __sub__(self, other):
        return GridFunction(self.grid, self.values - self._coerce(other), self._merge_mask(other))

    def __rsub__(self, other):
        return GridFunction(self.grid, self._coerce(other) - self.values, self._merge_mask(other))

    def __mul__(self, other):
        return GridFunction(self.grid, self.values * self._coerce(other), self._merge_mask(other))

    def __rmul__(self, other):
        return self.__mul__(other)

    def __truediv__(self, other):
        return GridFunction(self.grid, self.values / self._coerce(other), self._merge_mask(other))

    def __neg__(self):
        return GridFunction(self.grid, -self.values, None if self.mask is None else self.mask.copy())

    def __abs__(self):
        return GridFunction(self.grid, np.abs(self.values), None if self.mask is None else self.mask.copy())

    def __pow__(self, exponent):
        return GridFunction(self.grid, self.values**exponent, None if self.mask is None else self.mask.copy())


def integrate(f: GridFunction) -> float | complex:
    """Box integral: sum of values times h^n (numpy pairwise summation)."""
    return np.sum(f.values) * f.grid.cell_volume


def integrate_over(f: GridFunction, cube: Cube):
    block = f.values[cube_slices(f.grid, cube)]
    return np.sum(block) * f.grid.cell_volume


def cube_average(f: GridFunction, cube: Cube):
    """Cell-measured average over Q: (sum of member values) / count."""
    block = f.values[cube_slices(f.grid, cube)]
    return np.sum(block) / block.size


def indicator(grid: Grid, cube: Cube) -> GridFunction:
    vals = np.zeros(grid.shape)
    vals[cube_slices(grid, cube)] = 1.0
    return GridFunction(grid, vals)


@dataclass(frozen=True)
class CubeFamily:
    """A finite cube collection with provenance and optional level tags."""

    cubes: tuple[Cube, ...]
    provenance: str = "explicit"
    levels: tuple[int, ...] | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "cubes", tuple(self.cubes))
        if self.levels is not None:
            object.__setattr__(self, "levels", tuple(int(v) for v in self.levels))
            if len(self.levels) != len(self.cubes):
                raise ValueError("levels must tag every cube")
        if not self.cubes:
            raise ValueError("cube family is empty")

    def __iter__(self) -> Iterator[Cube]:
        return iter(self.cubes)

    def __len__(self) -> int:
        return len(self.cubes)

    def by_level(self) -> dict[int, list[Cube]]:
        if self.levels is None:
            return {0: list(self.cubes)}
        out: dict[int, list[Cube]] = {}
        for lvl, q in zip(self.levels, self.cubes):
            out.setdefault(lvl, []).append(q)
        return out


def enumerate_dyadic(
    grid: Grid, level_min: int, level_max: int, base: Cube | None = None
) -> CubeFamily:
    """Dyadic generations level_min..level_max of the base cube (default: box).

    Generation l splits the base into 2^l congruent cubes per axis. Every
    cube is checked nonempty; ResolutionTooCoarse fires when the finest
    generation drops below one cell per cube.
    """
    if not 0 <= level_min <= level_max:
        raise ValueError(f"need 0 <= level_min <= level_max, got {level_min}..{level_max}")
    if base is None:
        base = grid.box_cube()
    if base.n != grid.n:
        raise GridMismatch(f"base cube dim {base.n} on grid dim {grid.n}")
    finest = base.side / 2**level_max
    if finest < grid.h * (1 - 1e-12):
        raise ResolutionTooCoarse(
            f"generation {level_max} cubes have side {finest:.6g} < h = {grid.h:.6g}"
        )
    cubes: list[Cube] = []
    levels: list[int] = []
    base_lo = base.lo_faces()
    for lvl in range(level_min, level_max + 1):
        side = base.side / 2**lvl
        per_axis = [
            [base_lo[ax] + (j + 0.5) * side for j in range(2**lvl)]
            for ax in range(grid.n)
        ]
        if grid.n == 1:
            centers = [(c,) for c in per_axis[0]]
        else:
            centers = [(cx, cy) for cx in per_axis[0] for cy in per_axis[1]]
        for c in centers:
            q = Cube(c, side)
            cube_index_ranges(grid, q)  # raises if empty or out of the box
            cubes.append(q)
            levels.append(lvl)
    tag = f"dyadic[{level_min}..{level_max}] of {base}"
    return CubeFamily(tuple(cubes), tag, tuple(levels))


def centered_family(
    grid: Grid,
    center: Sequence[float] | float,
    base_side: float,
    level_min: int,
    level_max: int,
) -> CubeFamily:
    """Shrinking cubes Q(center, base_side / 2^l) for l = level_min..level_max.

    Dyadic cubes never center on a fixed point, so symbol singularities are
    probed with this family instead.
    """
    if not 0 <= level_min <= level_max:
        raise ValueError(f"need 0 <= level_min <= level_max, got {level_min}..{level_max}")
    c = _as_tuple(center)
    cubes = []
    levels = []
    for lvl in range(level_min, level_max + 1):
        q = Cube(c, base_side / 2**lvl)
        cube_index_ranges(grid, q)
        cubes.append(q)
        levels.append(lvl)
    tag = f"centered[{level_min}..{level_max}] at ({','.join(f'{v:.6g}' for v in c)})"
    return CubeFamily(tuple(cubes), tag, tuple(levels))
