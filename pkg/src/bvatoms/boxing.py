"""Dyadic stopping-time boxing of bounded cell sets.

Every member cell walks up its chain of dyadic ancestors until the first
ancestor whose density in the set drops below one half; the maximal cubes
among these stopping cubes partition the set, and each carries boundary
mass comparable to its side length to the power ``d - 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import total_ordering

import numpy as np

from .errors import InvariantViolation
from .grid import CellSet, GridSpec, _dense_gradient, indicator_measure

__all__ = [
    "DyadicCube",
    "DyadicSystem",
    "SummedAreaTable",
    "BoxingResult",
    "density",
    "stop_cube",
    "boxing_decompose",
    "boxing_constant",
    "box_set",
    "closed_boundary_mass",
]


@total_ordering
@dataclass(frozen=True)
class DyadicCube:
    """Cube of side ``h * 2**level`` covering cells ``[coords*2**level, (coords+1)*2**level)``."""

    level: int
    coords: tuple[int, ...]

    def __post_init__(self):
        if int(self.level) != self.level or self.level < 0:
            raise ValueError(f"level must be a nonnegative integer, got {self.level}")
        if any(int(c) != c for c in self.coords):
            raise ValueError(f"cube coordinates must be integers, got {self.coords}")
        object.__setattr__(self, "level", int(self.level))
        object.__setattr__(self, "coords", tuple(int(c) for c in self.coords))

    @classmethod
    def containing(cls, cell, level: int) -> "DyadicCube":
        return cls(level, tuple(int(c) >> level for c in cell))

    @classmethod
    def from_corner(cls, spec: GridSpec, corner, side: float) -> "DyadicCube":
        """Locate the dyadic cube with the given physical lower corner and side.

        Raises ``ValueError`` when the cube is not on the dyadic lattice of
        ``spec`` (anchored at the grid origin).
        """
        ratio = side / spec.h
        level = round(math.log2(ratio)) if ratio > 0 else -1
        if level < 0 or not math.isclose(2.0 ** level, ratio, rel_tol=1e-12):
            raise ValueError(f"side {side} is not h * 2**j")
        coords = []
        for c, o in zip(corner, spec.origin):
            k = (c - o) / side
            if not math.isclose(k, round(k), abs_tol=1e-9):
                raise ValueError(f"corner {tuple(corner)} is not aligned with the dyadic lattice")
            coords.append(round(k))
        return cls(level, tuple(coords))

    @property
    def d(self) -> int:
        return len(self.coords)

    @property
    def ncells_side(self) -> int:
        return 1 << self.level

    def side(self, h: float) -> float:
        return h * (1 << self.level)

    def cell_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo = np.asarray(self.coords, dtype=np.int64) << self.level
        return lo, lo + (1 << self.level)

    def parent(self) -> "DyadicCube":
        return DyadicCube(self.level + 1, tuple(c >> 1 for c in self.coords))

    def contains(self, other: "DyadicCube") -> bool:
        if other.level > self.level:
            return False
        shift = self.level - other.level
        return all((c >> shift) == s for c, s in zip(other.coords, self.coords))

    def intersects(self, other: "DyadicCube") -> bool:
        return self.contains(other) or other.contains(self)

    def contains_cell(self, cell) -> bool:
        return all((int(c) >> self.level) == s for c, s in zip(cell, self.coords))

    def sort_key(self):
        return (-self.level, self.coords)

    def __lt__(self, other: "DyadicCube") -> bool:
        return self.sort_key() < other.sort_key()

    def to_dict(self) -> dict:
        return {"level": self.level, "coords": list(self.coords)}


class SummedAreaTable:
    """Inclusive prefix sums with an extra zero row per axis; O(2^d) box sums."""

    def __init__(self, arr: np.ndarray, offset=None):
        arr = np.asarray(arr)
        d = arr.ndim
        S = np.zeros(tuple(n + 1 for n in arr.shape), dtype=np.int64 if arr.dtype.kind in "biu" else float)
        inner = S[(slice(1, None),) * d]
        inner[...] = arr
        for ax in range(d):
            np.cumsum(S, axis=ax, out=S)
        self.table = S
        self.shape = arr.shape
        # index of array element 0 in the caller's coordinates
        self.offset = np.zeros(d, dtype=np.int64) if offset is None else np.asarray(offset, dtype=np.int64)

    def box_sum(self, lo, hi):
        """Sum over the half-open boxes ``[lo, hi)``; ``lo``/``hi`` are ``(d,)`` or ``(N, d)``."""
        lo = np.atleast_2d(np.asarray(lo, dtype=np.int64)) - self.offset
        hi = np.atleast_2d(np.asarray(hi, dtype=np.int64)) - self.offset
        shape = np.asarray(self.shape)
        lo = np.clip(lo, 0, shape)
        hi = np.clip(hi, 0, shape)
        hi = np.maximum(hi, lo)
        d = lo.shape[1]
        total = np.zeros(lo.shape[0], dtype=self.table.dtype)
        for corner in range(1 << d):
            idx = []
            sign = 1
            for ax in range(d):
                if corner >> ax & 1:
                    idx.append(lo[:, ax])
                    sign = -sign
                else:
                    idx.append(hi[:, ax])
            total += sign * self.table[tuple(idx)]
        return total


@dataclass(frozen=True)
class DyadicSystem:
    spec: GridSpec
    max_level: int

    @classmethod
    def for_set(cls, U: CellSet) -> "DyadicSystem":
        """Smallest height whose top cubes cover the extent and have density < 1/2."""
        n = U.count
        d = U.spec.d
        J = max(0, math.ceil(math.log2(max(U.spec.shape))))
        while (1 << (J * d)) <= 2 * n:
            J += 1
        return cls(U.spec, J)

    @property
    def padded_side(self) -> int:
        return 1 << self.max_level


class _SetIndex:
    """Count pyramid and boundary-face prefix sums for one cell set."""

    def __init__(self, U: CellSet, system: DyadicSystem | None = None):
        self.U = U
        self.system = system or DyadicSystem.for_set(U)
        J = self.system.max_level
        side = self.system.padded_side
        d = U.spec.d
        padded = np.zeros((side,) * d, dtype=np.int64)
        padded[tuple(slice(0, n) for n in U.spec.shape)] = U.mask
        self.sat = SummedAreaTable(padded)
        # counts[j] holds the member counts of all level-j cubes
        self.counts = []
        S = self.sat.table
        for j in range(J + 1):
            step = 1 << j
            block = S[(slice(None, None, step),) * d]
            for ax in range(d):
                block = np.diff(block, axis=ax)
            self.counts.append(block)
        self._faces = None

    def density(self, Q: DyadicCube) -> float:
        lo, hi = Q.cell_bounds()
        return float(self.sat.box_sum(lo, hi)[0]) / float(1 << (Q.level * Q.d))

    def count_in(self, cubes: list[DyadicCube]) -> np.ndarray:
        if not cubes:
            return np.zeros(0, dtype=np.int64)
        lo = np.array([c.cell_bounds()[0] for c in cubes])
        hi = np.array([c.cell_bounds()[1] for c in cubes])
        return self.sat.box_sum(lo, hi)

    def boundary_tables(self):
        if self._faces is None:
            # tables indexed by lower cell + 1 on every axis
            d = self.U.spec.d
            tables = []
            for l, g in enumerate(_dense_gradient(self.U.mask.astype(np.int8))):
                pad = [(1, 1)] * d
                pad[l] = (0, 0)
                tables.append(SummedAreaTable(np.abs(np.pad(g, pad)).astype(np.int64), offset=[-1] * d))
            self._faces = tables
        return self._faces

    def closed_face_counts(self, cubes: list[DyadicCube]) -> np.ndarray:
        """Per cube, the number of boundary faces with at least one adjacent cell inside."""
        if not cubes:
            return np.zeros(0, dtype=np.int64)
        lo = np.array([c.cell_bounds()[0] for c in cubes])
        hi = np.array([c.cell_bounds()[1] for c in cubes])
        total = np.zeros(len(cubes), dtype=np.int64)
        for l, tab in enumerate(self.boundary_tables()):
            lo_l = lo.copy()
            lo_l[:, l] -= 1
            total += tab.box_sum(lo_l, hi)
        return total


def density(U: CellSet, Q: DyadicCube) -> float:
    """Fraction of the cells of ``Q`` that belong to ``U``."""
    return _SetIndex(U).density(Q)


def stop_cube(x, U: CellSet, system: DyadicSystem | None = None, index: _SetIndex | None = None) -> DyadicCube:
    """First dyadic ancestor of cell ``x`` in which ``U`` has density below one half."""
    x = tuple(int(c) for c in x)
    if any(c < 0 or c >= n for c, n in zip(x, U.spec.shape)) or not U.mask[x]:
        raise ValueError(f"cell {x} is not in the set")
    index = index or _SetIndex(U, system)
    J = index.system.max_level
    for j in range(1, J + 1):
        k = tuple(c >> j for c in x)
        if 2 * int(index.counts[j][k]) < (1 << (j * U.spec.d)):
            return DyadicCube(j, k)
    raise InvariantViolation(f"no stopping cube below level {J} for cell {x}")


@dataclass(frozen=True, eq=False)
class BoxingResult:
    U: CellSet
    system: DyadicSystem
    cubes: list[DyadicCube]
    member_counts: np.ndarray
    closed_faces: np.ndarray

    @property
    def boundary_mass(self) -> np.ndarray:
        return self.closed_faces * self.U.spec.face_area

    @property
    def ratios(self) -> np.ndarray:
        h = self.U.spec.h
        d = self.U.spec.d
        sides = np.array([c.side(h) for c in self.cubes])
        return sides ** (d - 1) / self.boundary_mass

    @property
    def constant(self) -> float:
        return float(self.ratios.max())

    def densities(self) -> np.ndarray:
        d = self.U.spec.d
        return self.member_counts / np.array([float(1 << (c.level * d)) for c in self.cubes])

    def cube_table(self) -> list[dict]:
        h = self.U.spec.h
        rows = []
        for c, dens, mass, ratio in zip(self.cubes, self.densities(), self.boundary_mass, self.ratios):
            rows.append({"level": c.level, "coords": list(c.coords), "side": c.side(h),
                         "density": float(dens), "boundary_mass": float(mass), "ratio": float(ratio)})
        return rows


def _stop_levels(index: _SetIndex, cells: np.ndarray) -> np.ndarray:
    d = cells.shape[1]
    J = index.system.max_level
    levels = np.zeros(len(cells), dtype=np.int64)
    pending = np.arange(len(cells))
    for j in range(1, J + 1):
        if not len(pending):
            break
        k = cells[pending] >> j
        counts = index.counts[j][tuple(k.T)]
        stopped = 2 * counts < (1 << (j * d))
        levels[pending[stopped]] = j
        pending = pending[~stopped]
    if len(pending):
        raise InvariantViolation(f"{len(pending)} cells never reached density below 1/2")
    return levels


def box_set(U: CellSet, check: bool = True) -> BoxingResult:
    """Stopping-time boxing of ``U`` with per-cube bookkeeping."""
    if U.is_empty():
        raise ValueError("cannot box an empty set")
    index = _SetIndex(U)
    J = index.system.max_level
    cells = U.cells()
    stop = _stop_levels(index, cells)

    # flag every stopping cube, then give each cell the highest flagged ancestor
    flagged = [np.zeros(c.shape, dtype=bool) for c in index.counts]
    for j in np.unique(stop):
        sel = cells[stop == j] >> j
        flagged[j][tuple(sel.T)] = True
    final = stop.copy()
    for j in range(1, J + 1):
        hit = flagged[j][tuple((cells >> j).T)]
        final = np.where(hit & (j > final), j, final)

    keys = np.concatenate([final[:, None], cells >> final[:, None]], axis=1)
    keys = np.unique(keys, axis=0)
    cubes = sorted(DyadicCube(int(k[0]), tuple(int(v) for v in k[1:])) for k in keys)

    counts = index.count_in(cubes)
    faces = index.closed_face_counts(cubes)
    result = BoxingResult(U, index.system, cubes, counts, faces)
    if check:
        _check_partition(result, index)
    return result


def _check_partition(result: BoxingResult, index: _SetIndex) -> None:
    total = int(result.member_counts.sum())
    if total != result.U.count:
        raise InvariantViolation(f"cubes hold {total} cells, set has {result.U.count}")
    # every member cell must lie in exactly one returned cube; each cube holds
    # member cells, so this also rules out nested or repeated cubes
    cells = result.U.cells()
    multiplicity = np.zeros(len(cells), dtype=np.int64)
    by_level: dict[int, list] = {}
    for c in result.cubes:
        by_level.setdefault(c.level, []).append(c.coords)
    for j, coords in by_level.items():
        grid = np.zeros(index.counts[j].shape, dtype=bool)
        grid[tuple(np.array(coords).T)] = True
        multiplicity += grid[tuple((cells >> j).T)]
    if np.any(multiplicity != 1):
        bad = cells[multiplicity != 1][0]
        raise InvariantViolation(f"cell {tuple(bad)} is covered {multiplicity[multiplicity != 1][0]} times")
    if np.any(result.closed_faces <= 0):
        raise InvariantViolation("a boxing cube carries no boundary mass")


def boxing_decompose(U: CellSet) -> list[DyadicCube]:
    return box_set(U).cubes


def closed_boundary_mass(U: CellSet, cubes: list[DyadicCube]) -> np.ndarray:
    """``|D chi_U|`` of each cube with closed attribution."""
    return _SetIndex(U).closed_face_counts(cubes) * U.spec.face_area


def boxing_constant(U: CellSet, cubes: list[DyadicCube]) -> float:
    """max over cubes of side**(d-1) / closed boundary mass."""
    masses = closed_boundary_mass(U, cubes)
    sides = np.array([c.side(U.spec.h) for c in cubes])
    if np.any(masses <= 0):
        return math.inf
    return float((sides ** (U.spec.d - 1) / masses).max())


def indicator_pieces(U: CellSet, cubes: list[DyadicCube]):
    """``D chi_{U cap Q}`` for each cube (used to check the boxing identity)."""
    for c in cubes:
        lo, hi = c.cell_bounds()
        mask = np.zeros(U.spec.shape, dtype=bool)
        sl = tuple(slice(int(a), int(min(b, n))) for a, b, n in zip(lo, hi, U.spec.shape))
        mask[sl] = U.mask[sl]
        yield indicator_measure(CellSet(U.spec, mask))
