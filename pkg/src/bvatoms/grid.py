"""Discrete substrate: grid functions, cell sets and face-supported vector measures.

Conventions used throughout the package:

* a cell ``x`` is an integer index tuple; it occupies
  ``origin + [x*h, (x+1)*h)`` along each axis;
* a face ``(l, x)`` separates cell ``x`` from ``x + e_l`` (``l`` is a
  0-based axis, ``x`` the *lower* cell, so ``x_l`` may be ``-1``);
* the gradient measure carries weight ``(u(x+e_l) - u(x)) * h**(d-1)`` on
  face ``(l, x)``, with ``u`` extended by zero outside the extent.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "GridSpec",
    "GridFunction",
    "CellSet",
    "VectorFaceMeasure",
    "gradient_measure",
    "indicator_measure",
    "total_variation",
    "isotropic_total_variation",
    "measure_on_cube",
    "pair",
    "perimeter",
    "face_centers",
]


@dataclass(frozen=True)
class GridSpec:
    shape: tuple[int, ...]
    h: float = 1.0
    origin: tuple[float, ...] | None = None

    def __post_init__(self):
        shape = tuple(int(n) for n in self.shape)
        if len(shape) not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {len(shape)}")
        if any(n < 1 for n in shape):
            raise ValueError(f"extents must be >= 1, got {shape}")
        if not (self.h > 0 and math.isfinite(self.h)):
            raise ValueError(f"spacing h must be positive, got {self.h}")
        origin = (0.0,) * len(shape) if self.origin is None else tuple(float(o) for o in self.origin)
        if len(origin) != len(shape):
            raise ValueError("origin must have one coordinate per axis")
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "h", float(self.h))
        object.__setattr__(self, "origin", origin)

    @property
    def d(self) -> int:
        return len(self.shape)

    @property
    def face_area(self) -> float:
        return self.h ** (self.d - 1)

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    def cell_centers(self, cells: np.ndarray) -> np.ndarray:
        cells = np.asarray(cells, dtype=float)
        return np.asarray(self.origin) + (cells + 0.5) * self.h

    def to_dict(self) -> dict:
        return {"d": self.d, "shape": list(self.shape), "h": self.h, "origin": list(self.origin)}

    @classmethod
    def from_dict(cls, data: dict) -> "GridSpec":
        return cls(tuple(data["shape"]), data["h"], tuple(data.get("origin") or ()) or None)


@dataclass(frozen=True, eq=False)
class GridFunction:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.shape != self.spec.shape:
            raise ValueError(f"values shape {values.shape} does not match grid {self.spec.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_array(cls, values, h: float = 1.0, origin=None) -> "GridFunction":
        values = np.asarray(values, dtype=float)
        return cls(GridSpec(values.shape, h, origin), values)

    def __add__(self, other: "GridFunction") -> "GridFunction":
        _check_same_spec(self.spec, other.spec)
        return GridFunction(self.spec, self.values + other.values)

    def __mul__(self, s: float) -> "GridFunction":
        return GridFunction(self.spec, self.values * float(s))

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(self.spec, -self.values)

    def is_zero(self) -> bool:
        return not np.any(self.values)


@dataclass(frozen=True, eq=False)
class CellSet:
    spec: GridSpec
    mask: np.ndarray

    def __post_init__(self):
        mask = np.array(self.mask, dtype=bool)
        if mask.shape != self.spec.shape:
            raise ValueError(f"mask shape {mask.shape} does not match grid {self.spec.shape}")
        mask.setflags(write=False)
        object.__setattr__(self, "mask", mask)

    @classmethod
    def from_array(cls, mask, h: float = 1.0, origin=None) -> "CellSet":
        mask = np.asarray(mask, dtype=bool)
        return cls(GridSpec(mask.shape, h, origin), mask)

    @property
    def count(self) -> int:
        return int(np.count_nonzero(self.mask))

    def is_empty(self) -> bool:
        return not self.mask.any()

    def cells(self) -> np.ndarray:
        """Member cells as an ``(N, d)`` integer array in lexicographic order."""
        return np.argwhere(self.mask)

    def indicator(self) -> GridFunction:
        return GridFunction(self.spec, self.mask.astype(float))

    def issubset(self, other: "CellSet") -> bool:
        _check_same_spec(self.spec, other.spec)
        return not np.any(self.mask & ~other.mask)


def _check_same_spec(a: GridSpec, b: GridSpec) -> None:
    if a != b:
        raise ValueError(f"grid mismatch: {a} vs {b}")


@dataclass(frozen=True, eq=False)
class VectorFaceMeasure:
    """Sparse vector measure on grid faces.

    ``cells[l]`` is an ``(N_l, d)`` array of lower-cell indices of the faces
    of axis ``l`` carrying the weights ``weights[l]``.  Faces are kept in
    lexicographic order of the lower cell and zero weights are dropped.
    """

    spec: GridSpec
    cells: tuple[np.ndarray, ...]
    weights: tuple[np.ndarray, ...]

    def __post_init__(self):
        d = self.spec.d
        if len(self.cells) != d or len(self.weights) != d:
            raise ValueError("need one face list per axis")
        cells, weights = [], []
        for c, w in zip(self.cells, self.weights):
            c = np.asarray(c, dtype=np.int64).reshape(-1, d)
            w = np.asarray(w, dtype=float).reshape(-1)
            if len(c) != len(w):
                raise ValueError("cells and weights differ in length")
            if not np.all(np.isfinite(w)):
                raise ValueError("face weights must be finite")
            keep = w != 0
            c, w = c[keep], w[keep]
            if len(c) > 1:
                order = np.lexsort(c.T[::-1])
                c, w = c[order], w[order]
            c.setflags(write=False)
            w.setflags(write=False)
            cells.append(c)
            weights.append(w)
        object.__setattr__(self, "cells", tuple(cells))
        object.__setattr__(self, "weights", tuple(weights))

    @classmethod
    def empty(cls, spec: GridSpec) -> "VectorFaceMeasure":
        d = spec.d
        return cls(spec, tuple(np.zeros((0, d), int) for _ in range(d)),
                   tuple(np.zeros(0) for _ in range(d)))

    @classmethod
    def from_dense(cls, spec: GridSpec, dense: Sequence[np.ndarray]) -> "VectorFaceMeasure":
        """Build from per-axis dense arrays indexed by ``lower cell + 1`` along the axis."""
        cells, weights = [], []
        for l, arr in enumerate(dense):
            idx = np.argwhere(arr != 0)
            w = arr[tuple(idx.T)]
            idx = idx.copy()
            idx[:, l] -= 1
            cells.append(idx)
            weights.append(w)
        return cls(spec, tuple(cells), tuple(weights))

    def to_dense(self) -> list[np.ndarray]:
        out = []
        for l in range(self.spec.d):
            shape = list(self.spec.shape)
            shape[l] += 1
            arr = np.zeros(shape)
            c = self.cells[l].copy()
            c[:, l] += 1
            np.add.at(arr, tuple(c.T), self.weights[l])
            out.append(arr)
        return out

    @property
    def nfaces(self) -> int:
        return sum(len(w) for w in self.weights)

    def component(self, l: int) -> "VectorFaceMeasure":
        d = self.spec.d
        cells = tuple(self.cells[k] if k == l else np.zeros((0, d), int) for k in range(d))
        weights = tuple(self.weights[k] if k == l else np.zeros(0) for k in range(d))
        return VectorFaceMeasure(self.spec, cells, weights)

    def signed_mass(self, l: int) -> float:
        return math.fsum(self.weights[l])

    def scaled(self, s: float) -> "VectorFaceMeasure":
        return VectorFaceMeasure(self.spec, self.cells, tuple(w * s for w in self.weights))

    def __add__(self, other: "VectorFaceMeasure") -> "VectorFaceMeasure":
        _check_same_spec(self.spec, other.spec)
        dense = [a + b for a, b in zip(self.to_dense(), other.to_dense())]
        return VectorFaceMeasure.from_dense(self.spec, dense)

    def __sub__(self, other: "VectorFaceMeasure") -> "VectorFaceMeasure":
        return self + other.scaled(-1.0)

    def max_abs_weight(self) -> float:
        return max((float(np.abs(w).max()) for w in self.weights if len(w)), default=0.0)


def _dense_gradient(values: np.ndarray) -> list[np.ndarray]:
    """Per-axis forward differences of the zero-extended array.

    Entry ``i`` along axis ``l`` of the result is the jump across the face
    whose lower cell has index ``i - 1``.
    """
    d = values.ndim
    out = []
    for l in range(d):
        pad = [(0, 0)] * d
        pad[l] = (1, 1)
        out.append(np.diff(np.pad(values, pad), axis=l))
    return out


def gradient_measure(u: GridFunction) -> VectorFaceMeasure:
    dense = _dense_gradient(u.values)
    area = u.spec.face_area
    return VectorFaceMeasure.from_dense(u.spec, [g * area for g in dense])


def indicator_measure(E: CellSet) -> VectorFaceMeasure:
    """``D chi_E``; weights are exactly ``+-h**(d-1)``."""
    dense = _dense_gradient(E.mask.astype(np.int8))
    area = E.spec.face_area
    return VectorFaceMeasure.from_dense(E.spec, [g.astype(float) * area for g in dense])


def total_variation(m: VectorFaceMeasure) -> float:
    """Anisotropic total variation: sum of absolute face weights over all axes."""
    return math.fsum(math.fsum(np.abs(w)) for w in m.weights)


def component_variation(m: VectorFaceMeasure, l: int) -> float:
    return math.fsum(np.abs(m.weights[l]))


def isotropic_total_variation(u: GridFunction) -> float:
    """Euclidean-norm discrete TV (forward differences at cells); diagnostic only."""
    P = np.pad(u.values, 1)
    base = tuple(slice(0, -1) for _ in range(u.spec.d))
    sq = np.zeros(P[base].shape)
    for l in range(u.spec.d):
        shifted = tuple(slice(1, None) if k == l else slice(0, -1) for k in range(u.spec.d))
        sq += (P[shifted] - P[base]) ** 2
    return float(np.sqrt(sq).sum()) * u.spec.face_area


def perimeter(E: CellSet) -> float:
    return total_variation(indicator_measure(E))


def face_centers(spec: GridSpec, l: int, cells: np.ndarray) -> np.ndarray:
    centers = spec.cell_centers(cells)
    if len(centers):
        centers[:, l] += 0.5 * spec.h
    return centers


def measure_on_cube(m: VectorFaceMeasure, Q, attribution: str = "closed") -> float:
    """Total variation of ``m`` carried by the faces attributed to the dyadic cube ``Q``.

    ``closed`` counts a face when either adjacent cell lies in ``Q``;
    ``lower-cell`` counts it when its lower cell does (additive over
    disjoint cubes).
    """
    if attribution not in ("closed", "lower-cell"):
        raise ValueError(f"unknown attribution {attribution!r}")
    lo, hi = Q.cell_bounds()
    total = []
    for l in range(m.spec.d):
        c = m.cells[l]
        if not len(c):
            continue
        inside = np.all((c >= lo) & (c < hi), axis=1)
        if attribution == "closed":
            up = c.copy()
            up[:, l] += 1
            inside |= np.all((up >= lo) & (up < hi), axis=1)
        total.append(math.fsum(np.abs(m.weights[l][inside])))
    return math.fsum(total)


Field = Callable[[np.ndarray], np.ndarray]


def pair(m: VectorFaceMeasure, phi: Field) -> float:
    """``sum_l sum_faces w * phi_l(face center)`` for a vector field ``phi``.

    ``phi`` maps an ``(N, d)`` array of points to an ``(N, d)`` array.
    """
    terms = []
    for l in range(m.spec.d):
        if not len(m.weights[l]):
            continue
        vals = np.asarray(phi(face_centers(m.spec, l, m.cells[l])), dtype=float)
        terms.append(math.fsum(m.weights[l] * vals[:, l]))
    return math.fsum(terms)
