"""Normalized (d-1)-atoms built from a set and one of its boxing cubes."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .boxing import DyadicCube, closed_boundary_mass
from .grid import CellSet, GridSpec, VectorFaceMeasure
from .heat import HeatEvalPlan, grad_heat_l1_constant, heat_sup

__all__ = ["Atom", "AtomReport", "choose_cprime", "cube_faces", "make_atom", "atoms_for_cube", "verify_atom",
           "HEAT_TOL", "CPRIME_SLACK"]

CPRIME_SLACK = 0.05
HEAT_TOL = 1e-6
CANCEL_TOL = 1e-12
MASS_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class Atom:
    """One component of ``D chi_{omega cap Q}`` divided by ``C' * |D chi_omega|(closed Q)``.

    ``cells``/``weights`` are the faces of axis ``axis``; ``pattern`` holds
    the signs of the underlying indicator jumps and ``scale`` the common
    factor, so ``weights == pattern * scale``.
    """

    spec: GridSpec
    axis: int
    cube: DyadicCube
    cells: np.ndarray
    pattern: np.ndarray
    scale: float
    cprime: float
    boundary_mass: float
    provenance: dict = field(default_factory=dict)

    @property
    def weights(self) -> np.ndarray:
        return self.pattern * self.scale

    @property
    def side(self) -> float:
        return self.cube.side(self.spec.h)

    @property
    def support_side(self) -> float:
        return 2.0 * self.side

    @property
    def support_lo(self) -> np.ndarray:
        lo, _ = self.cube.cell_bounds()
        return np.asarray(self.spec.origin) + lo * self.spec.h - 0.5 * self.side

    def measure(self) -> VectorFaceMeasure:
        d = self.spec.d
        cells = tuple(self.cells if k == self.axis else np.zeros((0, d), int) for k in range(d))
        weights = tuple(self.weights if k == self.axis else np.zeros(0) for k in range(d))
        return VectorFaceMeasure(self.spec, cells, weights)

    def mass(self) -> float:
        return math.fsum(np.abs(self.weights))

    def signed_mass(self) -> float:
        return math.fsum(self.weights)


@dataclass(frozen=True)
class AtomReport:
    support_ok: bool
    cancellation_ok: bool
    mass_ok: bool
    heat_ok: bool
    mass: float
    signed_mass: float
    heat_sup: float
    heat_budget: float
    heat_tol: float
    heat_argmax: tuple | None = None
    refined_sup: float | None = None
    refine_change: float | None = None
    refine_ok: bool | None = None

    @property
    def passed(self) -> bool:
        return self.support_ok and self.cancellation_ok and self.mass_ok and self.heat_ok

    @property
    def mass_margin(self) -> float:
        return self.mass

    @property
    def heat_margin(self) -> float:
        return self.heat_sup / self.heat_budget

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in self.__dataclass_fields__}
        out["heat_argmax"] = list(self.heat_argmax) if self.heat_argmax is not None else None
        out["heat_margin"] = self.heat_margin
        out["passed"] = self.passed
        return out


def choose_cprime(c_box: float, d: int, slack: float = CPRIME_SLACK) -> float:
    """Normalizer large enough for both the mass and the heat estimate of every atom."""
    if not c_box > 0:
        raise ValueError(f"boxing constant must be positive, got {c_box}")
    return max(1.0 + c_box, c_box * 2 ** (d - 1) * grad_heat_l1_constant(d)) * (1.0 + slack)


def cube_faces(omega: CellSet, cube: DyadicCube) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per axis, the faces and integer jumps of ``chi_{omega cap Q}``."""
    d = omega.spec.d
    lo, hi = cube.cell_bounds()
    hi = np.minimum(hi, omega.spec.shape)
    block = omega.mask[tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))].astype(np.int8)
    padded = np.pad(block, 1)
    out = []
    for l in range(d):
        g = np.diff(padded, axis=l)
        g = g[tuple(slice(None) if k == l else slice(1, -1) for k in range(d))]
        idx = np.argwhere(g)
        signs = g[tuple(idx.T)].astype(float)
        idx = idx + lo
        idx[:, l] -= 1
        out.append((idx, signs))
    return out


def atoms_for_cube(omega: CellSet, cube: DyadicCube, cprime: float, boundary_mass: float | None = None,
                   provenance: dict | None = None) -> tuple[float, list[Atom]]:
    """``lambda_raw = C' * M`` and the ``d`` component atoms of one (set, cube) pair."""
    if boundary_mass is None:
        boundary_mass = float(closed_boundary_mass(omega, [cube])[0])
    if not boundary_mass > 0:
        raise ValueError(f"cube {cube} carries no boundary mass of the set")
    spec = omega.spec
    scale = spec.face_area / (cprime * boundary_mass)
    atoms = []
    for l, (cells, signs) in enumerate(cube_faces(omega, cube)):
        if not len(cells):
            raise ValueError(f"set does not meet cube {cube}")
        atoms.append(Atom(spec, l, cube, cells, signs, scale, cprime, boundary_mass, dict(provenance or {})))
    return cprime * boundary_mass, atoms


def make_atom(omega: CellSet, cube: DyadicCube, l: int, cprime: float) -> tuple[float, Atom]:
    lam, atoms = atoms_for_cube(omega, cube, cprime)
    return lam, atoms[l]


def _support_ok(atom: Atom) -> bool:
    # every face patch must lie in the closed support cube
    h = atom.spec.h
    o = np.asarray(atom.spec.origin)
    lo = atom.support_lo
    hi = lo + atom.support_side
    tol = 1e-12 * atom.support_side
    c = atom.cells
    patch_lo = o + c * h
    patch_hi = patch_lo + h
    patch_lo[:, atom.axis] += h
    return bool(np.all(patch_lo >= lo - tol) and np.all(patch_hi <= hi + tol))


@lru_cache(maxsize=65536)
def _pattern_sup(key, plan: HeatEvalPlan, refine: bool):
    d, h, axis, level, shape, cells_bytes, signs_bytes = key
    cells = np.frombuffer(cells_bytes, dtype=np.int64).reshape(-1, d)
    signs = np.frombuffer(signs_bytes, dtype=float)
    spec = GridSpec(shape, h)
    side = h * (1 << level)
    lo = np.full(d, -0.5 * side)
    base = heat_sup(spec, axis, cells, signs, lo, 2 * side, plan)
    if not refine:
        return base, None
    return base, heat_sup(spec, axis, cells, signs, lo, 2 * side, plan.refined())


def atom_heat_sup(atom: Atom, plan: HeatEvalPlan, refine: bool = False):
    """Heat sup of the sign pattern in cube-local coordinates, scaled by the atom's factor.

    Local coordinates make the result translation invariant, so identical
    patterns share one evaluation.
    """
    lo, _ = atom.cube.cell_bounds()
    local = np.ascontiguousarray(atom.cells - lo, dtype=np.int64)
    key = (atom.spec.d, atom.spec.h, atom.axis, atom.cube.level, atom.spec.shape, local.tobytes(),
           np.ascontiguousarray(atom.pattern, dtype=float).tobytes())
    base, fine = _pattern_sup(key, plan, refine)
    shift = np.asarray(atom.spec.origin) + lo * atom.spec.h
    argmax = None if base.x is None else (tuple(float(v) for v in np.asarray(base.x) + shift), base.t)
    return base.value * atom.scale, (None if fine is None else fine.value * atom.scale), argmax


def verify_atom(atom: Atom, plan: HeatEvalPlan | None = None, refine: bool = False,
                refine_tol: float = 0.01) -> AtomReport:
    """Check support, cancellation, heat and mass conditions; never raises on failure."""
    plan = plan or HeatEvalPlan()
    w = atom.weights
    mass = math.fsum(np.abs(w))
    signed = math.fsum(w)
    budget = 1.0 / atom.support_side ** (atom.spec.d - 1)
    tol = HEAT_TOL + plan.eps_trunc
    sup, fine, argmax = atom_heat_sup(atom, plan, refine)
    change = None
    refine_ok = None
    if fine is not None:
        change = abs(fine - sup) / sup if sup else 0.0
        refine_ok = change < refine_tol
    return AtomReport(
        support_ok=_support_ok(atom),
        cancellation_ok=abs(signed) <= CANCEL_TOL * mass,
        mass_ok=mass <= 1.0 + MASS_TOL,
        heat_ok=sup <= budget * (1.0 + tol),
        mass=mass,
        signed_mass=signed,
        heat_sup=sup,
        heat_budget=budget,
        heat_tol=tol,
        heat_argmax=argmax,
        refined_sup=fine,
        refine_change=change,
        refine_ok=refine_ok,
    )
