"""Layers x boxing x atoms: the full decomposition of ``Du`` and its bookkeeping."""
from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .atoms import Atom, atoms_for_cube, choose_cprime
from .boxing import BoxingResult, DyadicCube, box_set
from .coarea import Layer, exact_layers, riemann_sample
from .errors import InvariantViolation
from .grid import GridFunction, GridSpec, VectorFaceMeasure, face_centers, gradient_measure, pair, total_variation

__all__ = ["Mode", "Entry", "Decomposition", "decompose", "reconstruct", "weak_star_test", "l1_budget",
           "builtin_fields", "digest"]


@dataclass(frozen=True)
class Mode:
    kind: str = "exact"
    n: int | None = None
    scheme: str = "uniform"

    def __post_init__(self):
        if self.kind not in ("exact", "riemann"):
            raise ValueError(f"unknown mode {self.kind!r}")
        if self.kind == "riemann" and (self.n is None or int(self.n) != self.n or self.n < 1):
            raise ValueError(f"riemann mode needs n >= 1, got {self.n}")

    def to_dict(self) -> dict:
        if self.kind == "exact":
            return {"kind": "exact"}
        return {"kind": "riemann", "n": int(self.n), "scheme": self.scheme}

    @classmethod
    def from_dict(cls, data: dict) -> "Mode":
        return cls(data["kind"], data.get("n"), data.get("scheme", "uniform"))


@dataclass(frozen=True, eq=False)
class Entry:
    lam: float
    atom: Atom


@dataclass(eq=False)
class Decomposition:
    spec: GridSpec
    digest: str
    mode: Mode
    cprime: float
    entries: list[Entry]
    layers: list[dict]
    Du: VectorFaceMeasure
    summary: dict = field(default_factory=dict)

    @property
    def tv(self) -> float:
        return total_variation(self.Du)


def digest(u: GridFunction) -> str:
    h = hashlib.sha256()
    h.update(repr(u.spec.to_dict()).encode())
    h.update(np.ascontiguousarray(u.values, dtype="<f8").tobytes())
    return h.hexdigest()


def _layers_for(u: GridFunction, mode: Mode) -> list[Layer]:
    if mode.kind == "exact":
        return exact_layers(u)
    return riemann_sample(u, mode.n, mode.scheme)


def decompose(u: GridFunction, mode: Mode | str = "exact", cprime: str | float = "auto", threads: int = 1,
              check: bool = True) -> Decomposition:
    """Decompose ``Du`` into weighted atoms.

    Each layer ``sigma * a * chi_omega`` is boxed; every (layer, cube)
    contributes ``d`` atoms sharing ``lambda = sigma * a * C' * M`` where
    ``M`` is the closed boundary mass of ``omega`` on the cube.
    """
    if isinstance(mode, str):
        mode = Mode(mode)
    if u.is_zero():
        raise ValueError("cannot decompose the zero function")
    layers = _layers_for(u, mode)

    def box(layer):
        return box_set(layer.omega, check=check)

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        boxings: list[BoxingResult] = list(pool.map(box, layers))

    c_box = max(b.constant for b in boxings)
    if cprime == "auto":
        cp = choose_cprime(c_box, u.spec.d)
    else:
        cp = float(cprime)
        if not cp > 0:
            raise ValueError(f"C' must be positive, got {cprime}")

    def build(args):
        i, layer, boxing = args
        out = []
        for cube, faces in zip(boxing.cubes, boxing.closed_faces):
            mass = float(faces) * u.spec.face_area
            prov = {"layer": i, "sigma": layer.sigma, "a": layer.a, "t": layer.t}
            lam_raw, atoms = atoms_for_cube(layer.omega, cube, cp, mass, prov)
            lam = layer.sigma * layer.a * lam_raw
            out.extend(Entry(lam, atom) for atom in atoms)
        return out

    with ThreadPoolExecutor(max_workers=max(1, int(threads))) as pool:
        chunks = list(pool.map(build, [(i, L, b) for i, L, b in zip(range(len(layers)), layers, boxings)]))
    entries = [e for chunk in chunks for e in chunk]

    layer_info = []
    for i, (L, b) in enumerate(zip(layers, boxings)):
        layer_info.append({"index": i, "sigma": L.sigma, "a": L.a, "t": L.t, "perimeter": L.perimeter,
                           "cells": L.omega.count, "cubes": len(b.cubes), "boxing_constant": b.constant,
                           "closed_mass": float(b.boundary_mass.sum())})

    dec = Decomposition(u.spec, digest(u), mode, cp, entries, layer_info, gradient_measure(u))
    dec.summary = summarize(dec, c_box=c_box)
    if check:
        _check(dec)
    return dec


def _accumulate(spec: GridSpec, items) -> VectorFaceMeasure:
    dense = []
    for l in range(spec.d):
        shape = list(spec.shape)
        shape[l] += 1
        dense.append(np.zeros(shape))
    for lam, atom in items:
        c = atom.cells.copy()
        c[:, atom.axis] += 1
        np.add.at(dense[atom.axis], tuple(c.T), lam * atom.weights)
    return VectorFaceMeasure.from_dense(spec, dense)


def reconstruct(dec: Decomposition) -> VectorFaceMeasure:
    """``sum lambda * mu`` assembled per component."""
    return _accumulate(dec.spec, ((e.lam, e.atom) for e in dec.entries))


def reconstruction_residual(dec: Decomposition) -> float:
    tv = dec.tv
    diff = dec.Du - reconstruct(dec)
    return total_variation(diff) / tv if tv else 0.0


def builtin_fields(spec: GridSpec) -> dict:
    """Constant coordinate fields, separable sinusoids at three frequencies and a smooth bump."""
    d = spec.d
    o = np.asarray(spec.origin)
    L = np.asarray(spec.shape) * spec.h
    center = o + 0.5 * L
    fields = {}
    for l in range(d):
        def const(X, l=l):
            out = np.zeros((len(X), d))
            out[:, l] = 1.0
            return out
        fields[f"const_{l}"] = const
    for f in (1, 2, 4):
        def sinus(X, f=f):
            X = np.asarray(X, dtype=float)
            out = np.empty((len(X), d))
            for l in range(d):
                val = np.ones(len(X))
                for k in range(d):
                    val *= np.cos(2 * np.pi * f * (X[:, k] - o[k]) / L[k] + 0.3 * (k + l + 1))
                out[:, l] = val
            return out
        fields[f"sin_{f}"] = sinus
    width = 0.25 * float(L.min())

    def bump(X):
        X = np.asarray(X, dtype=float)
        g = np.exp(-np.sum((X - center) ** 2, axis=1) / (2 * width ** 2))
        return np.repeat(g[:, None], d, axis=1) * (1.0 + 0.25 * np.arange(d))
    fields["bump"] = bump
    return fields


def _field_sup(spec: GridSpec, phi, Du: VectorFaceMeasure) -> float:
    best = 0.0
    for l in range(spec.d):
        if len(Du.cells[l]):
            best = max(best, float(np.abs(phi(face_centers(spec, l, Du.cells[l]))).max()))
    return best


def weak_star_test(dec: Decomposition, fields: dict | None = None) -> dict:
    """Normalized pairing residual ``|<Du, phi> - sum lambda <mu, phi>| / (1 + |phi|_inf |Du|)`` per field."""
    fields = fields or builtin_fields(dec.spec)
    rec = reconstruct(dec)
    tv = dec.tv
    out = {}
    for name, phi in fields.items():
        lhs = pair(dec.Du, phi)
        rhs = pair(rec, phi)
        sup = max(_field_sup(dec.spec, phi, dec.Du), _field_sup(dec.spec, phi, rec))
        out[name] = abs(lhs - rhs) / (1.0 + sup * tv)
    return out


def _block_lambdas(dec: Decomposition) -> list[float]:
    # one lambda per (layer, cube): the d component atoms share it
    d = dec.spec.d
    return [dec.entries[i].lam for i in range(0, len(dec.entries), d)]


def l1_budget(dec: Decomposition) -> dict:
    """``sum |lambda|`` per component against ``|Du|``."""
    lams = _block_lambdas(dec)
    s = math.fsum(abs(x) for x in lams)
    tv = dec.tv
    return {"sum_abs_lambda": s, "sum_abs_lambda_all_entries": math.fsum(abs(e.lam) for e in dec.entries),
            "tv": tv, "ratio": s / tv}


def summarize(dec: Decomposition, c_box: float | None = None) -> dict:
    budget = l1_budget(dec)
    per_component = []
    for l in range(dec.spec.d):
        per_component.append(math.fsum(abs(e.lam) for e in dec.entries if e.atom.axis == l))
    layer_sum = math.fsum(L["a"] * L["perimeter"] for L in dec.layers)
    closed_sum = math.fsum(L["a"] * L["closed_mass"] for L in dec.layers)
    return {
        "tv": budget["tv"],
        "tv_components": [float(np.abs(w).sum()) for w in dec.Du.weights],
        "layers": len(dec.layers),
        "atoms": len(dec.entries),
        "cubes": len(dec.entries) // dec.spec.d,
        "sum_abs_lambda": budget["sum_abs_lambda"],
        "sum_abs_lambda_per_component": per_component,
        "sum_abs_lambda_all_entries": budget["sum_abs_lambda_all_entries"],
        "ratio": budget["ratio"],
        "layer_perimeter_sum": layer_sum,
        "closed_overcount": closed_sum / layer_sum if layer_sum else None,
        "boxing_constant": c_box if c_box is not None else max(L["boxing_constant"] for L in dec.layers),
        "reconstruction_residual": reconstruction_residual(dec),
        "weak_star": weak_star_test(dec),
    }


def _check(dec: Decomposition) -> None:
    if any(e.lam == 0 for e in dec.entries):
        raise InvariantViolation("zero coefficient in decomposition")
    for e in dec.entries:
        w = e.atom.weights
        if abs(math.fsum(w)) > 1e-14 * math.fsum(np.abs(w)):
            raise InvariantViolation(f"atom on cube {e.atom.cube} has nonzero mass")
    layer_sum = dec.summary["layer_perimeter_sum"]
    if dec.summary["sum_abs_lambda"] > 2.0 * dec.cprime * layer_sum * (1 + 1e-12):
        raise InvariantViolation("sum |lambda| exceeds twice C' times the layer perimeter budget")
    if dec.mode.kind == "exact":
        if dec.summary["reconstruction_residual"] > 1e-10:
            raise InvariantViolation(f"exact reconstruction residual {dec.summary['reconstruction_residual']}")
        if abs(layer_sum - dec.tv) > 1e-12 * dec.tv:
            raise InvariantViolation("discrete coarea identity failed")
