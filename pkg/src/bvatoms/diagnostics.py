"""Empirical probes: Sobolev ratio, Riesz potentials, trace ratios and corpus constants."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .atoms import verify_atom
from .grid import CellSet, GridFunction, VectorFaceMeasure, face_centers, gradient_measure, total_variation
from .heat import HeatEvalPlan
from .pipeline import decompose, l1_budget

__all__ = ["FrostmanMeasure", "gn_ratio", "riesz_gamma", "riesz_potential", "riesz_potential_measure",
           "trace_ratio", "constants_report", "GrowthWarning"]

RIESZ_CONVENTION = "gamma(alpha) = pi^(d/2) 2^alpha Gamma(alpha/2) / Gamma((d-alpha)/2)"


class GrowthWarning(UserWarning):
    pass


def gn_ratio(u: GridFunction) -> float:
    """``||u||_{L^{d/(d-1)}} / |Du|``; at most ``1/(2d)`` for the anisotropic variation."""
    if u.is_zero():
        raise ValueError("zero function has no Sobolev ratio")
    d = u.spec.d
    p = d / (d - 1)
    norm = (np.sum(np.abs(u.values) ** p) * u.spec.cell_volume) ** (1.0 / p)
    return float(norm) / total_variation(gradient_measure(u))


def riesz_gamma(alpha: float, d: int) -> float:
    return math.pi ** (d / 2) * 2.0 ** alpha * math.gamma(alpha / 2) / math.gamma((d - alpha) / 2)


def riesz_potential(points, weights, alpha: float, X, d: int | None = None) -> np.ndarray:
    """``I_alpha`` of the atomic measure ``sum w_i delta_{points_i}`` at ``X``.

    Atoms coinciding with an evaluation point are skipped.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    weights = np.asarray(weights, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = d or points.shape[1]
    if not 0 < alpha < d:
        raise ValueError(f"alpha must lie in (0, {d}), got {alpha}")
    out = np.zeros(len(X))
    if not len(weights):
        return out
    g = riesz_gamma(alpha, d)
    for start in range(0, len(X), 4096):
        diff = X[start:start + 4096, None, :] - points[None, :, :]
        r = np.sqrt(np.sum(diff * diff, axis=-1))
        with np.errstate(divide="ignore"):
            k = np.where(r > 0, r ** (alpha - d), 0.0)
        out[start:start + 4096] = k @ weights / g
    return out


def riesz_potential_measure(m: VectorFaceMeasure, alpha: float, X) -> np.ndarray:
    """Componentwise ``I_alpha m`` at ``X``; shape ``(len(X), d)``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    d = m.spec.d
    out = np.zeros((len(X), d))
    for l in range(d):
        if len(m.weights[l]):
            out[:, l] = riesz_potential(face_centers(m.spec, l, m.cells[l]), m.weights[l], alpha, X, d)
    return out


@dataclass(frozen=True, eq=False)
class FrostmanMeasure:
    points: np.ndarray
    weights: np.ndarray
    exponent: float
    constant: float

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if len(pts) != len(w):
            raise ValueError("points and weights differ in length")
        if np.any(w < 0):
            raise ValueError("Frostman weights must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def growth_ratios(self, nradii: int = 24) -> np.ndarray:
        """``nu(B(x, r)) / (c r^s)`` over balls centred at the atoms, radii geometric
        between the smallest pair distance and the diameter."""
        P = self.points
        if len(P) == 1:
            dist = np.zeros((1, 1))
            rmin = rmax = 1.0
        else:
            diff = P[:, None, :] - P[None, :, :]
            dist = np.sqrt(np.sum(diff * diff, axis=-1))
            off = dist[~np.eye(len(P), dtype=bool)]
            rmin = max(float(off[off > 0].min()) if np.any(off > 0) else 1.0, 1e-12)
            rmax = max(float(dist.max()), rmin)
        radii = np.geomspace(rmin / 2, 2 * rmax, nradii)
        masses = np.array([[self.weights[dist[i] <= r].sum() for r in radii] for i in range(len(P))])
        return masses / (self.constant * radii[None, :] ** self.exponent)

    def growth_ok(self, tol: float = 1e-9) -> bool:
        return bool(np.all(self.growth_ratios() <= 1.0 + tol))


def trace_ratio(u: GridFunction, alpha: float, nu: FrostmanMeasure) -> dict:
    """``sum_nu |I_alpha Du| / |Du|`` (Euclidean norm over components)."""
    d = u.spec.d
    if not 1 < alpha < d:
        raise ValueError(f"alpha must lie in (1, {d}), got {alpha}")
    if nu.d != d:
        raise ValueError(f"measure lives in dimension {nu.d}, grid in {d}")
    ok = nu.growth_ok()
    if not ok:
        warnings.warn("measure violates its declared growth bound", GrowthWarning, stacklevel=2)
    Du = gradient_measure(u)
    vals = riesz_potential_measure(Du, alpha, nu.points)
    num = float(np.sum(nu.weights * np.sqrt(np.sum(vals ** 2, axis=1))))
    return {"ratio": num / total_variation(Du), "growth_ok": ok, "alpha": alpha, "convention": RIESZ_CONVENTION}


def _stats(values) -> dict:
    v = np.asarray(list(values), dtype=float)
    if not len(v):
        return {"count": 0, "min": None, "median": None, "max": None}
    return {"count": int(len(v)), "min": float(v.min()), "median": float(np.median(v)), "max": float(v.max())}


def constants_report(corpus, heat: bool = True, plan: HeatEvalPlan | None = None) -> dict:
    """Distribution summaries of the constants over a corpus of functions or sets."""
    corpus = list(corpus)
    if not corpus:
        raise ValueError("empty corpus")
    box_c, ratios, gns, margins = [], [], [], []
    for item in corpus:
        u = item.indicator() if isinstance(item, CellSet) else item
        if u.is_zero():
            continue
        dec = decompose(u)
        box_c.extend(L["boxing_constant"] for L in dec.layers)
        ratios.append(l1_budget(dec)["ratio"])
        gns.append(gn_ratio(u))
        if heat:
            margins.extend(verify_atom(e.atom, plan).heat_margin for e in dec.entries)
    return {
        "items": len(corpus),
        "boxing_constant": _stats(box_c),
        "lambda_ratio": _stats(ratios),
        "gn_ratio": _stats(gns),
        "heat_margin": _stats(margins),
    }
