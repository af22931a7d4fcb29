"""Heat-kernel evaluation of face measures.

Two readings of a face weight are supported:

``face``
    the weight is spread uniformly over the face (the exact distributional
    derivative of a piecewise-constant function);
``point``
    the weight sits at the face center as a Dirac mass.

``heat_sup`` estimates ``sup_{x, t} t**0.5 * |p_t * m(x)|`` over a geometric
time grid and per-time sample lattices.  On a lattice the field is a
separable tensor product, so it is evaluated exactly with one small matrix
product per axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
from scipy import integrate, special

from .grid import GridSpec, face_centers

__all__ = [
    "heat_kernel",
    "heat_convolve",
    "HeatEvalPlan",
    "HeatSup",
    "heat_sup",
    "heat_sup_refined",
    "grad_heat_l1",
    "grad_heat_l1_constant",
    "truncation_radius",
]

SQRT_4PI = math.sqrt(4.0 * math.pi)


def heat_kernel(x, t: float) -> np.ndarray:
    """``(4 pi t)**(-d/2) exp(-|x|**2 / 4t)`` for points ``x`` of shape ``(..., d)``."""
    if not t > 0:
        raise ValueError(f"heat time must be positive, got {t}")
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    r2 = np.sum(x * x, axis=-1)
    return (4.0 * math.pi * t) ** (-d / 2) * np.exp(-r2 / (4.0 * t))


def truncation_radius(t: float, d: int, mass: float, eps: float) -> float:
    """Distance beyond which a source of total mass ``mass`` contributes at most ``eps``."""
    peak = mass * (4.0 * math.pi * t) ** (-d / 2)
    if peak <= eps:
        return 0.0
    return math.sqrt(4.0 * t * math.log(peak / eps))


def _face_factors(z: np.ndarray, lo: np.ndarray, h: float, t: float) -> np.ndarray:
    # average over [lo, lo + h] of the 1-D heat kernel of variance 2t
    s = math.sqrt(2.0 * t)
    return (special.ndtr((z - lo) / s) - special.ndtr((z - lo - h) / s)) / h


def _gauss_1d(z: np.ndarray, t: float) -> np.ndarray:
    return np.exp(-z * z / (4.0 * t)) / math.sqrt(4.0 * math.pi * t)


def heat_convolve(spec: GridSpec, l: int, cells, weights, t: float, X, eps_trunc: float = 1e-12,
                  kernel: str = "point"):
    """``p_t * m`` at the points ``X`` for the axis-``l`` face measure ``(cells, weights)``.

    Faces farther than the truncation radius from a point are dropped; the
    returned bound caps the resulting absolute error per point.
    """
    if not t > 0:
        raise ValueError(f"heat time must be positive, got {t}")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, spec.d)
    weights = np.asarray(weights, dtype=float)
    d = spec.d
    out = np.zeros(len(X))
    if not len(weights):
        return out, 0.0
    mass = float(np.abs(weights).sum())
    r = truncation_radius(t, d, mass, eps_trunc)
    centers = face_centers(spec, l, cells)
    # a face patch reaches at most half a face diagonal beyond its center
    slack = 0.5 * spec.h * math.sqrt(d - 1) if kernel == "face" else 0.0
    chunk = max(1, 2_000_000 // max(1, len(centers)))
    for start in range(0, len(X), chunk):
        P = X[start:start + chunk]
        diff = P[:, None, :] - centers[None, :, :]
        if kernel == "point":
            vals = heat_kernel(diff, t)
        elif kernel == "face":
            vals = np.ones(diff.shape[:2])
            for k in range(d):
                if k == l:
                    vals *= _gauss_1d(diff[:, :, k], t)
                else:
                    vals *= _face_factors(diff[:, :, k], -0.5 * spec.h, spec.h, t)
        else:
            raise ValueError(f"unknown kernel {kernel!r}")
        dist = np.sqrt(np.sum(diff * diff, axis=-1))
        vals = np.where(dist - slack > r, 0.0, vals)
        out[start:start + chunk] = vals @ weights
    return out, eps_trunc


@dataclass(frozen=True)
class HeatEvalPlan:
    """Sampling plan for the sup in the heat condition.

    Unset time bounds default to ``t_min = (h/4)**2`` and
    ``t_max = (8 * support_side)**2``.
    """

    t_min: float | None = None
    t_max: float | None = None
    ratio: float = 2.0
    rho: int = 4
    margin: float = 1.0
    eps_trunc: float = 1e-10
    kernel: str = "face"
    extend: int = 0

    def __post_init__(self):
        if self.rho < 2:
            raise ValueError("rho must be >= 2")
        if self.eps_trunc <= 0:
            raise ValueError("eps_trunc must be positive")
        if self.t_min is not None and self.t_max is not None and self.t_min > self.t_max:
            raise ValueError("t_min must not exceed t_max")
        if self.kernel not in ("face", "point"):
            raise ValueError(f"unknown kernel {self.kernel!r}")

    def times(self, h: float, support_side: float) -> np.ndarray:
        t_min = self.t_min if self.t_min is not None else (h / 4.0) ** 2
        t_max = self.t_max if self.t_max is not None else (8.0 * support_side) ** 2
        t_min /= self.ratio ** self.extend
        t_max *= self.ratio ** self.extend
        n = int(math.floor(math.log(t_max / t_min, self.ratio) + 1e-9)) + 1
        return t_min * self.ratio ** np.arange(n)

    def refined(self) -> "HeatEvalPlan":
        """Twice the spatial resolution, time range extended one ratio step at each end."""
        return replace(self, rho=2 * self.rho, extend=self.extend + 1)

    def to_dict(self) -> dict:
        return {"t_min": self.t_min, "t_max": self.t_max, "ratio": self.ratio, "rho": self.rho,
                "margin": self.margin, "eps_trunc": self.eps_trunc, "kernel": self.kernel,
                "extend": self.extend}


@dataclass(frozen=True)
class HeatSup:
    value: float
    x: tuple[float, ...] | None
    t: float | None
    grid_value: float
    limit_value: float
    ntimes: int
    npoints: int


# relative size of the Gaussian factor beyond which samples are skipped
_REL_CUTOFF = 1e-13


def _axis_matrix(k: int, l: int, spec: GridSpec, idx: np.ndarray, samples: np.ndarray, t: float,
                 kernel: str) -> np.ndarray:
    h = spec.h
    o = spec.origin[k]
    if k == l:
        planes = o + (idx + 1) * h
        return _gauss_1d(samples[:, None] - planes[None, :], t)
    if kernel == "face":
        return _face_factors(samples[:, None], o + idx[None, :] * h, h, t)
    centers = o + (idx + 0.5) * h
    return _gauss_1d(samples[:, None] - centers[None, :], t)


def lattice_field(spec: GridSpec, l: int, cells: np.ndarray, weights: np.ndarray, t: float,
                  samples: list[np.ndarray], kernel: str = "face") -> np.ndarray:
    """``p_t * m`` on the tensor lattice ``samples[0] x ... x samples[d-1]``."""
    d = spec.d
    cmin = cells.min(axis=0)
    cmax = cells.max(axis=0)
    W = np.zeros(tuple(cmax - cmin + 1))
    np.add.at(W, tuple((cells - cmin).T), weights)
    F = W
    for k in range(d):
        idx = np.arange(cmin[k], cmax[k] + 1)
        A = _axis_matrix(k, l, spec, idx, samples[k], t, kernel)
        F = np.moveaxis(np.tensordot(A, F, axes=(1, k)), 0, k)
    return F


def _support_box(spec: GridSpec, l: int, cells: np.ndarray, kernel: str) -> tuple[np.ndarray, np.ndarray]:
    h = spec.h
    o = np.asarray(spec.origin)
    lo = o + cells.min(axis=0) * h
    hi = o + (cells.max(axis=0) + 1) * h
    lo[l] += h
    if kernel == "point":
        lo = lo + 0.5 * h
        hi = hi - 0.5 * h
        lo[l] -= 0.5 * h
        hi[l] += 0.5 * h
    return lo, hi


def heat_sup(spec: GridSpec, l: int, cells, weights, support_lo, support_side: float,
             plan: HeatEvalPlan | None = None) -> HeatSup:
    """Estimate ``sup_{x, t} t**0.5 |p_t * m(x)|`` for an axis-``l`` face measure.

    ``support_lo``/``support_side`` describe the support cube; samples lie on
    a lattice anchored at ``support_lo``, inside that cube widened by
    ``plan.margin * support_side`` on every side and within the Gaussian
    reach of the measure.  For the ``face`` kernel the
    ``t -> 0`` limit, ``|w| / (h**(d-1) sqrt(4 pi))`` on the face carrying
    ``w``, is included exactly.
    """
    plan = plan or HeatEvalPlan()
    cells = np.asarray(cells, dtype=np.int64).reshape(-1, spec.d)
    weights = np.asarray(weights, dtype=float)
    if not len(weights) or not np.any(weights):
        return HeatSup(0.0, None, None, 0.0, 0.0, 0, 0)
    d = spec.d
    h = spec.h
    supp_lo, supp_hi = _support_box(spec, l, cells, plan.kernel)
    box_lo = np.asarray(support_lo, dtype=float) - plan.margin * support_side
    box_hi = np.asarray(support_lo, dtype=float) + (1.0 + plan.margin) * support_side
    o = np.asarray(support_lo, dtype=float)

    best, best_x, best_t = -1.0, None, None
    npoints = 0
    times = plan.times(h, support_side)
    for t in times:
        reach = math.sqrt(4.0 * t * math.log(1.0 / _REL_CUTOFF))
        k = max(0, math.floor(math.log2(math.sqrt(t) / h))) if t > h * h else 0
        step = h / plan.rho * 2.0 ** k
        samples = []
        for ax in range(d):
            a = max(box_lo[ax], supp_lo[ax] - reach)
            b = min(box_hi[ax], supp_hi[ax] + reach)
            i0 = math.ceil((a - o[ax]) / step - 1e-9)
            i1 = math.floor((b - o[ax]) / step + 1e-9)
            samples.append(o[ax] + step * np.arange(i0, max(i0, i1) + 1))
        F = np.abs(lattice_field(spec, l, cells, weights, float(t), samples, plan.kernel))
        npoints += F.size
        pos = int(np.argmax(F))
        val = math.sqrt(t) * float(F.flat[pos])
        if val > best:
            ijk = np.unravel_index(pos, F.shape)
            best, best_t = val, float(t)
            best_x = tuple(float(samples[ax][ijk[ax]]) for ax in range(d))
    grid_value = best
    limit = 0.0
    if plan.kernel == "face":
        j = int(np.argmax(np.abs(weights)))
        limit = float(abs(weights[j])) / (spec.face_area * SQRT_4PI)
        if limit > best:
            best = limit
            best_x = tuple(float(v) for v in face_centers(spec, l, cells[j:j + 1])[0])
            best_t = 0.0
    return HeatSup(best, best_x, best_t, grid_value, limit, len(times), npoints)


def heat_sup_refined(spec: GridSpec, l: int, cells, weights, support_lo, support_side: float,
                     plan: HeatEvalPlan | None = None) -> tuple[HeatSup, HeatSup, float]:
    """Sup under ``plan`` and under ``plan.refined()``, with the relative change."""
    plan = plan or HeatEvalPlan()
    base = heat_sup(spec, l, cells, weights, support_lo, support_side, plan)
    fine = heat_sup(spec, l, cells, weights, support_lo, support_side, plan.refined())
    change = abs(fine.value - base.value) / base.value if base.value else 0.0
    return base, fine, change


@lru_cache(maxsize=None)
def grad_heat_l1_constant(d: int) -> float:
    """``||grad p_1||_{L^1(R^d)}`` by radial quadrature."""
    if d < 1:
        raise ValueError("dimension must be positive")
    sphere = 2.0 * math.pi ** (d / 2) / math.gamma(d / 2)
    norm = (4.0 * math.pi) ** (-d / 2)

    def integrand(r):
        return 0.5 * r * norm * math.exp(-r * r / 4.0) * r ** (d - 1)

    val, err = integrate.quad(integrand, 0.0, math.inf, epsabs=1e-12, epsrel=1e-12)
    if err > 1e-8:
        raise ArithmeticError(f"quadrature error {err} exceeds 1e-8")
    return sphere * val


def grad_heat_l1(d: int, t: float) -> float:
    """``||grad p_t||_{L^1}`` = ``t**-0.5 * ||grad p_1||_{L^1}``."""
    if not t > 0:
        raise ValueError(f"heat time must be positive, got {t}")
    return grad_heat_l1_constant(d) / math.sqrt(t)
