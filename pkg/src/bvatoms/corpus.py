"""Seeded test-set generators."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .grid import GridFunction

KINDS = ("blobs", "union-of-cubes", "smooth-bumps", "percolation", "steps")


def _rng(seed: int, i: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(i)])


def _coords(shape):
    return np.meshgrid(*[np.arange(n) + 0.5 for n in shape], indexing="ij")


def _gaussian_sum(rng, shape, k, signed=False):
    X = _coords(shape)
    n = min(shape)
    f = np.zeros(shape)
    for _ in range(k):
        c = [rng.uniform(0.2 * m, 0.8 * m) for m in shape]
        s = rng.uniform(0.06, 0.18) * n
        amp = rng.uniform(0.5, 1.0) * (rng.choice([-1.0, 1.0]) if signed else 1.0)
        f += amp * np.exp(-sum((x - ci) ** 2 for x, ci in zip(X, c)) / (2 * s * s))
    return f


def blobs(rng, shape) -> np.ndarray:
    f = _gaussian_sum(rng, shape, int(rng.integers(2, 7)))
    level = rng.uniform(0.3, 0.6) * f.max()
    mask = f > level
    if not mask.any():
        mask[np.unravel_index(np.argmax(f), shape)] = True
    return mask


def union_of_cubes(rng, shape) -> np.ndarray:
    mask = np.zeros(shape, dtype=bool)
    n = min(shape)
    for _ in range(int(rng.integers(1, 8))):
        side = int(rng.integers(1, max(2, n // 3)))
        lo = [int(rng.integers(0, m - min(side, m) + 1)) for m in shape]
        mask[tuple(slice(a, a + side) for a in lo)] = True
    return mask


def largest_component(mask: np.ndarray) -> np.ndarray:
    """Largest face-connected component (ties go to the lowest label)."""
    labels, n = ndimage.label(mask)
    if n == 0:
        return mask.copy()
    sizes = np.bincount(labels.ravel())[1:]
    return labels == (int(np.argmax(sizes)) + 1)


def percolation(rng, shape, p: float = 0.6) -> np.ndarray:
    mask = rng.random(shape) < p
    if not mask.any():
        mask[tuple(int(rng.integers(0, m)) for m in shape)] = True
    return largest_component(mask)


def smooth_bumps(rng, shape) -> np.ndarray:
    return _gaussian_sum(rng, shape, int(rng.integers(1, 4)), signed=rng.random() < 0.5)


def steps(rng, shape) -> np.ndarray:
    """Signed integer combination of a few cube unions."""
    f = np.zeros(shape)
    for _ in range(int(rng.integers(1, 4))):
        f += int(rng.choice([-2, -1, 1, 2, 3])) * union_of_cubes(rng, shape)
    if not f.any():
        f[tuple(m // 2 for m in shape)] = 1.0
    return f


def smooth_bump(size: int, seed: int = 0, d: int = 2) -> GridFunction:
    """One Gaussian bump with seeded center and width, on ``[0, 1]**d``."""
    rng = np.random.default_rng(seed)
    shape = (size,) * d
    X = _coords(shape)
    c = [rng.uniform(0.4, 0.6) * size for _ in range(d)]
    s = rng.uniform(0.12, 0.18) * size
    f = np.exp(-sum((x - ci) ** 2 for x, ci in zip(X, c)) / (2 * s * s))
    f[f < 1e-3] = 0.0
    return GridFunction.from_array(f, h=1.0 / size)


def gen_corpus(kind: str, seed: int, count: int, size: int, d: int = 2, p: float = 0.6) -> list[GridFunction]:
    if kind not in KINDS:
        raise ValueError(f"unknown corpus kind {kind!r}; choose from {', '.join(KINDS)}")
    if size < 1 or count < 0:
        raise ValueError("size must be >= 1 and count >= 0")
    shape = (int(size),) * int(d)
    out = []
    for i in range(count):
        rng = _rng(seed, i)
        if kind == "blobs":
            arr = blobs(rng, shape)
        elif kind == "union-of-cubes":
            arr = union_of_cubes(rng, shape)
        elif kind == "percolation":
            arr = percolation(rng, shape, p)
        elif kind == "smooth-bumps":
            arr = smooth_bumps(rng, shape)
        else:
            arr = steps(rng, shape)
        out.append(GridFunction.from_array(np.asarray(arr, dtype=float)))
    return out
