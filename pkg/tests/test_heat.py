import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from bvatoms.grid import GridSpec, face_centers
from bvatoms.heat import (HeatEvalPlan, grad_heat_l1, grad_heat_l1_constant, heat_convolve, heat_kernel, heat_sup,
                          heat_sup_refined, lattice_field)

SPEC2 = GridSpec((8, 8), 1.0)
DIPOLE = (np.array([[0, 0], [1, 0]]), np.array([1.0, -1.0]))


def random_measure(rng, spec, n=6, balanced=False):
    cells = rng.integers(0, min(spec.shape) - 1, (n, spec.d))
    w = rng.normal(size=n)
    if balanced:
        w -= w.mean()
    return cells, w


def test_kernel_normalization_point():
    assert heat_kernel(np.zeros(2), 1 / (4 * math.pi)) == pytest.approx(1.0, rel=1e-15)
    with pytest.raises(ValueError):
        heat_kernel(np.zeros(2), 0.0)


@pytest.mark.parametrize("kernel", ["point", "face"])
def test_single_face(kernel):
    cells = np.array([[2, 3]])
    X = np.array([[0.3, 0.7], [3.0, 3.5], [5.0, 1.0]])
    t = 0.8
    vals, _ = heat_convolve(SPEC2, 0, cells, [2.0], t, X, kernel=kernel)
    c = face_centers(SPEC2, 0, cells)[0]
    if kernel == "point":
        assert np.allclose(vals, 2.0 * heat_kernel(X - c, t), rtol=1e-14, atol=0)
    else:
        # face average along the tangential axis
        ys = c[1] - 0.5 + (np.arange(4000) + 0.5) / 4000
        ref = [2.0 * np.mean(heat_kernel(np.stack([np.full_like(ys, c[0]), ys], 1) - x, t)) for x in X]
        assert np.allclose(vals, ref, rtol=1e-6)


@pytest.mark.parametrize("kernel", ["point", "face"])
@pytest.mark.parametrize("t", [0.3, 2.0, 9.0])
def test_mass_conservation(kernel, t):
    rng = np.random.default_rng(4)
    cells, w = random_measure(rng, SPEC2)
    step = min(0.25, math.sqrt(t) / 4)
    reach = 12 * math.sqrt(t) + 10
    axis = np.arange(-reach, reach, step) + 4.0
    F = lattice_field(SPEC2, 1, cells, w, t, [axis, axis], kernel)
    assert F.sum() * step ** 2 == pytest.approx(w.sum(), abs=1e-6)


@pytest.mark.parametrize("kernel", ["point", "face"])
@given(st.integers(0, 10_000), st.floats(0.01, 50.0))
def test_maximum_principle(kernel, seed, t):
    rng = np.random.default_rng(seed)
    cells, w = random_measure(rng, SPEC2)
    X = rng.uniform(-3, 11, (200, 2))
    vals, _ = heat_convolve(SPEC2, 0, cells, w, t, X, kernel=kernel)
    assert np.all(np.abs(vals) <= np.abs(w).sum() * (4 * math.pi * t) ** -1 * (1 + 1e-12))


def test_lattice_field_matches_direct_sum():
    rng = np.random.default_rng(5)
    for kernel in ("point", "face"):
        cells, w = random_measure(rng, SPEC2, 10)
        xs = np.linspace(-2, 10, 13)
        ys = np.linspace(-1, 9, 11)
        F = lattice_field(SPEC2, 1, cells, w, 0.7, [xs, ys], kernel)
        X = np.stack(np.meshgrid(xs, ys, indexing="ij"), -1).reshape(-1, 2)
        direct, _ = heat_convolve(SPEC2, 1, cells, w, 0.7, X, eps_trunc=1e-300, kernel=kernel)
        assert np.allclose(F.ravel(), direct, rtol=1e-12, atol=1e-15)


def test_semigroup_spot_check():
    rng = np.random.default_rng(6)
    cells, w = random_measure(rng, SPEC2)
    s, t = 0.5, 0.8
    step = 0.1
    axis = np.arange(-12, 20, step) + step / 2
    F = lattice_field(SPEC2, 0, cells, w, s, [axis, axis], "point")
    G = np.stack(np.meshgrid(axis, axis, indexing="ij"), -1)
    for x in rng.uniform(0, 8, (5, 2)):
        lhs = np.sum(F * heat_kernel(G - x, t)) * step ** 2
        rhs = heat_convolve(SPEC2, 0, cells, w, s + t, x[None], kernel="point")[0][0]
        assert lhs == pytest.approx(rhs, abs=1e-9)


def test_truncation_error_certificate():
    rng = np.random.default_rng(7)
    cells, w = random_measure(rng, GridSpec((40, 40), 1.0), 30)
    spec = GridSpec((40, 40), 1.0)
    X = rng.uniform(0, 40, (100, 2))
    exact, _ = heat_convolve(spec, 0, cells, w, 2.0, X, eps_trunc=1e-300)
    approx, eps = heat_convolve(spec, 0, cells, w, 2.0, X, eps_trunc=1e-4)
    assert np.all(np.abs(exact - approx) <= eps * len(w))


def test_dipole_decay_bound():
    cells, w = DIPOLE
    for t in (1.0, 10.0, 100.0, 1000.0):
        X = np.array([[1.5, 0.5], [30.0, 2.0], [-5.0, -5.0]])
        vals, _ = heat_convolve(SPEC2, 0, cells, w, t, X)
        grad_sup = (4 * math.pi * t) ** -1 * math.sqrt(2 * t) * math.exp(-0.5) / (2 * t)
        assert np.all(np.abs(vals) <= 1.0 * grad_sup * 2.0 * (1 + 1e-12))


def dense_dipole_sup(kernel, times):
    cells, w = DIPOLE
    xs = np.linspace(-10, 13, 20001)
    X = np.stack([xs, np.full_like(xs, 0.5)], 1)
    best = 0.0
    for t in np.geomspace(times[0], times[-1], 300):
        v, _ = heat_convolve(SPEC2, 0, cells, w, t, X, kernel=kernel)
        best = max(best, math.sqrt(t) * float(np.abs(v).max()))
    return best


@pytest.mark.parametrize("kernel", ["point", "face"])
def test_dipole_sup_two_methods(kernel):
    cells, w = DIPOLE
    plan = HeatEvalPlan(kernel=kernel)
    res = heat_sup(SPEC2, 0, cells, w, np.array([-1.0, -1.5]), 4.0, plan)
    dense = dense_dipole_sup(kernel, plan.times(1.0, 4.0))
    assert res.grid_value == pytest.approx(dense, rel=0.01)
    if kernel == "face":
        assert res.limit_value == pytest.approx(1 / math.sqrt(4 * math.pi), rel=1e-15)


def test_scaling_law():
    # dilating the geometry by 2 with fixed weights scales the sup by 2**(1-d)
    for d in (2, 3):
        cells = np.zeros((2, d), dtype=np.int64)
        cells[1, 0] = 1
        w = np.array([1.0, -1.0])
        base = heat_sup(GridSpec((4,) * d, 1.0), 0, cells, w, np.full(d, -1.0), 4.0)
        big = heat_sup(GridSpec((4,) * d, 2.0), 0, cells, w, np.full(d, -2.0), 8.0)
        assert big.value == pytest.approx(base.value * 2.0 ** (1 - d), rel=1e-12)


def test_empty_measure():
    res = heat_sup(SPEC2, 0, np.zeros((0, 2), int), np.zeros(0), np.zeros(2), 2.0)
    assert res.value == 0.0 and res.x is None


def test_refinement_is_stable_for_dipole():
    cells, w = DIPOLE
    base, fine, change = heat_sup_refined(SPEC2, 0, cells, w, np.array([-1.0, -1.5]), 4.0)
    assert change < 0.01
    assert fine.value >= base.value * (1 - 1e-12)


def test_plan_times_and_refinement():
    plan = HeatEvalPlan()
    t = plan.times(1.0, 2.0)
    assert t[0] == pytest.approx(1 / 16) and t[-1] <= 256.0 * (1 + 1e-12)
    assert np.allclose(t[1:] / t[:-1], 2.0)
    r = plan.refined()
    assert r.rho == 8
    tr = r.times(1.0, 2.0)
    assert tr[0] == pytest.approx(t[0] / 2) and tr[-1] == pytest.approx(t[-1] * 2)
    with pytest.raises(ValueError):
        HeatEvalPlan(rho=1)
    with pytest.raises(ValueError):
        HeatEvalPlan(kernel="box")


def test_grad_heat_constants():
    K2 = grad_heat_l1_constant(2)
    K3 = grad_heat_l1_constant(3)
    assert K2 == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-12)
    assert K3 == pytest.approx(2 / math.sqrt(math.pi), rel=1e-12)
    assert grad_heat_l1(2, 4.0) == pytest.approx(grad_heat_l1(2, 1.0) / 2, rel=1e-15)
    with pytest.raises(ValueError):
        grad_heat_l1(2, 0.0)


@pytest.mark.parametrize("d", [2, 3])
def test_grad_heat_monte_carlo(d):
    rng = np.random.default_rng(100 + d)
    # p_1 is the normal density with variance 2 per axis
    X = rng.normal(scale=math.sqrt(2.0), size=(400_000, d))
    samples = 0.5 * np.linalg.norm(X, axis=1)
    se = samples.std(ddof=1) / math.sqrt(len(samples))
    assert abs(samples.mean() - grad_heat_l1_constant(d)) <= 3 * se
