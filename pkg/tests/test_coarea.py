import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bvatoms.coarea import (Layer, coarea_defect, exact_layers, layer_budget, layer_sum, riemann_excess_bound,
                            riemann_sample, sublevel, superlevel)
from bvatoms.corpus import smooth_bump
from bvatoms.grid import CellSet, GridFunction, gradient_measure, perimeter, total_variation

from conftest import brute_faces, measure_dict

signed_values = arrays(np.float64, st.tuples(st.integers(1, 5), st.integers(1, 5)),
                       elements=st.integers(-4, 4).map(float))


def brute_tv(values):
    return math.fsum(abs(w) for w in brute_faces(values).values())


def test_superlevel_nested_example():
    A = np.zeros((3, 3), bool)
    A[1, 1] = True
    B = A.copy()
    B[0, :] = True
    u = GridFunction.from_array(2.0 * A + 1.0 * B)
    assert np.array_equal(superlevel(u, 1.5).mask, A)
    assert superlevel(u, 3.0).is_empty()
    assert np.array_equal(sublevel(-u, -1.5).mask, A)


def test_indicator_gives_single_layer():
    E = np.zeros((4, 4), bool)
    E[1:3, 0:2] = True
    layers = exact_layers(GridFunction.from_array(2.5 * E))
    assert len(layers) == 1
    assert layers[0].a == 2.5 and layers[0].sigma == 1
    assert np.array_equal(layers[0].omega.mask, E)


def test_two_by_two_layers(two_by_two):
    layers = exact_layers(two_by_two)
    assert [(L.a, L.omega.count, L.perimeter) for L in layers] == [(1.0, 2, 6.0), (1.0, 1, 4.0)]
    assert layer_budget(layers) == 10.0 == brute_tv(two_by_two.values)


def test_signed_three_values():
    v = np.array([[0.0, 2.0, 2.0], [-1.0, 0.0, 2.0], [-1.0, -1.0, 0.0]])
    layers = exact_layers(GridFunction.from_array(v))
    assert [(L.sigma, L.a, L.t) for L in layers] == [(-1, 1.0, -0.5), (1, 2.0, 1.0)]
    assert layer_budget(layers) == brute_tv(v)


@given(signed_values)
def test_exact_coarea_identity(values):
    u = GridFunction.from_array(values)
    if u.is_zero():
        assert exact_layers(u) == []
        return
    layers = exact_layers(u)
    tv = total_variation(gradient_measure(u))
    assert abs(layer_budget(layers) - tv) <= 1e-12 * tv
    assert measure_dict(layer_sum(layers)) == measure_dict(gradient_measure(u))


@given(arrays(np.float64, (4, 4), elements=st.floats(-5, 5, allow_nan=False)))
def test_exact_coarea_with_real_values(values):
    u = GridFunction.from_array(values)
    if u.is_zero():
        return
    layers = exact_layers(u)
    tv = total_variation(gradient_measure(u))
    assert abs(layer_budget(layers) - tv) <= 1e-12 * tv
    diff = gradient_measure(u) - layer_sum(layers)
    assert total_variation(diff) <= 1e-12 * tv


@pytest.mark.parametrize("n", [1, 2, 5, 17])
def test_riemann_on_indicator(n):
    E = np.zeros((5, 5), bool)
    E[1:4, 2:4] = True
    c = 3.0
    layers = riemann_sample(GridFunction.from_array(c * E), n)
    total = layer_budget(layers)
    per = perimeter(CellSet.from_array(E))
    assert c * per * (n - 1) / n - 1e-12 <= total <= c * per + 1e-12


@given(signed_values, st.integers(1, 40), st.sampled_from(["uniform", "quantile"]))
def test_riemann_excess_bounded(values, n, scheme):
    u = GridFunction.from_array(values)
    if u.is_zero():
        return
    layers = riemann_sample(u, n, scheme)
    tv = total_variation(gradient_measure(u))
    assert layer_budget(layers) <= tv + riemann_excess_bound(u, layers) + 1e-9


def test_riemann_converges_on_bump():
    u = smooth_bump(64, seed=1)
    defects = [coarea_defect(u, riemann_sample(u, n)) for n in (4, 16, 64, 256)]
    assert all(b <= a + 1e-15 for a, b in zip(defects, defects[1:]))
    assert defects[-1] < 0.01


def test_riemann_pairing_converges():
    u = smooth_bump(64, seed=2)

    def phi(X):
        return np.stack([np.sin(3 * X[:, 0]) * X[:, 1], np.cos(2 * X[:, 1])], axis=1)

    from bvatoms.grid import pair
    ref = pair(gradient_measure(u), phi)
    errs = [abs(ref - pair(layer_sum(riemann_sample(u, 2 ** k)), phi)) for k in range(4, 11)]
    assert errs[-1] < 0.05 * errs[0]
    assert errs[-1] < 1e-3


def test_rejects_bad_inputs():
    u = GridFunction.from_array(np.ones((2, 2)))
    with pytest.raises(ValueError):
        riemann_sample(u, 0)
    with pytest.raises(ValueError):
        riemann_sample(u, 2, "cubic")
    with pytest.raises(ValueError):
        Layer(0.0, 0.5, CellSet.from_array(np.ones((2, 2), bool)))
    with pytest.raises(ValueError):
        Layer(1.0, 0.5, CellSet.from_array(np.zeros((2, 2), bool)))
