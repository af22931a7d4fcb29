import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bvatoms.atoms import verify_atom
from bvatoms.corpus import smooth_bump
from bvatoms.errors import InvariantViolation
from bvatoms.grid import GridFunction, total_variation
from bvatoms.io import artifact_from_dict, dumps_artifact
from bvatoms.pipeline import (Decomposition, Mode, decompose, l1_budget, reconstruct, reconstruction_residual,
                              weak_star_test)

signed = arrays(np.float64, st.tuples(st.integers(1, 10), st.integers(1, 10)), elements=st.integers(-3, 3).map(float))


def test_single_cell_decomposition():
    u = GridFunction.from_array(np.ones((1, 1)))
    dec = decompose(u)
    assert len(dec.layers) == 1 and len(dec.entries) == 2
    assert dec.summary["cubes"] == 1
    assert reconstruction_residual(dec) == 0.0
    b = l1_budget(dec)
    assert b["sum_abs_lambda"] == pytest.approx(4 * dec.cprime, rel=1e-15)
    assert b["ratio"] == pytest.approx(dec.cprime, rel=1e-15)
    assert all(verify_atom(e.atom).passed for e in dec.entries)


def test_two_by_two_bookkeeping(two_by_two):
    dec = decompose(two_by_two)
    assert len(dec.layers) == 2
    assert dec.summary["reconstruction_residual"] == 0.0
    closed = sum(L["a"] * L["closed_mass"] for L in dec.layers)
    assert closed >= 10.0
    assert l1_budget(dec)["sum_abs_lambda"] == pytest.approx(dec.cprime * closed, rel=1e-14)


def test_zero_function_rejected():
    with pytest.raises(ValueError):
        decompose(GridFunction.from_array(np.zeros((3, 3))))


@given(signed)
def test_exact_mode_reconstructs(values):
    u = GridFunction.from_array(values)
    if u.is_zero():
        return
    dec = decompose(u)
    assert reconstruction_residual(dec) <= 1e-10
    assert all(v <= 1e-10 for v in weak_star_test(dec).values())
    budget = l1_budget(dec)
    assert budget["ratio"] <= dec.cprime * 2 * u.spec.d


def test_riemann_single_level_on_two_values():
    v = np.zeros((6, 6))
    v[1:4, 2:5] = 3.0
    dec = decompose(GridFunction.from_array(v), Mode("riemann", 1))
    assert reconstruction_residual(dec) == 0.0


def test_constant_fields_cancel_in_every_mode():
    u = smooth_bump(32, seed=4)
    for mode in (Mode("riemann", 8), Mode("riemann", 8, "quantile")):
        ws = weak_star_test(decompose(u, mode))
        assert ws["const_0"] <= 1e-15 and ws["const_1"] <= 1e-15


def test_riemann_residuals_shrink():
    u = smooth_bump(48, seed=5)
    res = [weak_star_test(decompose(u, Mode("riemann", n))) for n in (4, 32, 256)]
    for name in ("sin_1", "sin_2", "bump"):
        vals = [r[name] for r in res]
        assert vals[-1] < vals[0]


def test_thread_count_does_not_change_result():
    rng = np.random.default_rng(11)
    u = GridFunction.from_array(rng.integers(-2, 4, (24, 24)).astype(float))
    a = dumps_artifact(decompose(u, threads=1))
    b = dumps_artifact(decompose(u, threads=4))
    assert a == b


def test_round_trip_is_bit_exact():
    rng = np.random.default_rng(12)
    u = GridFunction.from_array(rng.integers(0, 3, (16, 16)).astype(float), h=0.1)
    dec = decompose(u)
    text = dumps_artifact(dec)
    back = artifact_from_dict(json.loads(text))
    assert dumps_artifact(back) == text
    assert reconstruction_residual(back) == reconstruction_residual(dec)
    assert weak_star_test(back) == weak_star_test(dec)


def test_fixed_cprime_and_check_failure():
    u = GridFunction.from_array(np.eye(4))
    dec = decompose(u, cprime=3.0)
    assert dec.cprime == 3.0
    with pytest.raises(ValueError):
        decompose(u, cprime=-1.0)
    with pytest.raises(ValueError):
        Mode("riemann")
    bad = Decomposition(dec.spec, dec.digest, dec.mode, dec.cprime, dec.entries[2:], dec.layers, dec.Du)
    assert total_variation(dec.Du - reconstruct(bad)) > 0
    from bvatoms.pipeline import _check, summarize
    bad.summary = summarize(bad)
    with pytest.raises(InvariantViolation):
        _check(bad)


def test_three_dimensional_pipeline():
    rng = np.random.default_rng(13)
    u = GridFunction.from_array(rng.integers(0, 3, (6, 5, 4)).astype(float))
    dec = decompose(u)
    assert len(dec.entries) == 3 * dec.summary["cubes"]
    assert reconstruction_residual(dec) <= 1e-10
    assert all(verify_atom(e.atom).passed for e in dec.entries[:30])
