import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bvatoms.atoms import (CPRIME_SLACK, Atom, atoms_for_cube, choose_cprime, cube_faces, make_atom, verify_atom)
from bvatoms.boxing import DyadicCube, box_set
from bvatoms.grid import CellSet, GridSpec, indicator_measure, total_variation
from bvatoms.heat import grad_heat_l1_constant

from conftest import measure_dict


def test_choose_cprime_examples():
    K2 = grad_heat_l1_constant(2)
    assert choose_cprime(0.5, 2) == pytest.approx(max(1.5, 0.5 * 2 * K2) * 1.05, rel=1e-15)
    assert choose_cprime(0.5, 2) == pytest.approx(1.575, rel=1e-15)
    assert choose_cprime(1e-9, 3) == pytest.approx(1.0 + CPRIME_SLACK, rel=1e-8)
    # large boxing constants switch to the heat branch in d=3
    assert choose_cprime(10.0, 3) == pytest.approx(10.0 * 4 * grad_heat_l1_constant(3) * 1.05, rel=1e-15)
    with pytest.raises(ValueError):
        choose_cprime(0.0, 2)


def single_cell_atom(cprime=1.575, l=1, h=1.0, d=2):
    U = CellSet.from_array(np.ones((1,) * d, bool), h=h)
    return make_atom(U, DyadicCube(1, (0,) * d), l, cprime)


def test_single_cell_atom_values():
    cp = 1.575
    lam, atom = single_cell_atom(cp)
    assert lam == cp * 4
    assert sorted(atom.weights.tolist()) == [-1 / (4 * cp), 1 / (4 * cp)]
    assert atom.signed_mass() == 0.0
    assert atom.mass() == pytest.approx(1 / (2 * cp), rel=1e-15)
    assert atom.support_side == 4.0
    rep = verify_atom(atom, refine=True)
    assert rep.passed and rep.refine_ok
    assert rep.heat_sup <= rep.heat_budget


def test_negative_controls():
    _, atom = single_cell_atom()
    broken = dataclasses.replace(atom, pattern=atom.pattern * np.array([1.0, 1.01])[: len(atom.pattern)])
    rep = verify_atom(broken)
    assert not rep.cancellation_ok and not rep.passed
    heavy = dataclasses.replace(atom, scale=1.2 / np.abs(atom.pattern).sum())
    rep = verify_atom(heavy)
    assert rep.mass == pytest.approx(1.2)
    assert not rep.mass_ok and not rep.passed
    moved = dataclasses.replace(atom, cells=atom.cells + np.array([9, 0]))
    assert not verify_atom(moved).support_ok


def test_interior_cube_faces_on_boundary_only():
    mask = np.ones((8, 8), bool)
    U = CellSet.from_array(mask)
    Q = DyadicCube(1, (1, 2))
    for l, (cells, signs) in enumerate(cube_faces(U, Q)):
        lo, hi = Q.cell_bounds()
        # lower cells sit just below the cube or on its top layer along l
        assert set(cells[:, l].tolist()) == {int(lo[l]) - 1, int(hi[l]) - 1}
        assert signs.sum() == 0


masks = arrays(bool, st.tuples(st.integers(2, 12), st.integers(2, 12)))


@given(masks, st.floats(1.0, 4.0))
def test_reassembly_is_exact(mask, cprime):
    if not mask.any():
        return
    U = CellSet.from_array(mask)
    res = box_set(U)
    dense = None
    for cube, mass in zip(res.cubes, res.boundary_mass):
        lam, atoms = atoms_for_cube(U, cube, cprime, float(mass))
        for a in atoms:
            part = a.measure().scaled(lam)
            dense = part if dense is None else dense + part
    ref = indicator_measure(U)
    diff = dense - ref
    assert total_variation(diff) <= 1e-12 * total_variation(ref)


@given(masks)
def test_atoms_have_zero_mass_and_bounded_variation(mask):
    if not mask.any():
        return
    U = CellSet.from_array(mask)
    res = box_set(U)
    cp = choose_cprime(res.constant, 2)
    for cube, mass in zip(res.cubes, res.boundary_mass):
        _, atoms = atoms_for_cube(U, cube, cp, float(mass))
        side = cube.side(1.0)
        for a in atoms:
            w = a.weights
            assert abs(math.fsum(w)) <= 1e-14 * math.fsum(np.abs(w))
            # per-component product-rule bound: set faces in the closed cube plus two cut faces of the cube
            assert a.mass() <= (mass + 2 * side) / (cp * mass) * (1 + 1e-12)


def test_heat_homogeneity_under_doubled_spacing():
    for d in (2, 3):
        _, a1 = single_cell_atom(2.0, 0, 1.0, d)
        _, a2 = single_cell_atom(2.0, 0, 2.0, d)
        r1, r2 = verify_atom(a1), verify_atom(a2)
        assert np.allclose(a1.weights, a2.weights, rtol=1e-15)
        assert r2.heat_sup == pytest.approx(r1.heat_sup * 2.0 ** (1 - d), rel=1e-12)
        assert r2.heat_budget == pytest.approx(r1.heat_budget * 2.0 ** (1 - d), rel=1e-15)
        assert r1.passed == r2.passed


def test_translation_shares_cached_result():
    mask = np.zeros((16, 16), bool)
    mask[1, 1] = mask[9, 13] = True
    U = CellSet.from_array(mask)
    res = box_set(U)
    reps = [verify_atom(atoms_for_cube(U, c, 2.0)[1][0]) for c in res.cubes]
    assert reps[0].heat_sup == reps[1].heat_sup
    assert reps[0].heat_argmax != reps[1].heat_argmax


def test_rejects_empty_cube():
    mask = np.zeros((8, 8), bool)
    mask[0, 0] = True
    with pytest.raises(ValueError):
        atoms_for_cube(CellSet.from_array(mask), DyadicCube(1, (3, 3)), 2.0)


def test_report_serializes():
    _, atom = single_cell_atom()
    d = verify_atom(atom, refine=True).to_dict()
    assert d["passed"] is True
    assert set(d) >= {"support_ok", "cancellation_ok", "mass_ok", "heat_ok", "heat_margin", "refine_change"}
