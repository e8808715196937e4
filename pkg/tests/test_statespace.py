"""Model builders and structural rank checks.

The numeric oracles are hand arithmetic on the reference constants
(r_t = 0.2, l_t = 1.8e-3, c_t = 2.2e-3, line 0.05 Ohm): each frozen decimal
below was computed as the corresponding quotient, independent of the code
under test.
"""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mgpnp import (DguParams, GridGraph, InputError, LineParams,
                   assemble_full_line_model, assemble_qsl_overall,
                   augment_with_integrator, build_augmented_dgu,
                   build_coupling, build_line_subsystem, build_local_dgu,
                   check_local_controllability, check_rank_gamma)

P1 = DguParams(r_t=0.2, l_t=1.8e-3, c_t=2.2e-3, v_dc=100.0, load_r=10.0)
LINE = LineParams(r=0.05, l=2.1e-6)


def test_local_model_frozen_entries():
    m = build_local_dgu(P1, [LINE])
    assert m.a[0, 0] == pytest.approx(-9090.90909090909, rel=1e-14)
    assert m.a[0, 1] == pytest.approx(454.5454545454545, rel=1e-14)
    assert m.a[1, 0] == pytest.approx(-555.5555555555555, rel=1e-14)
    assert m.a[1, 1] == pytest.approx(-111.11111111111111, rel=1e-14)
    assert m.b[0, 0] == 0.0
    assert m.b[1, 0] == pytest.approx(555.5555555555555, rel=1e-14)
    assert np.array_equal(m.c, np.eye(2))
    assert m.m_dist[0, 0] == pytest.approx(-454.5454545454545, rel=1e-14)
    assert m.m_dist[1, 0] == 0.0
    assert np.array_equal(m.h, [[1.0, 0.0]])
    assert m.state_labels == ("V", "I_t")


def test_local_model_isolated_and_multi_line():
    iso = build_local_dgu(P1, [])
    assert iso.a[0, 0] == 0.0
    two = build_local_dgu(P1, [LINE, LineParams(r=0.07, l=1.8e-6)])
    expect = -(1.0 / (0.05 * 2.2e-3) + 1.0 / (0.07 * 2.2e-3))
    assert two.a[0, 0] == pytest.approx(expect, rel=1e-14)
    with pytest.raises(InputError):
        build_local_dgu(P1, [(0.05, 2.1e-6)])


def test_coupling_block():
    blk = build_coupling(LINE, P1.c_t)
    assert blk.shape == (2, 2)
    assert blk[0, 0] == pytest.approx(9090.90909090909, rel=1e-14)
    assert blk[0, 1] == blk[1, 0] == blk[1, 1] == 0.0
    with pytest.raises(InputError):
        build_coupling(LINE, 0.0)


def test_line_subsystem_frozen_entries():
    a_ll, a_li, a_lj = build_line_subsystem(LINE)
    assert a_ll == pytest.approx(-23809.523809523813, rel=1e-14)
    assert a_li[0, 0] == pytest.approx(-476190.4761904762, rel=1e-14)
    assert a_lj[0, 0] == pytest.approx(476190.4761904762, rel=1e-14)
    assert a_li[0, 1] == a_lj[0, 1] == 0.0


def test_augmentation_structure():
    local = build_local_dgu(P1, [LINE])
    aug = augment_with_integrator(local, {2: build_coupling(LINE, P1.c_t)})
    a = aug.aug.a
    assert np.array_equal(a[:2, :2], local.a)
    assert np.array_equal(a[2, :2], [-1.0, 0.0])     # integrates -V
    assert a[0, 2] == a[1, 2] == a[2, 2] == 0.0
    assert np.array_equal(aug.aug.b.ravel(), [0.0, local.b[1, 0], 0.0])
    # exogenous columns: load current, then the reference into the integrator
    assert np.array_equal(aug.aug.m_dist[:, 0], [local.m_dist[0, 0], 0.0, 0.0])
    assert np.array_equal(aug.aug.m_dist[:, 1], [0.0, 0.0, 1.0])
    assert aug.aug.state_labels == ("V", "I_t", "v")
    blk = aug.coupling[2]
    assert blk.shape == (3, 3)
    assert blk[0, 0] == pytest.approx(9090.90909090909, rel=1e-14)
    assert np.count_nonzero(blk) == 1


def test_augmented_recovers_constants():
    aug = build_augmented_dgu(
        GridGraph({1: P1, 2: P1}, {(1, 2): LINE}), 1)
    assert aug.l_t == pytest.approx(P1.l_t, rel=1e-14)
    assert aug.c_t == pytest.approx(P1.c_t, rel=1e-14)
    assert aug.r_t == pytest.approx(P1.r_t, rel=1e-14)
    assert aug.coupling_self_term == pytest.approx(9090.90909090909, rel=1e-14)
    assert set(aug.coupling) == {2}


def test_overall_qsl_block_layout(grid2):
    m = assemble_qsl_overall(grid2)
    assert m.a.shape == (4, 4)
    a1 = build_local_dgu(grid2.dgus[1], grid2.attached_lines(1))
    assert np.array_equal(m.a[:2, :2], a1.a)
    blk = build_coupling(grid2.line_between(1, 2), grid2.dgus[1].c_t)
    assert np.array_equal(m.a[:2, 2:], blk)
    assert m.state_labels == ("V_1", "It_1", "V_2", "It_2")
    assert m.input_labels == ("u_1", "u_2")
    with pytest.raises(InputError):
        assemble_qsl_overall(GridGraph({}, {}))


def test_full_line_model_is_block_triangular(grid2):
    m = assemble_full_line_model(grid2)
    assert m.a.shape == (6, 6)
    # line states read the voltages but feed nothing back
    assert np.all(m.a[:4, 4:] == 0.0)
    assert m.state_labels[4:] == ("I_1_2", "I_2_1")
    assert m.a[4, 4] == pytest.approx(-23809.523809523813, rel=1e-14)
    assert m.a[5, 5] == m.a[4, 4]
    # the two directed rows are each other's endpoint swap
    assert m.a[4, 0] == -m.a[5, 0] == pytest.approx(-476190.4761904762, rel=1e-14)


def test_rank_gamma_reference_grid(grid2, grid5):
    for g, n in ((grid2, 2), (grid5, 5)):
        rep = check_rank_gamma(assemble_qsl_overall(g))
        assert rep.ok and rep.rank == rep.expected == 3 * n
        assert len(rep.singular_values) == 3 * n
        assert rep.tolerance > 0


def test_local_controllability_reference(grid2):
    for i in grid2.dgu_ids():
        rep = check_local_controllability(build_augmented_dgu(grid2, i))
        assert rep.ok and rep.rank == 3 and rep.expected == 3


@settings(max_examples=40, deadline=None)
@given(
    r_t=st.floats(1e-3, 1e2),
    l_t=st.floats(1e-5, 1e-1),
    c_t=st.floats(1e-5, 1e-1),
    line_r=st.floats(1e-3, 1e1),
)
def test_controllability_holds_across_parameter_space(r_t, l_t, c_t, line_r):
    p = DguParams(r_t=r_t, l_t=l_t, c_t=c_t, v_dc=100.0)
    local = build_local_dgu(p, [LineParams(r=line_r, l=2.1e-6)])
    rep = check_local_controllability(augment_with_integrator(local))
    assert rep.ok


def test_model_immutability():
    m = build_local_dgu(P1, [LINE])
    with pytest.raises(ValueError):
        m.a[0, 0] = 5.0


def test_model_shape_validation():
    with pytest.raises(InputError):
        augment_with_integrator(assemble_qsl_overall(
            GridGraph({1: P1, 2: P1}, {(1, 2): LINE})))
