"""Rational-function algebra, loop transfer functions, and inversion designs.

The reference transfer function of the 3-state closed loop has a closed form
that only takes pencil and paper to derive: with output row picking V and the
reference entering through the integrator, the numerator collapses to the
constant k_i/(L_t C_t) and the DC gain is pinned at 1. The exact disturbance
compensator likewise reduces to L_t s + (R_t - k_c). Those are the oracles
here; everything else checks algebraic identities and refusal conditions.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mgpnp import (CompensatorDesign, InputError, RationalTf, Rejection,
                   build_augmented_dgu, closed_loop_reference_tf,
                   default_frequency_grid, design_disturbance_compensator,
                   design_prefilter, desired_tf_template, disturbance_tfs,
                   export_frequency_response_csv, export_spectrum_csv,
                   frequency_response, rational_equal, spectrum)


# --- RationalTf basics ---------------------------------------------------------


def test_normalization():
    f = RationalTf([0.0, 0.0, 2.0, 4.0], [0.0, 2.0, 2.0])
    assert np.array_equal(f.num, [1.0, 2.0])
    assert np.array_equal(f.den, [1.0, 1.0])  # monic
    z = RationalTf([0.0, 0.0], [3.0])
    assert z.is_zero and np.array_equal(z.num, [0.0])


def test_normalization_rejections():
    with pytest.raises(InputError):
        RationalTf([1.0], [0.0, 0.0])
    with pytest.raises(InputError):
        RationalTf([np.inf], [1.0])
    with pytest.raises(InputError):
        RationalTf([1.0], [np.nan, 1.0])


def test_degrees_and_properness():
    f = RationalTf([1.0, 0.0], [1.0, 2.0, 1.0])  # s/(s+1)^2
    assert f.deg_num == 1 and f.deg_den == 2 and f.relative_degree == 1
    assert f.is_proper
    assert not RationalTf([1.0, 0.0, 0.0], [1.0, 1.0]).is_proper
    assert RationalTf([0.0], [1.0, 1.0]).is_proper  # zero counts as proper


def test_dc_gain():
    assert RationalTf([3.0], [1.0, 6.0]).dc_gain() == 0.5
    assert RationalTf([1.0], [1.0, 0.0]).dc_gain() == np.inf  # integrator
    assert np.isnan(RationalTf([1.0, 0.0], [1.0, 0.0]).dc_gain())


def test_evaluate_and_roots():
    f = RationalTf([1.0], [1.0, 1.0])
    assert f.evaluate(0.0) == pytest.approx(1.0)
    assert abs(f.evaluate(1j)) == pytest.approx(2 ** -0.5)
    assert f.evaluate(-1.0) == np.inf  # pole
    g = RationalTf([1.0, -2.0], [1.0, 3.0, 2.0])
    assert sorted(g.poles().real) == pytest.approx([-2.0, -1.0])
    assert g.zeros() == pytest.approx([2.0])


def test_algebra_and_cancel():
    f = RationalTf([1.0], [1.0, 1.0])
    g = RationalTf([1.0, 1.0], [1.0, 2.0])
    prod = (f * g).cancel()
    assert rational_equal(prod, RationalTf([1.0], [1.0, 2.0]))
    assert (f - f).cancel().is_zero
    assert rational_equal(f + 1.0, RationalTf([1.0, 2.0], [1.0, 1.0]))
    assert rational_equal(2.0 * f, RationalTf([2.0], [1.0, 1.0]))
    with pytest.raises(InputError):
        f / RationalTf([0.0], [1.0])
    with pytest.raises(InputError):
        f * "nope"


def test_rational_equal_is_scale_invariant():
    f = RationalTf([2.0], [1.0, 2.0])
    g = RationalTf([2e6], [1e6, 2e6])
    assert rational_equal(f, g)
    assert not rational_equal(f, RationalTf([2.0], [1.0, 2.0001]))


coef = st.floats(min_value=-100, max_value=100,
                 allow_nan=False, allow_infinity=False)


@settings(max_examples=60, deadline=None)
@given(a=st.lists(coef, min_size=1, max_size=3),
       b=st.lists(coef, min_size=1, max_size=3))
def test_multiplication_commutes(a, b):
    f = RationalTf(a, [1.0, 1.0])
    g = RationalTf(b, [1.0, 2.0])
    assert rational_equal(f * g, g * f, rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(a=st.lists(coef, min_size=1, max_size=4))
def test_self_difference_is_zero(a):
    f = RationalTf(a, [1.0, 3.0, 1.0])
    d = f - f
    assert d.is_zero or np.max(np.abs(d.num)) == 0.0


# --- loop transfer functions ----------------------------------------------------


@pytest.fixture(scope="module")
def loop(grid2, gains2):
    aug = build_augmented_dgu(grid2, 1)
    return aug, gains2[1]


def test_reference_tf_closed_form(loop):
    aug, g = loop
    f = closed_loop_reference_tf(aug, g)
    assert f.relative_degree == 3
    assert f.deg_num == 0  # numerator is the single constant k_i/(L C)
    assert f.num[0] == pytest.approx(g.k_i / (aug.l_t * aug.c_t), rel=1e-9)
    assert f.dc_gain() == pytest.approx(1.0, rel=1e-12)
    assert np.max(f.poles().real) < 0


def test_disturbance_tf_pair(loop):
    aug, g = loop
    g_d, g_u = disturbance_tfs(aug, g)
    # integral action zeroes the load current's DC influence
    assert g_d.dc_gain() == pytest.approx(0.0, abs=1e-12)
    assert g_u.dc_gain() == pytest.approx(0.0, abs=1e-12)
    assert np.max(g_d.poles().real) < 0
    # both paths share the loop poles
    assert np.allclose(np.sort_complex(g_d.poles()), np.sort_complex(g_u.poles()))


def test_template_is_unit_dc_butterworth():
    for order in (1, 2, 3):
        t = desired_tf_template(50.0, order=order)
        assert t.dc_gain() == pytest.approx(1.0, rel=1e-12)
        assert t.relative_degree == order
        assert abs(t.evaluate(2j * np.pi * 50.0)) == pytest.approx(2 ** -0.5, rel=1e-9)
    with pytest.raises(InputError):
        desired_tf_template(-1.0)
    with pytest.raises(InputError):
        desired_tf_template(50.0, order=0)


def test_prefilter_exact_identity(loop):
    aug, g = loop
    f = closed_loop_reference_tf(aug, g)
    f_tilde = desired_tf_template(100.0, order=max(f.relative_degree, 1))
    c = design_prefilter(f, f_tilde)
    assert isinstance(c, RationalTf)
    assert c.is_proper and c.deg_num == c.deg_den  # biproper
    assert rational_equal((c * f).cancel(), f_tilde, rtol=1e-9)
    assert np.max(c.poles().real) < 0


def test_prefilter_rejects_low_order_template(loop):
    aug, g = loop
    f = closed_loop_reference_tf(aug, g)
    r = design_prefilter(f, desired_tf_template(100.0, order=1))
    assert isinstance(r, Rejection)
    assert r.reason == "improper" and r.degree_deficit == 2


def test_prefilter_rejects_rhp_zero():
    f = RationalTf([1.0, -1.0], [1.0, 2.0, 1.0])  # zero at +1
    r = design_prefilter(f, desired_tf_template(10.0, order=1))
    assert isinstance(r, Rejection)
    assert r.reason == "rhp_zero"
    assert r.offending_root == pytest.approx(1.0)


def test_prefilter_requires_stable_inputs():
    unstable = RationalTf([1.0], [1.0, -1.0])
    with pytest.raises(InputError, match="stable"):
        design_prefilter(unstable, desired_tf_template(10.0))
    with pytest.raises(InputError, match="template"):
        design_prefilter(RationalTf([1.0], [1.0, 1.0]),
                         RationalTf([1.0], [1.0, -1.0]))


def test_compensator_closed_form(loop):
    aug, g = loop
    g_d, g_u = disturbance_tfs(aug, g)
    d = design_disturbance_compensator(g_d, g_u)
    assert isinstance(d, CompensatorDesign) and not d.approximate
    expected = RationalTf([aug.l_t, aug.r_t - g.k_c], [1.0])
    assert rational_equal(d.tf, expected, rtol=1e-6)
    # the whole point: combined feedthrough is identically zero
    assert rational_equal((g_u * d.tf).cancel(), -g_d, rtol=1e-9)


def test_compensator_proper_fallback(loop):
    aug, g = loop
    g_d, g_u = disturbance_tfs(aug, g)
    d = design_disturbance_compensator(g_d, g_u, require_proper=True,
                                       fallback_bandwidth_hz=100.0)
    assert isinstance(d, CompensatorDesign) and d.approximate
    assert d.tf.is_proper
    assert d.fallback_bandwidth_hz == 100.0
    exact = design_disturbance_compensator(g_d, g_u).tf
    assert d.tf.dc_gain() == pytest.approx(exact.dc_gain(), rel=1e-12)
    with pytest.raises(InputError):
        design_disturbance_compensator(g_d, g_u, require_proper=True,
                                       fallback_bandwidth_hz=0.0)


def test_compensator_edge_cases():
    zero = RationalTf([0.0], [1.0])
    pole2 = RationalTf([1.0], [1.0, 2.0, 1.0])
    d = design_disturbance_compensator(zero, pole2)
    assert isinstance(d, CompensatorDesign) and d.tf.is_zero
    with pytest.raises(InputError, match="zero control path"):
        design_disturbance_compensator(pole2, zero)


def test_compensator_deficit_two():
    g_u = RationalTf([1.0], [1.0, 3.0, 3.0, 1.0])  # 1/(s+1)^3
    g_d = RationalTf([-1.0], [1.0, 1.0])
    r = design_disturbance_compensator(g_d, g_u)
    assert isinstance(r, Rejection)
    assert r.reason == "improper" and r.degree_deficit == 2
    d = design_disturbance_compensator(g_d, g_u, require_proper=True,
                                       fallback_bandwidth_hz=50.0)
    assert isinstance(d, CompensatorDesign) and d.tf.is_proper and d.approximate


def test_compensator_rejects_rhp_pole():
    g_u = RationalTf([1.0, -3.0], [1.0, 2.0, 1.0])
    g_d = RationalTf([1.0], [1.0, 2.0, 1.0])
    r = design_disturbance_compensator(g_d, g_u)
    assert isinstance(r, Rejection) and r.reason == "rhp_zero"
    assert r.offending_root == pytest.approx(3.0)


# --- spectra and frequency responses ---------------------------------------------


def test_spectrum_known_matrix():
    a = np.array([[0.0, 1.0], [-2.0, -3.0]])
    w = spectrum(a)
    assert w == pytest.approx([-2.0, -1.0])  # sorted by real part
    assert np.all(np.diff(w.real) >= 0)
    with pytest.raises(InputError):
        spectrum(np.zeros((2, 3)))
    assert spectrum(np.zeros((0, 0))).size == 0


def test_frequency_response_scalar():
    f = RationalTf([1.0], [1.0, 1.0])
    corner = 1.0 / (2.0 * math.pi)
    fr = frequency_response(f, [corner / 10, corner, corner * 10])
    assert fr.kind == "bode-magnitude"
    assert fr.magnitudes()[1] == pytest.approx(2 ** -0.5, rel=1e-12)
    with pytest.raises(InputError):
        frequency_response(f, [1.0, 0.5])  # not increasing
    with pytest.raises(InputError):
        frequency_response(f, [])


def test_frequency_response_state_space_matches_scalar():
    a = np.array([[-1.0]])
    b = np.array([[1.0]])
    c = np.array([[1.0]])
    freqs = default_frequency_grid(0.01, 100.0, 50)
    sv = frequency_response((a, b, c), freqs)
    assert sv.kind == "singular-values"
    scal = frequency_response(RationalTf([1.0], [1.0, 1.0]), freqs)
    assert np.allclose(sv.magnitudes().ravel(), scal.magnitudes(), rtol=1e-10)


def test_default_frequency_grid_validation():
    g = default_frequency_grid()
    assert g[0] == pytest.approx(0.1) and g[-1] == pytest.approx(1e5)
    assert np.all(np.diff(g) > 0)
    with pytest.raises(InputError):
        default_frequency_grid(10.0, 1.0)
    with pytest.raises(InputError):
        default_frequency_grid(points=1)


def test_csv_exports_round_trip(tmp_path):
    eigs = np.array([-1.0 + 2.0j, -3.0 - 4.0j])
    p = tmp_path / "spec.csv"
    export_spectrum_csv(eigs, p)
    back = np.loadtxt(p, delimiter=",", skiprows=1)
    assert np.array_equal(back, [[-1.0, 2.0], [-3.0, -4.0]])

    fr = frequency_response(RationalTf([1.0], [1.0, 1.0]), [0.1, 1.0, 10.0])
    q = tmp_path / "freq.csv"
    export_frequency_response_csv(fr, q)
    data = np.loadtxt(q, delimiter=",", skiprows=1)
    assert data.shape == (3, 2)
    assert np.array_equal(data[:, 0], [0.1, 1.0, 10.0])
    assert data[:, 1] == pytest.approx(fr.magnitudes(), rel=1e-15)
