from fractions import Fraction as F

import pytest

from minkowski_lab import jets
from minkowski_lab.hermite import hermite
from minkowski_lab.jets import Jet, jet_add, jet_exp, jet_mul, trace_power


def th(n, cap, i, j):
    return Jet.variable(n, cap, i, j)


def test_identity_and_truncation():
    p = th(2, 3, 0, 1) * 3 + th(2, 3, 1, 1) ** 2
    assert jet_mul(Jet.constant(2, 3), p) == p
    t = th(1, 1, 0, 0)
    assert (t * t).terms == {}


def test_difference_of_squares():
    t = th(1, 2, 0, 0)
    assert jet_mul(1 + t, 1 - t) == 1 - t * t


def test_add_mismatch_rejected():
    with pytest.raises(ValueError):
        jet_add(Jet.constant(1, 2), Jet.constant(2, 2))
    with pytest.raises(ValueError):
        jet_add(Jet.constant(1, 2), Jet.constant(1, 3))


def test_no_zero_coefficients_stored():
    t = th(2, 2, 0, 0)
    assert (t - t).terms == {}
    assert all(c != 0 for c in (t * 2 + 1).terms.values())


def test_exp():
    assert jet_exp(Jet(1, 3)) == Jet.constant(1, 3)
    t = th(1, 2, 0, 0)
    assert jet_exp(t) == 1 + t + t * t * F(1, 2)
    s = th(1, 4, 0, 0)
    assert jet_exp(trace_power(1, 2, 4)) == 1 + s**2 + s**4 * F(1, 2)
    with pytest.raises(ValueError):
        jet_exp(1 + t)


def test_trace_powers():
    a, b, c = th(2, 3, 0, 0), th(2, 3, 0, 1), th(2, 3, 1, 1)
    assert trace_power(2, 1, 3) == a + c
    assert trace_power(2, 2, 3) == a * a + b * b * 2 + c * c
    assert trace_power(1, 3, 3) == th(1, 3, 0, 0) ** 3


def test_det_operator_examples():
    # (x + d/dtheta) applied to exp(theta^2) at 0 gives x; likewise the -D form with gamma = 1
    body = jet_exp(trace_power(1, 2, 4))
    for x in (F(0), F(5, 3), F(-2)):
        assert jets.det_plus_apply(x, body) == x
        assert jets.det_diffop_apply(x, 1, body) == x
        assert jets.det_diffop_apply(x, F(3, 2), Jet.constant(1, 1)) == F(3, 2) * x
    two = jet_exp(trace_power(2, 2, 2))
    for x in jets.sample_points(2):
        assert jets.det_plus_apply(x, two) == x * x - 1


def test_cap_below_dimension_rejected():
    with pytest.raises(ValueError):
        jets.det_plus_apply(1, Jet.constant(3, 2))


def test_hermite_determinant_examples():
    assert jets.verify_lemma_a1(2, ())
    assert jets.verify_lemma_a1(2, (1,))
    assert jets.hermite_det_rhs(2, (1,), F(3)) == 6
    assert jets.verify_lemma_a1(3, (2, 1))
    assert jets.hermite_det_rhs(3, (2, 1), F(1, 3)) == -3


def test_deformed_kernel_examples():
    assert jets.verify_lemma_a2(2, 0, (1,))
    assert jets.verify_lemma_a2(2, F(3, 7), (1,))
    assert jets.verify_lemma_a2(3, F(-1, 5), (2,))


def test_hessian_determinant_examples():
    assert jets.verify_prop31(2, 1, 0, ())
    assert jets.verify_prop31(2, 3, 1, (1,))
    assert jets.verify_prop31(1, F(1, 2), 0, (1,))
    assert jets.hessian_det_rhs(1, F(1, 2), (1,), F(7)) == -1


def test_hessian_kernel_range_check():
    # beta = -1 makes alpha vanish
    with pytest.raises(ValueError):
        jets.verify_prop31(2, 1, -1, ())
    with pytest.raises(ValueError):
        jets.verify_prop31(2, 0, 0, ())


def test_loop_annihilation_examples():
    assert jets.verify_loop_annihilation(2, 1, 0, 2)
    assert jets.verify_loop_annihilation(3, 2, F(1, 3), 2, (1,))
    assert jets.verify_loop_annihilation(3, 1, 0, 3)
    with pytest.raises(ValueError):
        jets.verify_loop_annihilation(2, 1, 0, 1)


def test_loop_factor_is_not_trivially_zero():
    # the annihilation is a property of the functional, not of a vanishing polynomial
    assert jets.loop_polynomial(2, 2, 2).terms
    assert jets.loop_polynomial(3, 3, 3).terms


def test_wrong_identity_is_detected():
    # same left side, right side off by a sign: must fail, so the checks are not vacuous
    pts = jets.sample_points(2)
    assert not all(jets.hermite_det_lhs(2, (1,), x) == -jets.hermite_det_rhs(2, (1,), x) for x in pts)
    body = jets.hessian_kernel(2, 1, 0, 2)
    assert not all(jets.det_diffop_apply(x, 1, body) == 0 for x in pts)


def test_uses_enough_points():
    for n in (1, 2, 3, 4):
        pts = jets.sample_points(n)
        assert len(set(pts)) >= n + 1


def test_larger_cap_agrees():
    assert jets.verify_lemma_a1(2, (2,), degree_cap=6)
    assert jets.verify_prop31(2, 3, F(1, 3), (1, 1), degree_cap=7)


def test_cycle_multisets():
    ms = jets.cycle_multisets(4)
    assert len(ms) == 12
    assert () in ms and (4,) in ms and (1, 1, 1, 1) in ms
    assert len(set(ms)) == len(ms)


def test_hermite_exact_matches_float():
    for k in range(8):
        assert float(jets.hermite_exact(k, F(7, 5))) == pytest.approx(hermite(k, 1.4), rel=1e-13)


@pytest.mark.parametrize("n,x,target", [(1, 0.0, 0.0), (3, 1.0, -2.0), (2, 2.0, 3.0)])
def test_goe_examples(n, x, target):
    mean, se = jets.goe_hermite_mc(n, x, samples=100_000, seed=11)
    assert abs(mean - target) < 4 * se


def test_goe_deterministic():
    assert jets.goe_hermite_mc(2, 0.5, samples=1000, seed=3) == jets.goe_hermite_mc(2, 0.5, samples=1000, seed=3)
