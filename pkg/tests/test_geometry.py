import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from minkowski_lab.geometry import (
    LKVector,
    flag_coeff,
    lk_rectangle,
    mc_tube_volume,
    steiner_tube_volume,
    unit_ball_volume,
    unit_sphere_area,
)


def test_ball_and_sphere():
    assert unit_ball_volume(0) == 1.0
    assert unit_ball_volume(1) == pytest.approx(2.0)
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4 * math.pi / 3)
    assert unit_sphere_area(3) == pytest.approx(4 * math.pi)
    assert unit_sphere_area(2) == pytest.approx(2 * math.pi)
    for d in range(1, 8):
        # surface area is the radial derivative of the ball volume
        assert unit_sphere_area(d) == pytest.approx(d * unit_ball_volume(d))


def test_flag_coefficients():
    for k in range(5):
        assert flag_coeff(k, 0) == 1.0
        assert flag_coeff(0, k) == 1.0
    assert flag_coeff(1, 1) == pytest.approx(math.pi / 2)
    with pytest.raises(ValueError):
        flag_coeff(-1, 2)


def test_flag_coefficient_ball_form():
    # [k+d, k] = C(k+d, k) w_{k+d} / (w_k w_d)
    for k in range(4):
        for d in range(4):
            alt = math.comb(k + d, k) * unit_ball_volume(k + d) / (unit_ball_volume(k) * unit_ball_volume(d))
            assert flag_coeff(k, d) == pytest.approx(alt, rel=1e-13)


def test_lk_rectangle_examples():
    assert lk_rectangle([1, 1]).values == (1.0, 2.0, 1.0)
    assert lk_rectangle([2.5]).values == (1.0, 2.5)
    assert lk_rectangle([2, 3]).values == (1.0, 5.0, 6.0)
    assert lk_rectangle([1, 2, 3]).values == (1.0, 6.0, 11.0, 6.0)
    with pytest.raises(ValueError):
        lk_rectangle([1, 0])


@settings(max_examples=30, deadline=None)
@given(a=st.lists(st.floats(0.1, 4), min_size=1, max_size=2), b=st.lists(st.floats(0.1, 4), min_size=1, max_size=2))
def test_lk_product_rule(a, b):
    # generating polynomials multiply under Cartesian products
    pa, pb = np.array(lk_rectangle(a).values), np.array(lk_rectangle(b).values)
    np.testing.assert_allclose(lk_rectangle(a + b).values, np.convolve(pa, pb), rtol=1e-12)


def test_lkvector_validation():
    with pytest.raises(ValueError):
        LKVector(())
    with pytest.raises(ValueError):
        LKVector((1.0, -1.0))
    lk = LKVector((1, 2, 1))
    assert lk.n == 2 and len(lk) == 3 and list(lk) == [1.0, 2.0, 1.0]


def test_steiner_examples():
    sq = lk_rectangle([1, 1])
    assert steiner_tube_volume(sq, 0) == 1.0
    assert steiner_tube_volume(sq, 1) == pytest.approx(math.pi + 5)
    assert steiner_tube_volume(lk_rectangle([2]), 0.5) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        steiner_tube_volume(sq, -0.1)


@settings(max_examples=40, deadline=None)
@given(edges=st.lists(st.floats(0.1, 5), min_size=1, max_size=3), rho=st.floats(0, 3))
def test_steiner_monotone_and_volume_limit(edges, rho):
    lk = lk_rectangle(edges)
    assert steiner_tube_volume(lk, 0) == pytest.approx(math.prod(edges))
    assert steiner_tube_volume(lk, rho + 0.1) > steiner_tube_volume(lk, rho)


def test_mc_examples():
    assert mc_tube_volume([1, 1], 0.0, samples=1000) == (1.0, 0.0)
    est, se = mc_tube_volume([1, 1], 1.0, samples=1_000_000, seed=1)
    assert abs(est - (math.pi + 5)) < 4 * se
    est, se = mc_tube_volume([2], 0.25, samples=100_000, seed=2)
    assert se > 0
    assert abs(est - 2.5) < 4 * se


def test_mc_deterministic_and_validates():
    assert mc_tube_volume([1, 2], 0.3, samples=5000, seed=9) == mc_tube_volume([1, 2], 0.3, samples=5000, seed=9)
    with pytest.raises(ValueError):
        mc_tube_volume([1], 0.1, samples=10)
    with pytest.raises(ValueError):
        mc_tube_volume([1, -1], 0.1)
