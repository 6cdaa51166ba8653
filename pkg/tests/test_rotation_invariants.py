import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kere.errors import NonTrivialHomology, NotDegreeOne
from kere.rotation_invariants import (CircleMap, rotation_number, rotation_vector, smooth_weights,
                                      translation_vector, vector_is_zero_iff_fixed_point_check,
                                      weighted_average)
from kere.surface_maps import (compose, conjugate, torus_reversing_type1, torus_shear,
                               torus_translation)

GOLD = (math.sqrt(5) - 1) / 2


def circle_dist(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1 - d)


def conjugated_rotation(alpha, a=0.05):
    """h R_alpha h^-1 with h(x) = x + a sin 2 pi x; its rotation number is exactly alpha."""
    def h(x):
        return x + a * np.sin(2 * np.pi * x)

    def h_inv(y):
        x = np.array(y, dtype=float)
        for _ in range(8):  # Newton: quadratic, at rounding level after ~5 steps
            x = x - (h(x) - y) / (1 + 2 * np.pi * a * np.cos(2 * np.pi * x))
        return x

    return CircleMap(lambda x: h(h_inv(x) + alpha))


def arnold(omega, K):
    return CircleMap(lambda x: x + omega + K / (2 * np.pi) * np.sin(2 * np.pi * x))


def iterate_lift(c, n):
    def F(x):
        for _ in range(n):
            x = c.lift(x)
        return x
    return CircleMap(F)


def test_weights():
    w = smooth_weights(100)
    assert w.sum() == pytest.approx(1.0)
    assert np.all(w > 0)
    assert weighted_average(np.full((50, 2), 3.0)) == pytest.approx([3.0, 3.0])


@pytest.mark.parametrize("alpha", [0.0, 0.25, GOLD, 0.9])
def test_rigid_rotation(alpha):
    r = rotation_number(CircleMap.rigid(alpha), horizon=1000)
    assert circle_dist(r.value, alpha) <= r.error_bound


@pytest.mark.parametrize("alpha", [GOLD, 0.1, math.sqrt(2) - 1])
def test_conjugate_rotation_number_is_invariant(alpha):
    c = conjugated_rotation(alpha)
    r = rotation_number(c, 0.3, horizon=2000)
    assert circle_dist(r.value, alpha) <= 2.0 / 2000
    rw = rotation_number(c, 0.3, horizon=2000, weighted=True)
    assert circle_dist(rw.value, alpha) <= 1e-9


def test_arnold_tongue_zero():
    # omega = 0 has fixed points at the integers, so rho = 0
    assert circle_dist(rotation_number(arnold(0.0, 0.8), 0.37, horizon=1000).value, 0.0) < 2e-3


@settings(max_examples=15, deadline=None)
@given(st.floats(0.0, 1.0), st.floats(0.0, 0.9))
def test_power_rule(omega, K):
    c = arnold(omega, K)
    h = 3000
    r1 = rotation_number(c, 0.0, horizon=h).value
    r3 = rotation_number(iterate_lift(c, 3), 0.0, horizon=h).value
    assert circle_dist(r3, 3 * r1) <= 3 * 2.0 / h + 1e-12


def test_not_degree_one():
    with pytest.raises(NotDegreeOne):
        rotation_number(CircleMap(lambda x: 2 * x), horizon=100)
    with pytest.raises(NotDegreeOne):
        rotation_number(CircleMap(lambda x: x + 0.3 * np.sin(2 * np.pi * x)), horizon=100)
    with pytest.raises(ValueError):
        rotation_number(CircleMap.rigid(0.1), horizon=10)


def test_translation_vector_of_translation():
    tv = translation_vector(torus_translation(0.3, GOLD), horizon=500)
    assert np.allclose(tv.value, [0.3, GOLD], atol=1e-12)
    assert tv.spread <= tv.bound


def test_translation_vector_conjugacy_invariant():
    v = np.array([GOLD, math.sqrt(2) - 1])
    f = conjugate(torus_translation(*v), torus_shear(0.05, 0.04))
    tv = translation_vector(f, horizon=2000)
    assert np.linalg.norm(tv.value - v) <= tv.bound
    assert tv.spread <= tv.bound
    tw = translation_vector(f, horizon=2000, weighted=True)
    assert np.linalg.norm(tw.value - v) < 1e-8


def test_translation_vector_additive_for_commuting_maps():
    v, w = np.array([0.2, 0.3]), np.array([GOLD, 0.05])
    a = translation_vector(compose(torus_translation(*v), torus_translation(*w)), horizon=300).value
    assert np.allclose(a, v + w, atol=1e-12)
    shifted = translation_vector(torus_translation(*v), horizon=300, shift=(1, -2)).value
    assert np.allclose(shifted, v + [1, -2], atol=1e-12)
    assert np.allclose(rotation_vector(torus_translation(1.2, -0.3), horizon=300), [0.2, 0.7])


def test_nontrivial_homology():
    with pytest.raises(NonTrivialHomology):
        translation_vector(torus_reversing_type1(0.1))


def test_fixed_point_cross_check():
    assert vector_is_zero_iff_fixed_point_check(torus_shear(0.05, 0.05), horizon=500).agree
    chk = vector_is_zero_iff_fixed_point_check(torus_translation(0.3, 0.1), horizon=500)
    assert chk.agree and not chk.has_fixed_point
