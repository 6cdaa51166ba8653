import cmath
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import inv_stereo, random_conjugator, stereo
from kere.errors import ConfigError, NoLift, NonIntegerHolonomy, SurfaceMismatch
from kere.metric_space import Surface, SurfacePoint, reduce_coords, surface_distance
from kere.surface_maps import (MobiusMap, annulus_reversing, annulus_rotation, compose, conjugate,
                               elliptic_rotation, forward, fractional_reflection, homology_matrix_of,
                               identity, inverse, jacobian_determinant, klein_phi, klein_psi,
                               klein_warp, map_from_dict, mobius, mobius_strip_rotation, polar_warp,
                               power, rotation_profile, torus_affine, torus_reversing_type1,
                               torus_reversing_type2, torus_shear, torus_translation)


def sphere_pts(rng, n):
    X = rng.normal(size=(n, 3))
    return X / np.linalg.norm(X, axis=1, keepdims=True)


def mobius_oracle(M, X, reflect=False):
    """Evaluate through complex arithmetic on each point."""
    (a, b), (c, d) = M
    out = []
    for p in X:
        z = inv_stereo(p)
        if reflect and z != complex("inf"):
            z = z.conjugate()
        if z == complex("inf"):
            w = complex("inf") if abs(c) < 1e-300 else a / c
        elif abs(c * z + d) < 1e-300:
            w = complex("inf")
        else:
            w = (a * z + b) / (c * z + d)
        out.append(stereo(w))
    return np.array(out)


def test_mobius_examples():
    f = mobius(2, 0, 0, 1)
    z0 = np.array([[0.0, 0.0, -1.0]])
    inf = np.array([[0.0, 0.0, 1.0]])
    assert np.allclose(f.forward_array(z0), z0)
    assert np.allclose(f.forward_array(inf), inf)
    one = stereo(1 + 0j)[None]
    assert np.allclose(f.forward_array(one), stereo(2 + 0j)[None], atol=1e-14)
    g = mobius(0, 1, 1, 0)  # 1/z swaps 0 and infinity
    assert np.allclose(g.forward_array(z0), inf, atol=1e-14)


def test_mobius_matches_complex_oracle(rng):
    X = sphere_pts(rng, 200)
    for _ in range(10):
        M = random_conjugator(rng, 3.0) @ np.diag([cmath.exp(0.3j), 1]) @ np.eye(2)
        f = mobius(*M.ravel())
        assert np.max(np.abs(f.forward_array(X) - mobius_oracle(M, X))) < 1e-10
        r = fractional_reflection(*M.ravel())
        assert np.max(np.abs(r.forward_array(X) - mobius_oracle(M, X, reflect=True))) < 1e-10


def test_lorentz_matches_homogeneous_reference(rng):
    X = sphere_pts(rng, 100)
    M = random_conjugator(rng)
    f = MobiusMap(*M.ravel())
    ref = f._apply(f.matrix, X, False, False)
    assert np.max(np.abs(f.forward_array(X) - ref)) < 1e-12


@pytest.mark.parametrize("f", [
    mobius(1 + 1j, 2, 0.5j, 1), fractional_reflection(0, 1, 1, 0), elliptic_rotation(0.3),
    rotation_profile((0, 1, 2), (0, 1, 3)), polar_warp(0.3),
])
def test_sphere_round_trip(f, rng):
    X = sphere_pts(rng, 500)
    assert np.max(np.abs(f.inverse_array(f.forward_array(X)) - X)) < 1e-9
    assert np.max(np.abs(f.forward_array(f.inverse_array(X)) - X)) < 1e-9


@pytest.mark.parametrize("f", [
    torus_translation(0.3, 0.7), torus_reversing_type1(0.2), torus_reversing_type2(0.1),
    torus_affine([[2, 1], [1, 1]], (0.1, 0.0)), torus_shear(0.1, 0.08),
    klein_phi(0.3), klein_psi(0.2), klein_warp(0.04, 0.05),
    annulus_rotation(0.4), annulus_reversing(0.4), mobius_strip_rotation(0.4),
])
def test_quotient_round_trip(f, rng):
    X = rng.random((500, 2))
    if f.surface in (Surface.ANNULUS, Surface.MOBIUS):
        X[:, 0] = 2 * X[:, 0] - 1
    X = reduce_coords(f.surface, X)
    back = f.inverse_array(f.forward_array(X))
    worst = max(surface_distance(SurfacePoint.from_array(f.surface, a),
                                 SurfacePoint.from_array(f.surface, b)) for a, b in zip(X, back))
    assert worst < 1e-9


def test_point_level_and_mismatch():
    f = torus_translation(0.25, 0.5)
    x = SurfacePoint(Surface.TORUS, (0.9, 0.9))
    y = forward(f, x)
    assert y.coords == pytest.approx((0.15, 0.4))
    assert inverse(f, y).coords == pytest.approx((0.9, 0.9))
    with pytest.raises(SurfaceMismatch):
        forward(f, SurfacePoint(Surface.SPHERE, (0, 0, 1)))


def test_jacobian_orientation(rng):
    X = sphere_pts(rng, 20)
    assert np.all(jacobian_determinant(mobius(1, 2j, 0.3, 1), X) > 0)
    assert np.all(jacobian_determinant(fractional_reflection(1, 2j, 0.3, 1), X) < 0)
    T = rng.random((20, 2))
    assert np.allclose(jacobian_determinant(torus_reversing_type2(0.1), T), -1)
    assert np.allclose(jacobian_determinant(torus_shear(0.05, 0.05), T), 1, atol=1e-6)


def test_lift_equivariance(rng):
    X = rng.random((50, 2))
    for f in (torus_shear(0.1, 0.1), torus_affine([[2, 1], [1, 1]], (0.3, 0.1))):
        A = homology_matrix_of(f)
        for v in ([1, 0], [0, 1], [2, -3]):
            assert np.allclose(f.lift_array(X + v), f.lift_array(X) + A @ np.array(v), atol=1e-12)


def test_homology_matrices():
    assert np.array_equal(homology_matrix_of(torus_translation(0.1, 0.2)), np.eye(2))
    assert np.array_equal(homology_matrix_of(torus_reversing_type1(0.1)), [[-1, 0], [0, 1]])
    assert np.array_equal(homology_matrix_of(torus_reversing_type2(0.1)), [[-1, 0], [1, 1]])
    assert np.array_equal(homology_matrix_of(torus_affine([[2, 1], [1, 1]])), [[2, 1], [1, 1]])
    with pytest.raises(NoLift):
        homology_matrix_of(mobius(2, 0, 0, 1))


def test_klein_lifts_commute_with_deck(rng):
    X = rng.random((200, 2))

    def deck(Y):
        return np.column_stack([-Y[:, 0], Y[:, 1] + 0.5])

    for f in (klein_phi(0.3), klein_psi(0.3), klein_warp(0.04, 0.05)):
        # equal up to a lattice translation
        D = f.lift_array(deck(X)) - deck(f.lift_array(X))
        assert np.allclose(D, np.round(D), atol=1e-12)


def test_psi_squared_is_phi(rng):
    alpha = 0.137
    X = reduce_coords(Surface.KLEIN, rng.random((400, 2)))
    a = power(klein_psi(alpha), 2).forward_array(X)
    b = klein_phi(2 * alpha).forward_array(X)
    assert np.max(np.abs(a - b)) < 1e-9


def test_algebra(rng):
    X = sphere_pts(rng, 100)
    f, g = mobius(2, 1, 0, 1), elliptic_rotation(0.2)
    assert np.allclose(compose(f, g).forward_array(X), f.forward_array(g.forward_array(X)))
    c = conjugate(f, g)
    assert np.allclose(c.forward_array(X), g.forward_array(f.forward_array(g.inverse_array(X))))
    assert np.allclose(power(f, 3).forward_array(X), mobius(8, 7, 0, 1).forward_array(X))
    assert np.allclose(identity(Surface.SPHERE).forward_array(X), X)
    assert np.allclose(power(f, -1).forward_array(f.forward_array(X)), X)


def test_config_errors():
    with pytest.raises(ConfigError):
        mobius(1, 1, 1, 1)
    with pytest.raises(ConfigError):
        torus_affine([[2, 0], [0, 1]])
    with pytest.raises(ConfigError):
        polar_warp(1.5)
    with pytest.raises(ConfigError):
        map_from_dict({"kind": "nope"})
    with pytest.raises(ConfigError):
        map_from_dict({"surface": "Torus", "kind": "mobius", "params": {"a": 1, "b": 0, "c": 0, "d": 1}})


@pytest.mark.parametrize("f", [
    mobius(1 + 1j, 2, 0.5j, 1), fractional_reflection(0, 1, 1, 0), rotation_profile((0, 1), (0, 2)),
    torus_affine([[2, 1], [1, 1]], (0.1, 0.2)), klein_psi(0.3), annulus_reversing(0.2),
    conjugate(elliptic_rotation(0.1), polar_warp(0.1)),
])
def test_json_round_trip(f, rng):
    doc = json.loads(json.dumps(f.to_dict()))
    g = map_from_dict(doc)
    if f.surface is Surface.SPHERE:
        X = sphere_pts(rng, 50)
    else:
        X = reduce_coords(f.surface, rng.random((50, 2)))
    assert np.allclose(f.forward_array(X), g.forward_array(X), atol=1e-12)


def test_non_integer_holonomy():
    from kere.surface_maps import LiftMap

    class Bad(LiftMap):
        def __init__(self):
            super().__init__(Surface.TORUS, "bad")

        def _lift(self, X):
            return 1.5 * X

    with pytest.raises(NonIntegerHolonomy):
        homology_matrix_of(Bad())


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.99, 0.99), st.integers(0, 2 ** 31))
def test_polar_warp_is_bijective(amp, seed):
    f = polar_warp(amp)
    X = sphere_pts(np.random.default_rng(seed), 64)
    assert np.max(np.abs(f.inverse_array(f.forward_array(X)) - X)) < 1e-8


def test_mobius_fixed_points_closed_form():
    f = mobius(2, 1, 0, 1)  # z -> 2z + 1: fixed at -1 and infinity
    P = f.fixed_points()
    want = [stereo(-1 + 0j), stereo(complex("inf"))]
    assert all(min(np.linalg.norm(p - w) for p in P) < 1e-12 for w in want)
    assert np.allclose(f.forward_array(P), P, atol=1e-12)
