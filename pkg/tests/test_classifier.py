import math

import numpy as np
import pytest

from kere.classifier import (T1, T2, DoubledMap, canonical_parameter, classify, classify_torus,
                             find_conjugator)
from kere.cli import builtin_gallery
from kere.surface_maps import (annulus_reversing, annulus_rotation, annulus_warp, conjugate,
                               elliptic_rotation, fractional_reflection, jacobian_determinant,
                               klein_phi, klein_psi, klein_warp, map_from_dict, mobius,
                               mobius_strip_rotation, polar_warp, power, torus_affine,
                               torus_reversing_type1, torus_reversing_type2, torus_shear,
                               torus_translation)

A1 = math.sqrt(2) - 1


def circle_dist(a, b):
    d = abs(a - b) % 1.0
    return min(d, 1 - d)


@pytest.mark.parametrize("name,doc,expected", builtin_gallery(), ids=[g[0] for g in builtin_gallery()])
def test_gallery_self_classification(name, doc, expected):
    assert classify(map_from_dict(doc)).cls == expected


def test_parameters_of_normal_forms():
    r = classify(torus_translation(A1, 0.25 * A1))
    assert np.allclose(r.params["rho"], [A1, 0.25 * A1], atol=1e-6)
    assert classify(klein_psi(0.1234)).params["alpha"] == pytest.approx(0.1234, abs=1e-6)
    assert classify(annulus_rotation(0.1234)).params["alpha"] == pytest.approx(0.1234, abs=1e-6)
    assert classify(mobius(1j, 0, 0, 1)).params == {"n": 4}
    theta = 0.1234
    semi = -complex(math.cos(2 * math.pi * theta), math.sin(2 * math.pi * theta))
    r = classify(fractional_reflection(0, semi, 1, 0))
    assert r.params["theta"] == pytest.approx(canonical_parameter("SemiElliptic", theta), abs=1e-3)


def test_canonical_parameter_folds():
    assert canonical_parameter("Elliptic", 0.8) == pytest.approx(0.2)
    assert canonical_parameter("TorusReversingType2", 0.7) == pytest.approx(0.2)
    assert canonical_parameter("TorusReversingType2", 0.4) == pytest.approx(0.1)
    assert canonical_parameter("TorusTranslation", [1.25, -0.25]) == [0.25, 0.75]


@pytest.mark.parametrize("model,warp", [
    (torus_translation(0.3141, 0.2718), torus_shear()),
    (torus_reversing_type1(0.1234), torus_shear()),
    (torus_reversing_type2(0.1234), torus_shear()),
    (klein_phi(0.123), klein_warp()),
    (klein_psi(0.2), klein_warp()),
    (annulus_rotation(0.123), annulus_warp()),
    (mobius_strip_rotation(0.123), annulus_warp(surface="Mobius")),
], ids=lambda m: m.kind)
def test_conjugacy_invariance(model, warp):
    a = classify(model)
    b = classify(conjugate(model, warp))
    assert a.cls == b.cls
    for k, v in a.params.items():
        assert np.allclose(np.atleast_1d(b.params[k]), np.atleast_1d(v), atol=1e-3)


def test_conjugacy_invariance_sphere():
    alpha = 0.2345
    b = classify(conjugate(elliptic_rotation(alpha), polar_warp(0.1)))
    assert b.cls == "Elliptic"
    assert b.params["alpha"] == pytest.approx(alpha, abs=1e-3)
    P = np.array([[1, 0.5j], [0.3, 1 + 0.15j]])
    Pi = np.linalg.inv(P)
    for M, cls in ((np.array([[2, 0], [0, 1]]), "Hyperbolic"), (np.array([[1, 1], [0, 1]]), "Parabolic")):
        C = P @ M @ Pi
        assert classify(mobius(*C.ravel())).cls == cls


@pytest.mark.parametrize("make", [torus_reversing_type1, torus_reversing_type2])
def test_square_of_reversing_is_translation(make):
    alpha = 0.1234
    r = classify_torus(power(make(alpha), 2))
    assert r.cls == "TorusTranslation"
    # both squares are (s, t) -> (s, t + 2 alpha)
    rho = r.params["rho"]
    assert circle_dist(rho[0], 0) < 1e-6 and circle_dist(rho[1], 2 * alpha) < 1e-6


def test_doubled_annulus_is_torus_translation():
    alpha = 0.1234
    r = classify_torus(DoubledMap(annulus_rotation(alpha)))
    assert r.cls == "TorusTranslation"
    assert circle_dist(r.params["rho"][0], 0) < 1e-6
    assert circle_dist(r.params["rho"][1], alpha) < 1e-6
    r = classify_torus(DoubledMap(annulus_reversing(alpha)))
    assert r.cls == "TorusReversingType1"


@pytest.mark.parametrize("f", [mobius(2, 1, 0, 1), fractional_reflection(2, 0, 0, 1),
                               torus_reversing_type1(0.1), klein_psi(0.1)], ids=lambda m: m.kind)
def test_orientation_matches_determinant(f):
    rng = np.random.default_rng(0)
    if f.surface.value == "Sphere":
        X = rng.normal(size=(10, 3))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
    else:
        X = rng.random((10, 2)) * [0.5, 1.0]
    det = jacobian_determinant(f, X)
    assert np.all(np.sign(det) == (1 if f.orientation == "Preserving" else -1))


def test_find_conjugator():
    for A in ([[-1, 0], [0, 1]], [[-1, 0], [1, 1]], [[1, 0], [0, -1]], [[0, 1], [1, 0]]):
        P, kind = find_conjugator(np.array(A))
        T = T1 if kind == 1 else T2
        assert np.array_equal(P @ np.array(A) @ np.round(np.linalg.inv(P)).astype(int), T)
    assert find_conjugator(np.array([[2, 1], [1, 1]])) == (None, None)


def test_anosov_is_not_regular():
    assert classify(torus_affine([[2, 1], [1, 1]], (0.1, 0.2))).cls == "NotRegular"

