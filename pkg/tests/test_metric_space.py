import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from kere.errors import EmptyInput, SurfaceMismatch
from kere.metric_space import (FiniteSet, SetSequence, Surface, SurfacePoint, hausdorff_distance,
                               is_epsilon_connected, liminf_sets, limsup_sets, surface_distance)


def torus_d(a, b):
    dx = abs(a[0] - b[0]) % 1.0
    dy = abs(a[1] - b[1]) % 1.0
    return math.hypot(min(dx, 1 - dx), min(dy, 1 - dy))


def brute_hausdorff(A: FiniteSet, B: FiniteSet) -> float:
    pa, pb = A.to_points(), B.to_points()
    ab = max(min(surface_distance(a, b) for b in pb) for a in pa)
    ba = max(min(surface_distance(a, b) for a in pa) for b in pb)
    return max(ab, ba)


def test_distance_examples():
    T = Surface.TORUS
    assert surface_distance(SurfacePoint(T, (0, 0)), SurfacePoint(T, (0, 0))) == 0
    assert surface_distance(SurfacePoint(T, (0.9, 0)), SurfacePoint(T, (0.1, 0))) == pytest.approx(0.2, abs=1e-12)
    n, s = SurfacePoint(Surface.SPHERE, (0, 0, 1)), SurfacePoint(Surface.SPHERE, (0, 0, -1))
    assert surface_distance(n, s) == pytest.approx(math.pi, abs=1e-12)


def test_mismatch_raises():
    with pytest.raises(SurfaceMismatch):
        surface_distance(SurfacePoint(Surface.TORUS, (0, 0)), SurfacePoint(Surface.KLEIN, (0, 0)))
    with pytest.raises(SurfaceMismatch):
        hausdorff_distance(FiniteSet(Surface.TORUS, [[0, 0]]), FiniteSet(Surface.ANNULUS, [[0, 0]]))


def test_point_invariants():
    p = SurfacePoint(Surface.TORUS, (1.25, -0.5))
    assert p.coords == (0.25, 0.5)
    with pytest.raises(ValueError):
        SurfacePoint(Surface.SPHERE, (1.0, 1.0, 0.0))


def test_klein_identification():
    # (s, t) ~ (-s, t + 1/2)
    a = SurfacePoint(Surface.KLEIN, (0.2, 0.1))
    b = SurfacePoint(Surface.KLEIN, (-0.2, 0.6))
    assert surface_distance(a, b) < 1e-12


def test_hausdorff_examples():
    T = Surface.TORUS
    A = FiniteSet(T, [[0, 0]])
    assert hausdorff_distance(A, A) == 0
    assert hausdorff_distance(A, FiniteSet(T, [[0.3, 0]])) == pytest.approx(0.3, abs=1e-12)


def test_hausdorff_matches_independent_torus_formula(rng):
    A = rng.random((50, 2))
    B = rng.random((50, 2))
    want = max(max(min(torus_d(a, b) for b in B) for a in A),
               max(min(torus_d(a, b) for a in A) for b in B))
    got = hausdorff_distance(FiniteSet(Surface.TORUS, A), FiniteSet(Surface.TORUS, B))
    assert got == pytest.approx(want, abs=1e-12)


@pytest.mark.parametrize("surface", list(Surface))
def test_hausdorff_exact_against_double_loop(surface, rng):
    def sample(n):
        if surface is Surface.SPHERE:
            X = rng.normal(size=(n, 3))
            return X / np.linalg.norm(X, axis=1, keepdims=True)
        X = rng.random((n, 2))
        if surface in (Surface.ANNULUS, Surface.MOBIUS):
            X[:, 0] = 2 * X[:, 0] - 1
        if surface is Surface.PLANE:
            X = 10 * X
        return X

    A = FiniteSet(surface, sample(40))
    B = FiniteSet(surface, sample(30))
    assert hausdorff_distance(A, B) == brute_hausdorff(A, B)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(1, 20), st.integers(1, 20), st.integers(1, 20))
def test_hausdorff_is_a_metric(seed, na, nb, nc):
    r = np.random.default_rng(seed)
    A, B, C = (FiniteSet(Surface.TORUS, r.random((n, 2))) for n in (na, nb, nc))
    ab = hausdorff_distance(A, B)
    assert ab == hausdorff_distance(B, A)
    assert hausdorff_distance(A, A) == 0
    assert ab <= hausdorff_distance(A, C) + hausdorff_distance(C, B) + 1e-12
    if ab == 0:
        assert np.array_equal(np.unique(A.points, axis=0), np.unique(B.points, axis=0))


def test_liminf_limsup_examples():
    T = Surface.TORUS
    A = FiniteSet(T, [[0.1, 0.1], [0.5, 0.5]])
    const = SetSequence([A] * 10)
    assert hausdorff_distance(liminf_sets(const, 5), A) == 0
    assert hausdorff_distance(limsup_sets(const, 5), A) == 0

    P, Q = FiniteSet(T, [[0.1, 0.1]]), FiniteSet(T, [[0.6, 0.6]])
    alt = SetSequence([P, Q] * 6)
    assert liminf_sets(alt, 6, eta=0.01) is None
    sup = limsup_sets(alt, 6, eta=0.01)
    assert hausdorff_distance(sup, FiniteSet(T, [[0.1, 0.1], [0.6, 0.6]])) == 0

    p = np.array([0.5, 0.5])
    balls = []
    for n in range(1, 40):
        ang = np.linspace(0, 2 * np.pi, 16, endpoint=False)
        ring = p + (1.0 / n) * np.column_stack([np.cos(ang), np.sin(ang)]) * 0.1
        balls.append(FiniteSet(T, np.vstack([p, ring]), mesh=0.1 / n))
    low = liminf_sets(SetSequence(balls), 10, eta=0.02)
    assert hausdorff_distance(low, FiniteSet(T, [p])) <= 0.02


def test_empty_sequence():
    with pytest.raises(EmptyInput):
        liminf_sets(SetSequence([]), 1)
    with pytest.raises(EmptyInput):
        FiniteSet(Surface.TORUS, np.zeros((0, 2)))


def test_epsilon_connected_examples():
    T = Surface.TORUS
    assert is_epsilon_connected(FiniteSet(T, [[0.3, 0.3]]), 1e-6)
    assert not is_epsilon_connected(FiniteSet(T, [[0.0, 0.0], [0.5, 0.0]]), 0.4)
    # circle of radius 0.2 sampled at 100 points: spacing ~0.0126
    a = np.linspace(0, 2 * np.pi, 100, endpoint=False)
    circle = 0.5 + 0.2 * np.column_stack([np.cos(a), np.sin(a)])
    assert is_epsilon_connected(FiniteSet(T, circle, mesh=0.01), 0.05)


def union_find_connected(X, eps):
    parent = list(range(len(X)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(len(X)):
        for j in range(i + 1, len(X)):
            if torus_d(X[i], X[j]) <= eps:
                parent[find(i)] = find(j)
    return len({find(i) for i in range(len(X))}) == 1


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(2, 40), st.floats(0.02, 0.3))
def test_epsilon_connected_matches_union_find(seed, n, eps):
    X = np.random.default_rng(seed).random((n, 2))
    assert is_epsilon_connected(FiniteSet(Surface.TORUS, X), eps) == union_find_connected(X, eps)
