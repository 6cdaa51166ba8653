"""Metric-space primitives on the supported surfaces.

Points are stored as numpy rows: unit 3-vectors on the sphere, ``(s, t)``
chart coordinates elsewhere.  Distances are computed through a monotone
*proxy* (squared chord or squared flat length) so that set-level reductions
can pick the extremal pair before paying for the final square root or
arcsine.  The scalar :func:`surface_distance` goes through the very same
proxy arithmetic, which makes the vectorized Hausdorff distance bit-for-bit
equal to a naive double loop over :func:`surface_distance`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import EmptyInput, SurfaceMismatch


class Surface(str, enum.Enum):
    SPHERE = "Sphere"
    TORUS = "Torus"
    KLEIN = "Klein"
    ANNULUS = "Annulus"
    MOBIUS = "Mobius"
    PLANE = "Plane"

    @property
    def dim(self) -> int:
        return 3 if self is Surface.SPHERE else 2


def as_surface(tag) -> Surface:
    if isinstance(tag, Surface):
        return tag
    for s in Surface:
        if s.value.lower() == str(tag).lower() or s.name.lower() == str(tag).lower():
            return s
    raise ValueError(f"unknown surface {tag!r}")


# ---------------------------------------------------------------------------
# chart reduction


def reduce_coords(surface: Surface, X) -> np.ndarray:
    """Bring an array of chart coordinates to canonical form."""
    X = np.array(X, dtype=float, ndmin=2)
    if surface is Surface.SPHERE:
        return X / np.linalg.norm(X, axis=1, keepdims=True)
    if surface is Surface.PLANE:
        return X
    if surface is Surface.TORUS:
        return X - np.floor(X)
    if surface is Surface.KLEIN:
        return _klein_canonical(X)
    if surface is Surface.ANNULUS:
        out = X.copy()
        out[:, 1] -= np.floor(out[:, 1])
        return out
    if surface is Surface.MOBIUS:
        return _mobius_canonical(X)
    raise ValueError(surface)


def _klein_canonical(X):
    # (s, t) ~ (-s, t + 1/2); representative with s in [0, 1/2]
    s = X[:, 0] - np.floor(X[:, 0])
    t = X[:, 1] - np.floor(X[:, 1])
    flip = s >= 0.5
    s = np.where(flip, 1.0 - s, s)
    s = np.where(s >= 1.0, 0.0, s)
    t = np.where(flip, t + 0.5, t)
    t = t - np.floor(t)
    # on the two invariant circles s in {0, 1/2} the flip acts by t -> t + 1/2
    edge = (s == 0.0) | (s == 0.5)
    t = np.where(edge & (t >= 0.5), t - 0.5, t)
    return np.column_stack([s, t])


def _mobius_canonical(X):
    # (s, t) ~ (-s, t + 1/2) on [-1, 1] x S^1; representative with t in [0, 1/2)
    s = X[:, 0].copy()
    t = X[:, 1] - np.floor(X[:, 1])
    flip = t >= 0.5
    s = np.where(flip, -s, s)
    t = np.where(flip, t - 0.5, t)
    return np.column_stack([s, t])


def theta0(X: np.ndarray) -> np.ndarray:
    """Deck involution (s, t) -> (-s, t + 1/2) of the torus over the Klein bottle."""
    return np.column_stack([-X[:, 0], X[:, 1] + 0.5])


# ---------------------------------------------------------------------------
# proxies and distances


def _flat_periodic(d):
    d = np.abs(d)
    d = d - np.floor(d)
    return np.minimum(d, 1.0 - d)


def _proxy_torus(X, Y):
    dx = _flat_periodic(X[..., 0] - Y[..., 0])
    dy = _flat_periodic(X[..., 1] - Y[..., 1])
    return dx * dx + dy * dy


def _proxy_annulus(X, Y):
    dx = np.abs(X[..., 0] - Y[..., 0])
    dy = _flat_periodic(X[..., 1] - Y[..., 1])
    return dx * dx + dy * dy


def proxy(surface: Surface, X, Y) -> np.ndarray:
    """Monotone distance proxy, broadcasting over leading axes."""
    if surface is Surface.SPHERE:
        d0 = X[..., 0] - Y[..., 0]
        d1 = X[..., 1] - Y[..., 1]
        d2 = X[..., 2] - Y[..., 2]
        return d0 * d0 + d1 * d1 + d2 * d2
    if surface is Surface.PLANE:
        d0 = X[..., 0] - Y[..., 0]
        d1 = X[..., 1] - Y[..., 1]
        return d0 * d0 + d1 * d1
    if surface is Surface.TORUS:
        return _proxy_torus(X, Y)
    if surface is Surface.KLEIN:
        Yf = np.stack([-Y[..., 0], Y[..., 1] + 0.5], axis=-1)
        return np.minimum(_proxy_torus(X, Y), _proxy_torus(X, Yf))
    if surface is Surface.ANNULUS:
        return _proxy_annulus(X, Y)
    if surface is Surface.MOBIUS:
        Yf = np.stack([-Y[..., 0], Y[..., 1] + 0.5], axis=-1)
        return np.minimum(_proxy_annulus(X, Y), _proxy_annulus(X, Yf))
    raise ValueError(surface)


def proxy_to_distance(surface: Surface, p):
    """Convert a proxy value (scalar or array) to a metric distance."""
    # scalars take the array path too, so every caller rounds identically
    if np.ndim(p) == 0:
        return float(proxy_to_distance(surface, np.array([p], dtype=float))[0])
    p = np.asarray(p, dtype=float)
    if surface is Surface.SPHERE:
        return 2.0 * np.arcsin(np.minimum(1.0, np.sqrt(p) / 2.0))
    return np.sqrt(p)


def distance_to_proxy(surface: Surface, d: float) -> float:
    if surface is Surface.SPHERE:
        if d >= math.pi:
            return 4.0
        c = 2.0 * math.sin(d / 2.0)
        return c * c
    return d * d


def distances(surface: Surface, X, Y) -> np.ndarray:
    """Elementwise distances between matching rows of X and Y."""
    return proxy_to_distance(surface, proxy(surface, np.asarray(X), np.asarray(Y)))


def pairwise_distances(surface: Surface, X, Y) -> np.ndarray:
    X = np.asarray(X)
    Y = np.asarray(Y)
    return proxy_to_distance(surface, proxy(surface, X[:, None, :], Y[None, :, :]))


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class SurfacePoint:
    surface: Surface
    coords: tuple

    def __post_init__(self):
        surface = as_surface(self.surface)
        c = np.asarray(self.coords, dtype=float).reshape(-1)
        if c.size != surface.dim:
            raise ValueError(f"{surface.value} points need {surface.dim} coordinates")
        if surface is Surface.SPHERE:
            n = float(np.linalg.norm(c))
            if abs(n - 1.0) > 1e-12:
                raise ValueError("sphere coordinates must have unit norm")
        c = reduce_coords(surface, c)[0]
        object.__setattr__(self, "surface", surface)
        object.__setattr__(self, "coords", tuple(float(v) for v in c))

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coords)

    @classmethod
    def from_array(cls, surface, row) -> "SurfacePoint":
        surface = as_surface(surface)
        row = np.asarray(row, dtype=float)
        if surface is Surface.SPHERE:
            row = row / np.linalg.norm(row)
        return cls(surface, tuple(row))


def surface_distance(a: SurfacePoint, b: SurfacePoint) -> float:
    """Distance between two points on the same surface."""
    if a.surface is not b.surface:
        raise SurfaceMismatch(f"{a.surface.value} vs {b.surface.value}")
    s = a.surface
    x, y = a.coords, b.coords
    if s is Surface.SPHERE:
        d0, d1, d2 = x[0] - y[0], x[1] - y[1], x[2] - y[2]
        p = d0 * d0 + d1 * d1 + d2 * d2
    elif s is Surface.PLANE:
        d0, d1 = x[0] - y[0], x[1] - y[1]
        p = d0 * d0 + d1 * d1
    else:
        p = float(proxy(s, np.array(x), np.array(y)))
    return proxy_to_distance(s, p)


@dataclass(frozen=True)
class FiniteSet:
    """Finite sample of a compact set; ``mesh`` is the claimed net radius."""

    surface: Surface
    points: np.ndarray
    mesh: float = 0.0

    def __post_init__(self):
        surface = as_surface(self.surface)
        pts = np.array(self.points, dtype=float, ndmin=2)
        if pts.shape[0] == 0:
            raise EmptyInput("FiniteSet must be nonempty")
        if pts.shape[1] != surface.dim:
            raise ValueError("point dimension does not match surface")
        if self.mesh < 0:
            raise ValueError("mesh must be >= 0")
        pts = reduce_coords(surface, pts)
        pts.setflags(write=False)
        object.__setattr__(self, "surface", surface)
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_points(cls, points: Sequence[SurfacePoint], mesh: float = 0.0) -> "FiniteSet":
        if not points:
            raise EmptyInput("no points")
        surfaces = {p.surface for p in points}
        if len(surfaces) != 1:
            raise SurfaceMismatch("points live on different surfaces")
        return cls(points[0].surface, np.array([p.coords for p in points]), mesh)

    def __len__(self):
        return self.points.shape[0]

    def to_points(self) -> list:
        return [SurfacePoint(self.surface, tuple(r)) for r in self.points]


@dataclass(frozen=True)
class SetSequence:
    items: tuple = field(default_factory=tuple)

    def __post_init__(self):
        items = tuple(self.items)
        if items and len({a.surface for a in items}) != 1:
            raise SurfaceMismatch("sequence items live on different surfaces")
        object.__setattr__(self, "items", items)

    def __len__(self):
        return len(self.items)

    @property
    def surface(self) -> Surface:
        return self.items[0].surface


def _check_same(A: FiniteSet, B: FiniteSet):
    if A.surface is not B.surface:
        raise SurfaceMismatch(f"{A.surface.value} vs {B.surface.value}")


# ---------------------------------------------------------------------------
# Hausdorff distance

_CHUNK = 2048


def _directed_proxy(surface, X, Y) -> float:
    """max over x of min over y of proxy(x, y)."""
    worst = 0.0
    for i in range(0, X.shape[0], _CHUNK):
        block = proxy(surface, X[i:i + _CHUNK, None, :], Y[None, :, :])
        worst = max(worst, float(block.min(axis=1).max()))
    return worst


def directed_hausdorff(A: FiniteSet, B: FiniteSet) -> float:
    """sup over a in A of d(a, B)."""
    _check_same(A, B)
    return proxy_to_distance(A.surface, _directed_proxy(A.surface, A.points, B.points))


def hausdorff_distance(A: FiniteSet, B: FiniteSet) -> float:
    _check_same(A, B)
    s = A.surface
    p = max(_directed_proxy(s, A.points, B.points), _directed_proxy(s, B.points, A.points))
    return proxy_to_distance(s, p)


def min_distance_to_set(surface: Surface, X, S) -> np.ndarray:
    """For each row of X, the distance to the nearest row of S."""
    X = np.asarray(X, dtype=float)
    out = np.empty(X.shape[0])
    for i in range(0, X.shape[0], _CHUNK):
        out[i:i + _CHUNK] = proxy(surface, X[i:i + _CHUNK, None, :], S[None, :, :]).min(axis=1)
    return proxy_to_distance(surface, out)


# ---------------------------------------------------------------------------
# set-sequence limits


def _default_eta(seq: SetSequence) -> float:
    mesh = max(a.mesh for a in seq.items)
    return 2.0 * mesh if mesh > 0 else 1e-9


def _window(seq: SetSequence, tail: int):
    if len(seq) == 0:
        raise EmptyInput("empty set sequence")
    if tail < 1 or tail > len(seq):
        raise ValueError("tail must be in [1, len(seq)]")
    return seq.items[-tail:]


def liminf_sets(seq: SetSequence, tail: int, eta: Optional[float] = None) -> Optional[FiniteSet]:
    """Points of the last item that every item of the tail window comes within ``eta`` of.

    Returns ``None`` when the approximate lower limit is empty.
    """
    window = _window(seq, tail)
    eta = _default_eta(seq) if eta is None else eta
    s = seq.surface
    cand = window[-1].points
    keep = np.ones(cand.shape[0], dtype=bool)
    for item in window:
        keep &= min_distance_to_set(s, cand, item.points) <= eta
    if not keep.any():
        return None
    return FiniteSet(s, cand[keep], mesh=eta / 2)


def limsup_sets(seq: SetSequence, tail: int, eta: Optional[float] = None,
                recur_min: Optional[int] = None) -> FiniteSet:
    """Points of the tail window that recur within ``eta`` in at least ``recur_min`` items."""
    window = _window(seq, tail)
    eta = _default_eta(seq) if eta is None else eta
    if recur_min is None:
        recur_min = max(1, tail // 3)
    s = seq.surface
    cand = np.unique(np.concatenate([a.points for a in window]), axis=0)
    hits = np.zeros(cand.shape[0], dtype=int)
    for item in window:
        hits += min_distance_to_set(s, cand, item.points) <= eta
    keep = hits >= recur_min
    if not keep.any():
        # the last item always recurs in itself; fall back to the densest points
        keep = hits == hits.max()
    return FiniteSet(s, cand[keep], mesh=eta / 2)


# ---------------------------------------------------------------------------
# connectivity


def _neighbor_pairs(surface: Surface, X: np.ndarray, eps: float) -> np.ndarray:
    """All index pairs (i, j), i < j, with d(X[i], X[j]) <= eps."""
    n = X.shape[0]
    if surface is Surface.SPHERE:
        chord = 2.0 * math.sin(min(eps, math.pi) / 2.0)
        return cKDTree(X).query_pairs(chord * (1 + 1e-12), output_type="ndarray")
    if surface is Surface.PLANE:
        return cKDTree(X).query_pairs(eps, output_type="ndarray")
    if surface is Surface.TORUS:
        return cKDTree(np.mod(X, 1.0), boxsize=1.0).query_pairs(eps, output_type="ndarray")
    if surface is Surface.ANNULUS:
        Y = np.column_stack([X[:, 0] + 1.0, np.mod(X[:, 1], 1.0)])
        return cKDTree(Y, boxsize=[16.0, 1.0]).query_pairs(eps, output_type="ndarray")
    # quotient surfaces: search among both lifts of every point
    both = np.concatenate([X, theta0(X)])
    if surface is Surface.KLEIN:
        tree = cKDTree(np.mod(both, 1.0), boxsize=1.0)
    else:
        Y = np.column_stack([both[:, 0] + 1.0, np.mod(both[:, 1], 1.0)])
        tree = cKDTree(Y, boxsize=[16.0, 1.0])
    pairs = tree.query_pairs(eps, output_type="ndarray") % n
    pairs = pairs[pairs[:, 0] != pairs[:, 1]]
    return pairs


def component_labels(surface: Surface, X, eps: float) -> np.ndarray:
    """Connected-component label of every point in the eps-neighbor graph."""
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if n == 0:
        return np.zeros(0, dtype=int)
    pairs = _neighbor_pairs(surface, X, eps)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) \
        if len(pairs) else coo_matrix((n, n))
    _, labels = connected_components(graph, directed=False)
    return labels


def is_epsilon_connected(A: FiniteSet, eps: float) -> bool:
    if eps <= 0:
        raise ValueError("eps must be positive")
    if len(A) == 1:
        return True
    return int(component_labels(A.surface, A.points, eps).max()) == 0


def greedy_net(surface: Surface, X, eps: float) -> np.ndarray:
    """Greedy eps-net of the rows of X, taken in order (first point is always a center)."""
    X = np.asarray(X, dtype=float)
    thr = distance_to_proxy(surface, eps)
    centers = [X[0]]
    C = X[:1]
    nearest = proxy(surface, X, X[0])
    for i in range(1, X.shape[0]):
        if nearest[i] > thr:
            centers.append(X[i])
            nearest = np.minimum(nearest, proxy(surface, X, X[i]))
    return np.array(centers) if len(centers) > 1 else C.copy()


def sets_equal_within(A: Optional[FiniteSet], B: Optional[FiniteSet], eta: float) -> bool:
    if A is None or B is None:
        return A is None and B is None
    return hausdorff_distance(A, B) <= eta


def union(sets: Iterable[FiniteSet]) -> FiniteSet:
    sets = list(sets)
    if not sets:
        raise EmptyInput("nothing to unite")
    return FiniteSet(sets[0].surface, np.concatenate([a.points for a in sets]),
                     max(a.mesh for a in sets))
