"""Orbits, limit sets, recurrence and the equicontinuity modulus.

Everything here is a finite-horizon *estimate*: regularity of a point cannot
be decided from finitely many iterates, so results carry the horizon and
thresholds that produced them.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DivergenceToPole, NotFound, SurfaceMismatch
from .metric_space import (FiniteSet, Surface, SurfacePoint, component_labels, distance_to_proxy,
                           distances, greedy_net, proxy, reduce_coords)
from .surface_maps import SurfaceMap

DEFAULT_THRESHOLD = 0.05
DEFAULT_HORIZON = 500
BISECTION_STEPS = 10


def _as_array(f: SurfaceMap, x) -> np.ndarray:
    if isinstance(x, SurfacePoint):
        if x.surface is not f.surface:
            raise SurfaceMismatch(f"point on {x.surface.value}, map on {f.surface.value}")
        return x.array[None, :]
    return reduce_coords(f.surface, x)


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("KERE_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# orbits


@dataclass
class OrbitSegment:
    base: SurfacePoint
    n_min: int
    n_max: int
    points: np.ndarray  # row k holds f^(n_min + k)(base)

    def __getitem__(self, n: int) -> np.ndarray:
        if not self.n_min <= n <= self.n_max:
            raise IndexError(n)
        return self.points[n - self.n_min]

    @property
    def surface(self) -> Surface:
        return self.base.surface


def iterate(f: SurfaceMap, X: np.ndarray, n: int) -> np.ndarray:
    """f^n applied to the rows of X (n may be negative)."""
    step = f.forward_array if n >= 0 else f.inverse_array
    for _ in range(abs(n)):
        X = step(X)
    return X


def orbit_array(f: SurfaceMap, X: np.ndarray, n_min: int, n_max: int) -> np.ndarray:
    """Array of shape (n_max - n_min + 1, len(X), dim) of iterates."""
    if not n_min <= 0 <= n_max:
        raise ValueError("need n_min <= 0 <= n_max")
    X = reduce_coords(f.surface, X)
    fwd = [X]
    for _ in range(n_max):
        fwd.append(f.forward_array(fwd[-1]))
    bwd = []
    Y = X
    for _ in range(-n_min):
        Y = f.inverse_array(Y)
        bwd.append(Y)
    out = np.stack(bwd[::-1] + fwd)
    if f.surface is Surface.PLANE and not np.all(np.isfinite(out)):
        raise DivergenceToPole("orbit left the numeric range of the plane chart")
    return out


def orbit(f: SurfaceMap, x: SurfacePoint, n_min: int, n_max: int) -> OrbitSegment:
    X = _as_array(f, x)
    pts = orbit_array(f, X, n_min, n_max)[:, 0, :]
    return OrbitSegment(SurfacePoint.from_array(f.surface, X[0]), n_min, n_max, pts)


# ---------------------------------------------------------------------------
# limit sets


@dataclass
class LimitSetEstimate:
    omega: FiniteSet
    alpha: FiniteSet
    horizon: int
    burn_in: int
    cluster_eps: float


def omega_limit(f: SurfaceMap, x, burn_in: int = 200, horizon: int = 2000,
                cluster_eps: float = 0.05) -> FiniteSet:
    """Greedy cluster_eps-net of the orbit points with n in [burn_in, horizon]."""
    if not 0 <= burn_in < horizon:
        raise ValueError("need 0 <= burn_in < horizon")
    X = _as_array(f, x)
    X = iterate(f, X, burn_in)
    pts = [X[0]]
    for _ in range(horizon - burn_in):
        X = f.forward_array(X)
        pts.append(X[0])
    pts = np.array(pts)
    if f.surface is Surface.PLANE and not np.all(np.isfinite(pts)):
        raise DivergenceToPole("orbit left the numeric range of the plane chart")
    return FiniteSet(f.surface, greedy_net(f.surface, pts, cluster_eps), mesh=cluster_eps)


def alpha_limit(f: SurfaceMap, x, burn_in: int = 200, horizon: int = 2000,
                cluster_eps: float = 0.05) -> FiniteSet:
    return omega_limit(f.inverse_map(), x, burn_in, horizon, cluster_eps)


def limit_sets(f: SurfaceMap, x, burn_in: int = 200, horizon: int = 2000,
               cluster_eps: float = 0.05) -> LimitSetEstimate:
    return LimitSetEstimate(omega_limit(f, x, burn_in, horizon, cluster_eps),
                            alpha_limit(f, x, burn_in, horizon, cluster_eps),
                            horizon, burn_in, cluster_eps)


def orbit_closure(f: SurfaceMap, x, horizon: int = 2000, cluster_eps: float = 0.05) -> FiniteSet:
    """Net of the two-sided orbit segment n in [-horizon, horizon]."""
    pts = orbit_array(f, _as_array(f, x), -horizon, horizon)[:, 0, :]
    return FiniteSet(f.surface, greedy_net(f.surface, pts, cluster_eps), mesh=cluster_eps)


# ---------------------------------------------------------------------------
# perturbations and the equicontinuity modulus


def tangent_frame(X: np.ndarray):
    """Orthonormal tangent frame (e1, e2) with e1 x e2 = X on the unit sphere."""
    helper = np.where(np.abs(X[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
    e1 = np.cross(helper, X)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    return e1, np.cross(X, e1)


def perturb(surface: Surface, X: np.ndarray, radius, angle) -> np.ndarray:
    """Points at distance at most ``radius`` from X in direction ``angle``."""
    radius = np.broadcast_to(radius, X.shape[:1])
    angle = np.broadcast_to(angle, X.shape[:1])
    c, s = np.cos(angle), np.sin(angle)
    if surface is Surface.SPHERE:
        e1, e2 = tangent_frame(X)
        v = c[:, None] * e1 + s[:, None] * e2
        return np.cos(radius)[:, None] * X + np.sin(radius)[:, None] * v
    Y = X + np.column_stack([radius * c, radius * s])
    if surface in (Surface.ANNULUS, Surface.MOBIUS):
        Y[:, 0] = np.clip(Y[:, 0], -1.0, 1.0)
    return reduce_coords(surface, Y)


@dataclass(frozen=True)
class SamplePattern:
    """Seeded offsets in the open unit disc shared by all base points."""

    radii: np.ndarray
    angles: np.ndarray

    @classmethod
    def make(cls, samples: int, seed: int = 0) -> "SamplePattern":
        rng = np.random.default_rng(seed)
        radii = np.sqrt(rng.random(samples))
        angles = rng.random(samples) * 2 * math.pi
        return cls(radii, angles)


def _still_close(f: SurfaceMap, X: np.ndarray, deltas: np.ndarray, eps: float,
                 horizon: int, pattern: SamplePattern) -> np.ndarray:
    """True where every sampled y with d(x, y) < delta stays eps-close for |n| <= horizon."""
    n, S = X.shape[0], pattern.radii.size
    surface = f.surface
    base = np.repeat(X, S, axis=0)
    Y0 = perturb(surface, base, np.repeat(deltas, S) * np.tile(pattern.radii, n),
                 np.tile(pattern.angles, n))
    limit = distance_to_proxy(surface, eps)
    if hasattr(f, "_fwd_parts"):
        return _still_close_mobius(f, X, Y0.reshape(n, S, 3), limit, horizon)
    ok = np.ones(n, dtype=bool)
    dim = X.shape[1]
    # row 0 of each block is the base point, rows 1..S its perturbations;
    # stepping one stacked array halves the per-call overhead
    Z0 = np.concatenate([X[:, None, :], Y0.reshape(n, S, dim)], axis=1)
    for step in (f.step_forward, f.step_inverse):
        idx = np.flatnonzero(ok)
        Z = Z0[idx]
        for _ in range(horizon):
            if idx.size == 0:
                break
            Z = step(Z.reshape(-1, dim)).reshape(-1, S + 1, dim)
            p = proxy(surface, Z[:, :1, :], Z[:, 1:, :])
            bad = np.any(~(p < limit), axis=1)
            if bad.any():
                ok[idx[bad]] = False
                keep = ~bad
                idx = idx[keep]
                Z = Z[keep]
    return ok


def _still_close_mobius(f, X: np.ndarray, Y: np.ndarray, limit: float,
                        horizon: int) -> np.ndarray:
    """_still_close for Mobius maps, in a coordinate-major layout.

    The Lorentz action is a 3x3 affine map followed by normalization, which is
    three times faster on (3, N) arrays; for unit vectors chord^2 = 2 - 2 x.y,
    so closeness becomes a dot-product test.
    """
    n, S = Y.shape[:2]
    ok = np.ones(n, dtype=bool)
    min_dot = 1.0 - 0.5 * limit
    Z0 = np.concatenate([X[:, None, :], Y], axis=1).transpose(2, 0, 1)  # (3, n, S+1)
    for At, b in (f._fwd_parts, f._inv_parts):
        M = np.ascontiguousarray(At.T)
        c = b[:, None]
        idx = np.flatnonzero(ok)
        Z = np.ascontiguousarray(Z0[:, idx])
        for _ in range(horizon):
            if idx.size == 0:
                break
            V = M @ Z.reshape(3, -1)
            V += c
            V *= 1.0 / np.sqrt(V[0] * V[0] + V[1] * V[1] + V[2] * V[2])
            Z = V.reshape(3, -1, S + 1)
            dot = Z[0, :, 1:] * Z[0, :, :1] + Z[1, :, 1:] * Z[1, :, :1] + Z[2, :, 1:] * Z[2, :, :1]
            bad = np.any(~(dot > min_dot), axis=1)
            if bad.any():
                ok[idx[bad]] = False
                keep = ~bad
                idx = idx[keep]
                Z = np.ascontiguousarray(Z[:, keep])
    return ok


def modulus_bracket(f: SurfaceMap, X: np.ndarray, eps: float, horizon: int, samples: int = 8,
                    seed: int = 0, steps: int = BISECTION_STEPS,
                    stop_at: Optional[float] = None):
    """Bisection brackets [lo, hi] for the modulus at every row of X.

    ``lo`` is the largest passing probe found (0 if none passed).  When
    ``stop_at`` is given, a point's bisection halts as soon as its bracket no
    longer straddles ``stop_at``; the side of ``stop_at`` is then decided
    exactly as a full bisection would decide it.
    """
    X = reduce_coords(f.surface, X)
    pattern = SamplePattern.make(samples, seed)
    n = X.shape[0]
    lo = np.zeros(n)
    hi = np.full(n, float(eps))
    top = _still_close(f, X, hi.copy(), eps, horizon, pattern)
    lo[top] = eps
    active = ~top
    for _ in range(steps):
        if stop_at is not None:
            active &= (lo < stop_at) & (hi > stop_at)
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        mid = 0.5 * (lo[idx] + hi[idx])
        passed = _still_close(f, X[idx], mid, eps, horizon, pattern)
        lo[idx] = np.where(passed, mid, lo[idx])
        hi[idx] = np.where(passed, hi[idx], mid)
    return lo, hi


@dataclass
class EquicontinuityProfile:
    point: SurfacePoint
    eps: float
    delta_estimate: float
    horizon: int
    samples: int
    collapsed: bool = False
    label: str = "estimate"


def equicontinuity_modulus(f: SurfaceMap, x: SurfacePoint, eps: float,
                           horizon: int = DEFAULT_HORIZON, samples: int = 8,
                           seed: int = 0) -> EquicontinuityProfile:
    if eps <= 0:
        raise ValueError("eps must be positive")
    X = _as_array(f, x)
    lo, _ = modulus_bracket(f, X, eps, horizon, samples, seed)
    collapsed = bool(lo[0] == 0.0)
    delta = eps / 2 ** BISECTION_STEPS if collapsed else float(lo[0])
    return EquicontinuityProfile(SurfacePoint.from_array(f.surface, X[0]), eps, delta,
                                 horizon, samples, collapsed)


# ---------------------------------------------------------------------------
# grids and the singular set


def fibonacci_sphere(m: int) -> np.ndarray:
    k = np.arange(m) + 0.5
    z = 1.0 - 2.0 * k / m
    lon = math.pi * (3.0 - math.sqrt(5.0)) * k
    rho = np.sqrt(1.0 - z ** 2)
    return np.column_stack([rho * np.cos(lon), rho * np.sin(lon), z])


def surface_grid(surface: Surface, n: int):
    """n*n grid points and the cell size (typical spacing).

    Flat surfaces use cell centers of a regular n x n grid.  The sphere uses a
    Fibonacci lattice of n*n points, which is quasi-uniform including near the
    poles (a latitude-longitude grid leaves a hole of radius ~ 1/sqrt(n) there).
    """
    c = (np.arange(n) + 0.5) / n
    if surface is Surface.SPHERE:
        return fibonacci_sphere(n * n), math.sqrt(4 * math.pi) / n
    if surface is Surface.TORUS:
        S, T = np.meshgrid(c, c, indexing="ij")
        return np.column_stack([S.ravel(), T.ravel()]), 1.0 / n
    if surface is Surface.KLEIN:
        S, T = np.meshgrid(c / 2, c, indexing="ij")
        return np.column_stack([S.ravel(), T.ravel()]), 1.0 / n
    if surface is Surface.ANNULUS:
        S, T = np.meshgrid(-1 + 2 * c, c, indexing="ij")
        return np.column_stack([S.ravel(), T.ravel()]), 2.0 / n
    if surface is Surface.MOBIUS:
        S, T = np.meshgrid(-1 + 2 * c, c / 2, indexing="ij")
        return np.column_stack([S.ravel(), T.ravel()]), 2.0 / n
    raise ValueError(f"no compact grid on {surface.value}")


@dataclass
class SingularSetEstimate:
    surface: Surface
    grid: np.ndarray
    flagged: np.ndarray
    eps: float
    horizon: int
    threshold: float
    cell: float
    delta_lo: np.ndarray = field(repr=False)
    delta_hi: np.ndarray = field(repr=False)
    label: str = "estimate"

    @property
    def fraction(self) -> float:
        return float(self.flagged.mean())

    @property
    def flagged_points(self) -> np.ndarray:
        return self.grid[self.flagged]

    def cluster_labels(self, radius_cells: float = 3.0) -> np.ndarray:
        """Component label per flagged point in the (radius_cells * cell)-graph."""
        pts = self.flagged_points
        if pts.shape[0] == 0:
            return np.zeros(0, dtype=int)
        return component_labels(self.surface, pts, radius_cells * self.cell)

    def clusters(self, radius_cells: float = 3.0) -> list:
        labels = self.cluster_labels(radius_cells)
        pts = self.flagged_points
        return [pts[labels == k] for k in range(labels.max() + 1)] if labels.size else []

    def cluster_centers(self, radius_cells: float = 3.0) -> np.ndarray:
        """One point per cluster: the mean of its most singular members.

        Flagged points get a full bisection, so the smallest modulus value in a
        cluster marks the points nearest the singular point itself.
        """
        labels = self.cluster_labels(radius_cells)
        pts = self.flagged_points
        lo = self.delta_lo[self.flagged]
        out = []
        for k in range(labels.max() + 1 if labels.size else 0):
            m = labels == k
            core = pts[m][lo[m] <= lo[m].min()]
            out.append(_mean_point(self.surface, core))
        return np.array(out).reshape(len(out), self.grid.shape[1])


def _mean_point(surface: Surface, P: np.ndarray) -> np.ndarray:
    if surface is Surface.SPHERE:
        m = P.mean(axis=0)
        n = np.linalg.norm(m)
        return m / n if n > 0 else P[0]
    D = P - P[0]
    if surface in (Surface.TORUS, Surface.KLEIN):
        D = D - np.round(D)
    elif surface in (Surface.ANNULUS, Surface.MOBIUS):
        D[:, 1] -= np.round(D[:, 1])
    return reduce_coords(surface, (P[0] + D.mean(axis=0))[None, :])[0]


def singular_set(f: SurfaceMap, grid_resolution: int = 64, eps: float = 0.1,
                 horizon: int = DEFAULT_HORIZON, threshold: float = DEFAULT_THRESHOLD,
                 samples: int = 8, seed: int = 0) -> SingularSetEstimate:
    """Flag grid points whose estimated modulus falls below threshold * eps."""
    if grid_resolution < 8:
        raise ValueError("grid_resolution must be >= 8")
    grid, cell = surface_grid(f.surface, grid_resolution)
    cut = threshold * eps
    chunks = np.array_split(np.arange(grid.shape[0]), worker_count())

    def run(idx):
        return modulus_bracket(f, grid[idx], eps, horizon, samples, seed, stop_at=cut)

    lo = np.empty(grid.shape[0])
    hi = np.empty(grid.shape[0])
    if len(chunks) == 1:
        results = [run(chunks[0])]
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(run, chunks))
    for idx, (l, h) in zip(chunks, results):
        lo[idx], hi[idx] = l, h
    flagged = hi <= cut
    # flagged points are few; finish their bisection so the modulus is comparable
    idx = np.flatnonzero(flagged & (hi > lo))
    if idx.size and idx.size < grid.shape[0]:
        lo[idx], hi[idx] = modulus_bracket(f, grid[idx], eps, horizon, samples, seed)
    return SingularSetEstimate(f.surface, grid, flagged, eps, horizon, threshold, cell, lo, hi)


# ---------------------------------------------------------------------------
# recurrence


def is_recurrent_point(f: SurfaceMap, x, horizon: int = 1000, eps: float = 0.05) -> bool:
    X = _as_array(f, x)
    for step in (f.forward_array, f.inverse_array):
        Y = X
        for _ in range(horizon):
            Y = step(Y)
            if distances(f.surface, X, Y)[0] < eps:
                return True
    return False


def is_recurrent_map(f: SurfaceMap, grid, horizon: int = 1000, eps: float = 0.05):
    """First n in [1, horizon] with sup over the grid of d(f^n(x), x) < eps."""
    X = grid.points if isinstance(grid, FiniteSet) else reduce_coords(f.surface, grid)
    Y = X
    for n in range(1, horizon + 1):
        Y = f.forward_array(Y)
        if float(np.max(distances(f.surface, X, Y))) < eps:
            return True, n
    return False, None


# ---------------------------------------------------------------------------
# covering an orbit by iterates of a disc


def _local_vectors(surface: Surface, Q: np.ndarray, P: np.ndarray):
    """Displacements of polygon vertices P (K, dim) seen from queries Q (M, dim).

    Returns (M, K, 2) planar vectors and a validity mask per query.  On flat
    quotients the polygon is unwrapped into one lift first and each query is
    moved to its copy nearest the polygon, so vertices never jump across a
    period seam.
    """
    if surface is Surface.SPHERE:
        e1, e2 = tangent_frame(Q)
        dots = Q @ P.T
        V = np.stack([P @ e1.T, P @ e2.T], axis=-1).transpose(1, 0, 2)
        return V, np.all(dots > 0, axis=1)
    period = np.array([1.0, 1.0]) if surface in (Surface.TORUS, Surface.KLEIN) else np.array([0.0, 1.0])
    step = np.diff(P, axis=0)
    if period.any():
        step = step - period * np.round(step)
    L = np.vstack([P[:1], P[:1] + np.cumsum(step, axis=0)])
    c = L.mean(axis=0)
    Qc = Q + period * np.round(c - Q)
    return L[None, :, :] - Qc[:, None, :], np.ones(Q.shape[0], dtype=bool)


def winding_inside(surface: Surface, Q: np.ndarray, polygon: np.ndarray) -> np.ndarray:
    """Winding-number containment of queries in a closed polyline (local chart)."""
    V, valid = _local_vectors(surface, Q, polygon)
    ang = np.arctan2(V[..., 1], V[..., 0])
    inc = np.diff(np.concatenate([ang, ang[:, :1]], axis=1), axis=1)
    inc = (inc + math.pi) % (2 * math.pi) - math.pi
    wind = np.abs(inc.sum(axis=1)) / (2 * math.pi)
    return valid & (wind > 0.5)


def orbit_covering_check(f: SurfaceMap, x, U_radius: float, N_max: int,
                         orbit_horizon: int = 1000, boundary_points: int = 96) -> int:
    """Least N <= N_max with every sampled orbit point inside the union of f^i(B(x, U_radius)), i <= N."""
    X = _as_array(f, x)
    orbit_pts = orbit_array(f, X, -orbit_horizon, orbit_horizon)[:, 0, :]
    angles = np.linspace(0, 2 * math.pi, boundary_points, endpoint=False)
    ring = perturb(f.surface, np.repeat(X, boundary_points, axis=0), U_radius, angles)
    # the disc itself also contains points at distance < U_radius
    covered = distances(f.surface, orbit_pts, np.repeat(X, orbit_pts.shape[0], axis=0)) < U_radius
    for i in range(N_max + 1):
        if i > 0:
            ring = f.forward_array(ring)
            todo = np.flatnonzero(~covered)
            covered[todo] = winding_inside(f.surface, orbit_pts[todo], ring)
        if covered.all():
            return i
    raise NotFound(f"orbit not covered by {N_max + 1} iterates of the disc")


# ---------------------------------------------------------------------------
# fixed points


def chart_log(surface: Surface, c: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Local planar coordinates of points P around a single point c."""
    if surface is Surface.SPHERE:
        e1, e2 = tangent_frame(c[None, :])
        cosr = np.clip(P @ c, -1.0, 1.0)
        r = np.arccos(cosr)
        v = np.column_stack([P @ e1[0], P @ e2[0]])
        n = np.linalg.norm(v, axis=1)
        scale = np.where(n > 0, r / np.where(n > 0, n, 1.0), 1.0)
        return v * scale[:, None]
    D = P - c
    if surface in (Surface.TORUS, Surface.KLEIN):
        D = D - np.round(D)
    elif surface in (Surface.ANNULUS, Surface.MOBIUS):
        D[:, 1] -= np.round(D[:, 1])
    return D


def chart_exp(surface: Surface, c: np.ndarray, U: np.ndarray) -> np.ndarray:
    U = np.array(U, dtype=float, ndmin=2)
    if surface is Surface.SPHERE:
        r = np.linalg.norm(U, axis=1)
        ang = np.arctan2(U[:, 1], U[:, 0])
        return perturb(surface, np.repeat(c[None, :], U.shape[0], axis=0), r, ang)
    return reduce_coords(surface, c + U)


@dataclass
class FixedPointCensus:
    points: np.ndarray
    continuum: bool  # many distinct solutions: a curve of fixed points
    min_displacement: float

    @property
    def count(self) -> int:
        return int(self.points.shape[0])


def _tree_coords(surface: Surface, X: np.ndarray):
    from scipy.spatial import cKDTree

    if surface is Surface.SPHERE:
        return cKDTree(X)
    if surface in (Surface.TORUS, Surface.KLEIN):
        return cKDTree(X - np.floor(X), boxsize=[1.0, 1.0])
    Y = X.copy()
    Y[:, 0] += 1.0
    Y[:, 1] -= np.floor(Y[:, 1])
    return cKDTree(Y, boxsize=[100.0, 1.0])


def fixed_points(f: SurfaceMap, grid: int = 64, tol: float = 1e-7,
                 max_points: int = 12) -> FixedPointCensus:
    """Grid search for local minima of d(f(x), x), each refined by a 2-d root solve."""
    from scipy.optimize import root

    X, cell = surface_grid(f.surface, grid)
    disp = distances(f.surface, f.forward_array(X), X)
    tree = _tree_coords(f.surface, X)
    _, nbr = tree.query(tree.data, k=9)
    cand = np.flatnonzero((disp <= disp[nbr].min(axis=1)) & (disp < 4 * cell))
    cand = cand[np.argsort(disp[cand])]
    found = []
    for i in cand:
        c = X[i]

        def resid(u, c=c):
            P = chart_exp(f.surface, c, u)
            return chart_log(f.surface, c, f.forward_array(P))[0] - u

        sol = root(resid, np.zeros(2), method="hybr", options={"xtol": 1e-14})
        P = chart_exp(f.surface, c, sol.x)
        d = float(distances(f.surface, f.forward_array(P), P)[0])
        if d < tol and not any(distances(f.surface, P, q[None, :])[0] < 1e-5 for q in found):
            found.append(P[0])
        if len(found) > max_points:
            break
    pts = np.array(found).reshape(len(found), X.shape[1])
    return FixedPointCensus(pts, len(found) > max_points, float(disp.min()))
