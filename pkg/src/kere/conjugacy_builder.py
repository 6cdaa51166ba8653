"""Grid-sampled conjugacies to the canonical models.

The group elements g_t of the closure of the iterates are approximated by
closest returns f^n with n * rho close to t.  The small remaining offset is
absorbed by a chart correction, so exact models give residuals at rounding
level and warped models inherit only the (tiny) correction error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional

import numpy as np
from scipy.spatial import cKDTree

from .errors import (ChainStuck, ContinuityGapAtHalf, NotStationary, PreconditionError,
                     ResidualTooLarge, ThetaCommutationFailure)
from .metric_space import Surface, SurfacePoint, distances, reduce_coords, theta0
from .orbit_analysis import (chart_exp, chart_log, fixed_points, orbit_array, orbit_closure,
                             perturb)
from .rotation_invariants import (CircleMap, angle_turns, smooth_weights, translation_vector,
                                  weighted_average)
from .surface_maps import (PeriodicTable, QuotientLiftMap, SurfaceMap, TorusFiberShift, compose,
                           elliptic_rotation, klein_phi, klein_psi, torus_affine,
                           torus_reversing_type1, torus_reversing_type2, torus_translation)
from .metric_space import component_labels

N_RETURN = 100_000


def _point_array(surface: Surface, x) -> np.ndarray:
    if isinstance(x, SurfacePoint):
        return x.array
    return reduce_coords(surface, x)[0]


# ---------------------------------------------------------------------------
# data types


@dataclass
class Curve:
    surface: Surface
    samples: np.ndarray
    closed: bool = True
    mesh: float = 0.0
    center: Optional[np.ndarray] = None
    radii: Optional[np.ndarray] = None  # polar radius per angle bin, when star-shaped


@dataclass
class TransversalArc:
    surface: Surface
    samples: np.ndarray
    labels: np.ndarray
    chain_levels: list = field(default_factory=list)

    @property
    def mu(self) -> float:
        return float(distances(self.surface, self.samples[:-1], self.samples[1:]).max())


@dataclass
class ConjugacyMap:
    """h : model space -> surface, sampled on a regular grid of model nodes."""

    surface: Surface
    model: SurfaceMap
    nodes: np.ndarray  # model-surface points, row-major over ``shape``
    values: np.ndarray  # h(nodes)
    shape: tuple
    evaluator: Optional[Callable[[np.ndarray], np.ndarray]] = None
    residual: float = float("nan")
    kind: str = ""
    extra: dict = field(default_factory=dict)
    _inverse_tree: Optional[cKDTree] = field(default=None, repr=False)

    def __call__(self, U) -> np.ndarray:
        U = reduce_coords(self.model.surface, U)
        if self.evaluator is not None:
            return self.evaluator(U)
        # nearest-node fallback
        tree = cKDTree(_embed(self.model.surface, self.nodes))
        _, idx = tree.query(_embed(self.model.surface, U))
        return self.values[idx]

    def inverse(self, P) -> np.ndarray:
        """Nearest-node inverse (accurate to the grid mesh); the tree is built lazily."""
        if self._inverse_tree is None:
            self._inverse_tree = cKDTree(_embed(self.surface, self.values))
        _, idx = self._inverse_tree.query(_embed(self.surface, reduce_coords(self.surface, P)))
        return self.nodes[idx]

    @property
    def mesh(self) -> float:
        tree = cKDTree(_embed(self.model.surface, self.nodes))
        d, _ = tree.query(tree.data, k=2)
        return float(d[:, 1].min())

    def injective_on_grid(self) -> bool:
        """No two nodes land within mesh/4 of each other."""
        tree = cKDTree(_embed(self.surface, self.values))
        d, _ = tree.query(tree.data, k=2)
        return bool(d[:, 1].min() >= self.mesh / 4)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "surface": self.surface.value, "shape": list(self.shape),
                "model": self.model.to_dict(), "residual": self.residual,
                "nodes": self.nodes.tolist(), "values": self.values.tolist()}


def _embed(surface: Surface, X: np.ndarray) -> np.ndarray:
    """Coordinates for nearest-neighbour search (periodic directions embedded as circles)."""
    if surface is Surface.SPHERE or surface is Surface.PLANE:
        return X
    cols = []
    for k in range(X.shape[1]):
        periodic = k == 1 or surface in (Surface.TORUS, Surface.KLEIN)
        if periodic:
            a = 2 * math.pi * X[:, k]
            cols += [np.cos(a) / (2 * math.pi), np.sin(a) / (2 * math.pi)]
        else:
            cols.append(X[:, k])
    return np.column_stack(cols)


def conjugacy_residual(h: ConjugacyMap, f: SurfaceMap, model: Optional[SurfaceMap] = None) -> float:
    """sup over grid nodes u of d(h(model(u)), f(h(u)))."""
    model = model or h.model
    lhs = h(model.forward_array(h.nodes))
    rhs = f.forward_array(h.values)
    return float(distances(h.surface, lhs, rhs).max())


def _finish(h: ConjugacyMap, f: SurfaceMap, tolerance: Optional[float]) -> ConjugacyMap:
    h.residual = conjugacy_residual(h, f)
    if tolerance is not None and not h.residual <= tolerance:
        raise ResidualTooLarge(f"residual {h.residual:.3g} exceeds {tolerance:.3g}", h.residual)
    return h


# ---------------------------------------------------------------------------
# pushing many points by individual iterate counts


def push(f: SurfaceMap, P: np.ndarray, counts: np.ndarray) -> np.ndarray:
    """Row k of P mapped by f^counts[k] (counts may be negative)."""
    P = reduce_coords(f.surface, P)
    counts = np.asarray(counts, dtype=int)
    out = P.copy()
    for sign, step in ((1, f.step_forward), (-1, f.step_inverse)):
        idx = np.flatnonzero(sign * counts > 0)
        if idx.size == 0:
            continue
        idx = idx[np.argsort(sign * counts[idx], kind="stable")]
        need = sign * counts[idx]
        cur = P[idx]
        start = 0
        for k in range(1, int(need[-1]) + 1):
            cur[start:] = step(cur[start:])
            while start < need.size and need[start] == k:
                start += 1
        out[idx] = cur
    return out


def sample_orbits(f: SurfaceMap, bases: np.ndarray, base_index: np.ndarray,
                  counts: np.ndarray) -> np.ndarray:
    """f^counts[k](bases[base_index[k]]) for many requests sharing few base points.

    All bases are iterated together once up to the largest |count| in each
    direction, so the cost is independent of the number of requests.
    """
    bases = reduce_coords(f.surface, bases)
    base_index = np.asarray(base_index, dtype=int)
    counts = np.asarray(counts, dtype=int)
    out = bases[base_index].copy()
    for sign, step in ((1, f.step_forward), (-1, f.step_inverse)):
        req = np.flatnonzero(sign * counts > 0)
        if req.size == 0:
            continue
        req = req[np.argsort(sign * counts[req], kind="stable")]
        need = sign * counts[req]
        cur = bases.copy()
        j = 0
        for k in range(1, int(need[-1]) + 1):
            cur = step(cur)
            j1 = j
            while j1 < need.size and need[j1] == k:
                j1 += 1
            if j1 > j:
                sel = req[j:j1]
                out[sel] = cur[base_index[sel]]
                j = j1
    return out


def _unique_rows(X: np.ndarray, decimals: int = 12):
    _, first, inv = np.unique(np.round(X, decimals), axis=0, return_index=True,
                              return_inverse=True)
    return X[first], inv.ravel()


# ---------------------------------------------------------------------------
# rotation about a fixed point


def chart_rotation_number(f: SurfaceMap, center, y, horizon: int = 4096) -> float:
    """Mean angular step (turns) of the orbit of y around a fixed point, weighted average.

    Result in (-1/2, 1/2]; the sign follows the chart orientation at ``center``.
    """
    c = _point_array(f.surface, center)
    pts = orbit_array(f, reduce_coords(f.surface, y), 0, horizon)[:, 0, :]
    ang = angle_turns(chart_log(f.surface, c, pts))
    steps = np.diff(ang)
    steps -= np.round(steps)
    return float(weighted_average(steps))


def _rodrigues(axis: np.ndarray, P: np.ndarray, turns: np.ndarray) -> np.ndarray:
    a = 2 * math.pi * np.asarray(turns)
    c, s = np.cos(a)[:, None], np.sin(a)[:, None]
    k = axis[None, :]
    return P * c + np.cross(k, P) * s + k * (P @ axis)[:, None] * (1 - c)


def _rotate_in_chart(surface: Surface, center: np.ndarray, P: np.ndarray, turns) -> np.ndarray:
    if surface is Surface.SPHERE:
        return _rodrigues(center, P, np.broadcast_to(turns, P.shape[:1]))
    U = chart_log(surface, center, P)
    a = 2 * math.pi * np.asarray(turns)
    c, s = np.cos(a), np.sin(a)
    V = np.column_stack([c * U[:, 0] - s * U[:, 1], s * U[:, 0] + c * U[:, 1]])
    return reduce_coords(surface, center + V)


# ---------------------------------------------------------------------------
# invariant circles


def invariant_circle(f: SurfaceMap, x, seed_radius: float = 0.2, bins: int = 256,
                     net: int = 256, max_iter: int = 3000, window: int = 100,
                     max_radius: Optional[float] = None) -> Curve:
    """Outer boundary of the union of iterates of a small disc around a fixed point.

    The boundary net of B(x, seed_radius) is pushed forward and backward; the
    filled union is tracked as its maximal radius per angle bin in a chart
    centred at x.  The union is declared stationary when that envelope stops
    moving for ``window`` iterations.
    """
    surface = f.surface
    c = _point_array(surface, x)
    if float(distances(surface, f.forward_array(c[None, :]), c[None, :])[0]) > 1e-6:
        raise PreconditionError("invariant_circle needs a fixed point")
    if max_radius is None:
        max_radius = min(3.0 * seed_radius, 0.9 * math.pi if surface is Surface.SPHERE else 0.45)
    angles = np.linspace(0, 2 * math.pi, net, endpoint=False)
    ring = perturb(surface, np.repeat(c[None, :], net, axis=0), seed_radius, angles)
    envelope = np.zeros(bins)
    step_res = 2 * math.pi * seed_radius / bins

    def absorb(P):
        U = chart_log(surface, c, P)
        r = np.hypot(U[:, 0], U[:, 1])
        b = np.minimum((angle_turns(U) * bins).astype(int), bins - 1)
        np.maximum.at(envelope, b, r)
        return float(r.max())

    absorb(ring)
    fwd, bwd = ring, ring
    quiet = 0
    for it in range(max_iter):
        before = envelope.copy()
        fwd = f.step_forward(fwd)
        bwd = f.step_inverse(bwd)
        rmax = max(absorb(fwd), absorb(bwd))
        if rmax > max_radius:
            raise NotStationary(f"iterates of the disc left radius {max_radius:.3g} "
                                f"after {it + 1} steps")
        if np.all(envelope > 0) and np.max(envelope - before) < 0.05 * step_res:
            quiet += 1
            if quiet >= window:
                break
        else:
            quiet = 0
    else:
        raise NotStationary(f"union not stationary after {max_iter} iterations")
    theta = (np.arange(bins) + 0.5) / bins * 2 * math.pi
    U = envelope[:, None] * np.column_stack([np.cos(theta), np.sin(theta)])
    samples = chart_exp(surface, c, U)
    gaps = distances(surface, samples, np.roll(samples, -1, axis=0))
    return Curve(surface, samples, True, float(gaps.max()), c, envelope)


def curve_circle_map(f: SurfaceMap, curve: Curve) -> CircleMap:
    """The restriction of f to a star-shaped invariant curve, in angle coordinates."""
    surface, c, R = f.surface, curve.center, curve.radii
    bins = R.size
    theta = (np.arange(bins) + 0.5) / bins

    def gamma(u):
        u = np.asarray(u, dtype=float) % 1.0
        r = np.interp(u, theta, R, period=1.0)
        a = 2 * math.pi * u
        return chart_exp(surface, c, r[:, None] * np.column_stack([np.cos(a), np.sin(a)]))

    def raw(u):
        return angle_turns(chart_log(surface, c, f.forward_array(gamma(u)))) - np.asarray(u) % 1.0

    ref = float(np.median((raw(theta) + 0.5) % 1.0 - 0.5))

    def lift(x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        d = raw(x)
        d = ref + ((d - ref + 0.5) % 1.0 - 0.5)
        return x + d

    return CircleMap(lift)


# ---------------------------------------------------------------------------
# transversal arcs


def _geodesic(surface: Surface, a: np.ndarray, b: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """Points at fraction tau along the minimizing path from rows of a to rows of b."""
    tau = np.asarray(tau, dtype=float)
    if surface is Surface.SPHERE:
        cosw = np.clip(np.einsum("ij,ij->i", a, b), -1.0, 1.0)
        w = np.arccos(cosw)
        ortho = b - cosw[:, None] * a
        n = np.linalg.norm(ortho, axis=1)
        if np.any(n < 1e-12):
            e1, _ = _tangent(a)
            ortho = np.where((n < 1e-12)[:, None], e1, ortho)
            n = np.linalg.norm(ortho, axis=1)
        u = ortho / n[:, None]
        return np.cos(tau * w)[:, None] * a + np.sin(tau * w)[:, None] * u
    D = b - a
    if surface in (Surface.TORUS, Surface.KLEIN):
        D = D - np.round(D)
    return reduce_coords(surface, a + tau[:, None] * D)


def _tangent(X):
    from .orbit_analysis import tangent_frame

    return tangent_frame(X)


def orbit_labels(f: SurfaceMap, center: np.ndarray, P: np.ndarray, horizon: int = 256) -> np.ndarray:
    """Rotation-invariant radial label: weighted mean distance to ``center`` along each orbit."""
    surface = f.surface
    C = center[None, :]
    w = smooth_weights(horizon)
    acc = np.zeros(P.shape[0])
    Q = reduce_coords(surface, P)
    for k in range(horizon):
        acc += w[k] * distances(surface, Q, np.repeat(C, Q.shape[0], axis=0))
        Q = f.step_forward(Q)
    return acc


def transversal_arc(f: SurfaceMap, north, south, levels: int = 5, initial: int = 8,
                    label_horizon: int = 256, bisection_steps: int = 30) -> TransversalArc:
    """Monotone chain from north to south, refined ``levels`` times by mid-label insertion."""
    surface = f.surface
    N = _point_array(surface, north)
    S = _point_array(surface, south)
    tau = np.linspace(0.0, 1.0, initial + 1)
    pts = _geodesic(surface, np.repeat(N[None, :], tau.size, 0),
                    np.repeat(S[None, :], tau.size, 0), tau)
    labels = orbit_labels(f, N, pts, label_horizon)
    noise = 1e-9
    gaps = np.diff(labels)
    if np.any(gaps <= noise):
        k = int(np.argmin(gaps))
        raise ChainStuck(f"initial chain not monotone at link {k}", level=0, gap=float(gaps[k]))
    history = [{"level": 0, "count": int(pts.shape[0]),
                "mu": float(distances(surface, pts[:-1], pts[1:]).max())}]
    for level in range(1, levels + 1):
        a, b = pts[:-1], pts[1:]
        la, lb = labels[:-1], labels[1:]
        target = 0.5 * (la + lb)
        lo = np.zeros(a.shape[0])
        hi = np.ones(a.shape[0])
        for _ in range(bisection_steps):
            mid = 0.5 * (lo + hi)
            lm = orbit_labels(f, N, _geodesic(surface, a, b, mid), label_horizon)
            below = lm < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        new = _geodesic(surface, a, b, 0.5 * (lo + hi))
        lnew = orbit_labels(f, N, new, label_horizon)
        ok = (lnew - la > noise) & (lb - lnew > noise)
        if not ok.all():
            k = int(np.flatnonzero(~ok)[0])
            raise ChainStuck(f"no admissible point between links at level {level}",
                             level=level, gap=float(lb[k] - la[k]))
        merged = np.empty((pts.shape[0] + new.shape[0], pts.shape[1]))
        merged[0::2] = pts
        merged[1::2] = new
        ml = np.empty(merged.shape[0])
        ml[0::2] = labels
        ml[1::2] = lnew
        pts, labels = merged, ml
        history.append({"level": level, "count": int(pts.shape[0]),
                        "mu": float(distances(surface, pts[:-1], pts[1:]).max())})
    return TransversalArc(surface, pts, labels, history)


# ---------------------------------------------------------------------------
# elliptic conjugacy


def _closest_returns_1d(rho: float, n_return: int):
    n = np.arange(-n_return, n_return + 1)
    phase = (n * rho) % 1.0
    order = np.argsort(phase)
    return n[order], phase[order]


def _nearest_return(table, targets: np.ndarray):
    """n with n * rho closest to each target (mod 1), and the offset target - n * rho."""
    ns, phase = table
    t = np.asarray(targets) % 1.0
    j = np.searchsorted(phase, t)
    cand = np.stack([(j - 1) % phase.size, j % phase.size])
    off = t[None, :] - phase[cand]
    off -= np.round(off)
    best = np.argmin(np.abs(off), axis=0)
    pick = cand[best, np.arange(t.size)]
    return ns[pick], off[best, np.arange(t.size)]


def _is_rational(x: float, max_den: int = 512, tol: float = 1e-9) -> bool:
    fr = Fraction(x).limit_denominator(max_den)
    return abs(x - fr.numerator / fr.denominator) < tol


def elliptic_conjugacy(f: SurfaceMap, grid: int = 64, n_return: int = N_RETURN,
                       levels: int = 5, tolerance: Optional[float] = None,
                       fixed: Optional[np.ndarray] = None) -> ConjugacyMap:
    """Polar conjugacy h(r, theta) = g_theta(x(r)) from the model rotation to f.

    The model is the rigid rotation about the z-axis; its polar grid uses
    r = colatitude / pi (cell centres) and theta in turns.
    """
    if f.surface is not Surface.SPHERE:
        raise PreconditionError("elliptic conjugacy is defined on the sphere")
    if fixed is None:
        census = fixed_points(f)
        if census.count != 2 or census.continuum:
            raise PreconditionError(f"expected two fixed points, found {census.count}")
        fixed = census.points
    north, south = fixed[0], fixed[1]
    arc = transversal_arc(f, north, south, levels=levels)
    probe = arc.samples[arc.samples.shape[0] // 2]
    rho = chart_rotation_number(f, north, probe)
    if _is_rational(rho % 1.0):
        raise PreconditionError(f"rotation number {rho:.12g} is rational; "
                                "closest returns cannot sample the group")
    # chord-length parametrization of the arc
    seg = distances(Surface.SPHERE, arc.samples[:-1], arc.samples[1:])
    s_arc = np.concatenate([[0.0], np.cumsum(seg)]) / seg.sum()
    table = _closest_returns_1d(rho, n_return)
    model = elliptic_rotation(rho)
    model_north = np.array([0.0, 0.0, 1.0])

    def x_of_r(r):
        i = np.clip(np.searchsorted(s_arc, r) - 1, 0, s_arc.size - 2)
        w = (r - s_arc[i]) / (s_arc[i + 1] - s_arc[i])
        P = (1 - w)[:, None] * arc.samples[i] + w[:, None] * arc.samples[i + 1]
        return P / np.linalg.norm(P, axis=1, keepdims=True)

    def evaluate(U):
        V = chart_log(Surface.SPHERE, model_north, U)
        r = np.hypot(V[:, 0], V[:, 1]) / math.pi
        theta = angle_turns(V)
        n, off = _nearest_return(table, theta)
        rs, inv = _unique_rows(r[:, None])
        P = sample_orbits(f, x_of_r(rs[:, 0]), inv, n)
        return _rotate_in_chart(Surface.SPHERE, north, P, off)

    r = (np.arange(grid) + 0.5) / grid
    th = np.arange(grid) / grid
    R, T = np.meshgrid(r, th, indexing="ij")
    a = 2 * math.pi * T.ravel()
    V = (math.pi * R.ravel())[:, None] * np.column_stack([np.cos(a), np.sin(a)])
    nodes = chart_exp(Surface.SPHERE, model_north, V)
    h = ConjugacyMap(Surface.SPHERE, model, nodes, evaluate(nodes), (grid, grid), evaluate,
                     kind="elliptic", extra={"rotation_number": rho, "arc_levels": arc.chain_levels,
                                             "north": north.tolist(), "south": south.tolist()})
    return _finish(h, f, tolerance)


# ---------------------------------------------------------------------------
# torus translations


def _integer_relation(rho: np.ndarray, bound: int = 64, tol: float = 1e-8):
    """Smallest (a, b) != 0 with a*rho1 + b*rho2 within tol of an integer, or None."""
    best = None
    for a in range(0, bound + 1):
        for b in range(-bound, bound + 1):
            if a == 0 and b <= 0:
                continue
            v = a * rho[0] + b * rho[1]
            if abs(v - round(v)) < tol and (best is None or abs(a) + abs(b) < sum(map(abs, best))):
                best = (a, b)
    return best


def _unimodular_with_row(a: int, b: int) -> np.ndarray:
    """Integer matrix of determinant 1 with first row (a, b), gcd(a, b) = 1."""
    g, x, y = _egcd(a, b)
    assert g == 1
    # a*x + b*y = 1  ->  rows (a, b), (-y, x)
    return np.array([[a, b], [-y, x]], dtype=int)


def _egcd(a, b):
    if b == 0:
        return (abs(a), 1 if a >= 0 else -1, 0)
    g, x, y = _egcd(b, a % b)
    return g, y, x - (a // b) * y


def torus_rotation_estimate(f: SurfaceMap, horizon: int = 4096) -> np.ndarray:
    tv = translation_vector(f, (0.1, 0.2), horizon, base_points=2, weighted=True)
    return tv.value - np.floor(tv.value)


def torus_translation_conjugacy(f: SurfaceMap, grid: int = 64, n_return: int = N_RETURN,
                                x0=(0.0, 0.0), tolerance: Optional[float] = None,
                                rho: Optional[np.ndarray] = None) -> ConjugacyMap:
    """phi(t) = g_t(x0) for a torus map with identity homology and non-rational rho."""
    if f.surface is not Surface.TORUS:
        raise PreconditionError("torus_translation_conjugacy needs a torus map")
    rho = torus_rotation_estimate(f) if rho is None else np.asarray(rho, dtype=float)
    if _is_rational(rho[0]) and _is_rational(rho[1]):
        raise PreconditionError(f"rotation vector {rho.tolist()} is rational (periodic map)")
    rel = _integer_relation(rho)
    if rel is None:
        return _dense_conjugacy(f, rho, grid, n_return, np.asarray(x0, float), tolerance)
    return _mixed_conjugacy(f, rho, rel, grid, n_return, np.asarray(x0, float), tolerance)


def _torus_grid(grid):
    c = np.arange(grid) / grid
    S, T = np.meshgrid(c, c, indexing="ij")
    return np.column_stack([S.ravel(), T.ravel()])


def _dense_conjugacy(f, rho, grid, n_return, x0, tolerance):
    n = np.arange(-n_return, n_return + 1)
    phase = np.outer(n, rho) % 1.0
    tree = cKDTree(phase, boxsize=[1.0, 1.0])

    def evaluate(U):
        _, j = tree.query(U % 1.0)
        off = U - phase[j]
        off -= np.round(off)
        P = sample_orbits(f, x0[None, :], np.zeros(U.shape[0], dtype=int), n[j])
        return reduce_coords(Surface.TORUS, P + off)

    nodes = _torus_grid(grid)
    h = ConjugacyMap(Surface.TORUS, torus_translation(*rho), nodes, evaluate(nodes),
                     (grid, grid), evaluate, kind="torus_dense",
                     extra={"rotation_vector": rho.tolist(), "case": "dense"})
    return _finish(h, f, tolerance)


def _mixed_conjugacy(f, rho, rel, grid, n_return, x0, tolerance):
    """rho on a rational line: q invariant annuli, conjugacy built on one and spread by f."""
    a, b = rel
    q = math.gcd(a, b)
    P = _unimodular_with_row(a // q, b // q)
    Pm = torus_affine(P)
    fp = compose(Pm, f, Pm.inverse_map())  # rotation vector P rho
    rp = (P @ rho) % 1.0
    p = int(round(rp[0] * q)) % q
    beta = float(rp[1])
    fq_steps = q

    # label: orbit mean of the lifted s-coordinate under f'^q (s-shift p per step removed)
    L = 512
    w = smooth_weights(L)

    def s_label(Y):
        Y = np.array(Y, dtype=float)
        acc = np.zeros(Y.shape[0])
        for m in range(L):
            acc += w[m] * (Y[:, 0] - m * p)
            for _ in range(fq_steps):
                Y = fp.lift_array(Y)
        return acc

    def label(Y):
        Y = np.array(Y, dtype=float)
        acc = np.zeros(Y.shape[0])
        for k in range(q):
            acc += s_label(Y) - k * p / q
            Y = fp.lift_array(Y)
        return acc / q

    y0 = np.asarray(x0, dtype=float)
    l0 = float(label(y0[None, :])[0])
    s_nodes = np.linspace(0.0, 1.0 / q, 65)

    lo = np.full(s_nodes.size, y0[0] - 1.0) + s_nodes
    hi = np.full(s_nodes.size, y0[0] + 1.0) + s_nodes
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        lm = label(np.column_stack([mid, np.full(mid.size, y0[1])]))
        below = lm < l0 + s_nodes
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    sigma = np.column_stack([0.5 * (lo + hi), np.full(s_nodes.size, y0[1])])
    sigma[0] = y0
    # closest returns of the G0 generator f'^q, rotation (0, q beta)
    table = _closest_returns_1d(q * beta, n_return // q)
    k_inv = pow(p, -1, q) if q > 1 else 0
    # offset c with f'^k(y0) = g_c(sigma(1/q))
    target = push(fp, y0[None, :] % 1.0, [k_inv])[0] if q > 1 else y0 % 1.0
    m = np.arange(0, 4096)
    circ = sample_orbits(fp, sigma[-1:] % 1.0, np.zeros(m.size, dtype=int), m * q)
    j = int(np.argmin(distances(Surface.TORUS, circ, np.repeat(target[None, :], m.size, 0))))
    c_off = (j * q * beta) % 1.0
    shift_total = ((c_off - k_inv * beta) + 0.5) % 1.0 - 0.5 if q > 1 else 0.0

    def direct(s0, t):
        # s0 in [0, 1/q): phi(s0, t) = g_{t + psi(s0)}(sigma(s0)), psi linear in s0
        i = np.clip((s0 * q * 64).astype(int), 0, 63)
        wgt = s0 * q * 64 - i
        base = (1 - wgt)[:, None] * sigma[i] + wgt[:, None] * sigma[i + 1]
        tt = t + q * s0 * shift_total
        nn, off = _nearest_return(table, tt)
        bs, inv = _unique_rows(base % 1.0)
        P = sample_orbits(fp, bs, inv, nn * q)
        return reduce_coords(Surface.TORUS, P + np.column_stack([np.zeros_like(off), off]))

    jp = {(j_ * p) % q: j_ for j_ in range(q)}

    def phi_prime(U):
        s = U[:, 0] % 1.0
        cell = np.minimum((s * q).astype(int), q - 1)
        jj = np.array([jp[int(m_)] for m_ in cell])
        s0 = s - cell / q
        Y = direct(s0, U[:, 1] - jj * beta)
        return push(fp, Y, jj)

    Pinv = torus_affine(np.round(np.linalg.inv(P)).astype(int))

    def evaluate(U):
        return Pinv.forward_array(phi_prime((U @ P.T) % 1.0))

    nodes = _torus_grid(grid)
    closure = orbit_closure(f, y0[None, :] % 1.0, horizon=2000, cluster_eps=0.01)
    comps = int(component_labels(Surface.TORUS, closure.points, 0.05).max() + 1)
    h = ConjugacyMap(Surface.TORUS, torus_translation(*rho), nodes, evaluate(nodes), (grid, grid),
                     evaluate, kind="torus_mixed",
                     extra={"rotation_vector": rho.tolist(), "case": "mixed", "q": q,
                            "relation": [a, b], "annulus_count": comps})
    return _finish(h, f, tolerance)


# ---------------------------------------------------------------------------
# reversing torus maps and the Klein bottle


S_SAMPLES = 1024


def _s_grid(n: int = S_SAMPLES) -> np.ndarray:
    return -0.5 + np.arange(n) / n


def _fiber_table(g: SurfaceMap, s: np.ndarray, expect_s) -> np.ndarray:
    """t-displacement a(s) of a lift of the form (s, t) -> (expect_s(s), t + a(s))."""
    Y = g.lift_array(np.column_stack([s, np.zeros_like(s)]))
    ds = Y[:, 0] - expect_s(s)
    if np.max(np.abs(ds - np.round(ds))) > 1e-6:
        raise PreconditionError("map is not of the fibred form (s, t) -> (i(s), t + a(s))")
    return Y[:, 1]


def _mod1_gap(x: float) -> float:
    """Distance of x to the nearest integer."""
    return abs(x - round(x))


def _sym_index(n: int) -> np.ndarray:
    """Index of -s on the symmetric grid -1/2 + k/n."""
    k = np.arange(n)
    return (n - k) % n


def reversing_normalization(f: SurfaceMap, type: int = 1, tol: float = 1e-3) -> ConjugacyMap:
    """B(s, t) = (s, t + beta(s)) with B^-1 f B equal to the type-1 or type-2 model.

    f must already read f(s, t) = (-s, t + a(s)).
    """
    if type not in (1, 2):
        raise ValueError("type must be 1 or 2")
    s = _s_grid()
    a = _fiber_table(f, s, lambda s: -s)
    a0 = float(_fiber_table(f, np.array([0.0]), lambda s: -s)[0])
    ahalf = float(_fiber_table(f, np.array([0.5]), lambda s: -s)[0])
    gap = (a0 - ahalf) % 1.0
    if _mod1_gap(gap) < tol:
        case = 1
    elif abs(gap - 0.5) < tol:
        case = 2
    else:
        raise ContinuityGapAtHalf(f"a(0) - a(1/2) = {gap:.6g} mod 1 is neither 0 nor 1/2")
    if case != type:
        raise ContinuityGapAtHalf(f"continuity gap says type {case}, requested type {type}")
    neg = s < 0
    beta = np.where(neg, a0 - a, 0.0 if case == 1 else s)
    # value approached at s -> 1/2 from the left, for the degree of beta
    right = 0.0 if case == 1 else 0.5
    degree = int(round(right - beta[0]))
    B = TorusFiberShift(beta, degree=degree, s0=-0.5)
    model = torus_reversing_type1(a0) if case == 1 else torus_reversing_type2(a0)
    # functional identity on the s-grid, mod 1
    rhs = a0 if case == 1 else s + a0
    ident = a + beta - B.table(-s) - rhs
    ident = np.abs(ident - np.round(ident))
    h = ConjugacyMap(Surface.TORUS, model, _torus_grid(64), B.forward_array(_torus_grid(64)),
                     (64, 64), B.forward_array, kind=f"reversing_type{case}",
                     extra={"case": case, "alpha": a0 % 1.0, "beta": beta.tolist(),
                            "degree": degree, "identity_error": float(ident.max()),
                            "gap": gap})
    return _finish(h, f, None)


def klein_normalization(f: SurfaceMap, theta: Optional[SurfaceMap] = None,
                        tol: float = 1e-3) -> ConjugacyMap:
    """B(s, t) = (s, t + beta(s)) taking (theta, f+) to (theta0, Phi or Psi).

    ``f`` is a Klein-bottle map given by its orientation-preserving torus lift
    (or the torus lift itself); ``theta`` is the covering involution in the
    same coordinates, (s, t) -> (-s, t + a(s)), defaulting to theta0.
    """
    fplus = f.cover_map if isinstance(f, QuotientLiftMap) else f
    if fplus.surface is not Surface.TORUS:
        raise PreconditionError("klein_normalization needs a torus lift")
    s = _s_grid()
    n = s.size
    # commutation of the lift with the involution
    probe = np.random.default_rng(0).random((64, 2))
    th_fwd = theta.forward_array if theta is not None else theta0
    lhs = fplus.forward_array(th_fwd(probe))
    rhs = th_fwd(fplus.forward_array(probe))
    if distances(Surface.TORUS, reduce_coords(Surface.TORUS, lhs),
                 reduce_coords(Surface.TORUS, rhs)).max() > 1e-6:
        raise ThetaCommutationFailure("the lift does not commute with the covering involution")
    # stage 1: move theta to theta0
    if theta is None:
        beta0 = np.zeros(n)
        deg0 = 0
    else:
        at = _fiber_table(theta, s, lambda s: -s)
        a_0 = float(_fiber_table(theta, np.array([0.0]), lambda s: -s)[0])
        a_h = float(_fiber_table(theta, np.array([0.5]), lambda s: -s)[0])
        if _mod1_gap(a_0 - 0.5) > tol or _mod1_gap(a_h - 0.5) > tol:
            raise ContinuityGapAtHalf(f"involution offsets a(0)={a_0:.6g}, a(1/2)={a_h:.6g} "
                                      "are not both 1/2")
        beta0 = np.where(s < 0, 0.5 - at, 0.0)
        beta0 = beta0 - np.round(beta0[n // 2 - 1]) * (s < 0)  # continuity at 0
        deg0 = int(round(0.0 - beta0[0]))
    B0 = TorusFiberShift(beta0, degree=deg0, s0=-0.5)
    f1 = compose(B0.inverse_map(), fplus, B0)
    Y = f1.lift_array(np.column_stack([s, np.zeros(n)]))
    shift = Y[:, 0] - s
    c = float(np.median(shift - np.floor(shift)))
    if abs(c - 0.5) < 1e-3:
        case = "psi"
    elif min(c, 1 - c) < 1e-3:
        case = "phi"
    else:
        raise PreconditionError(f"lift moves fibres by {c:.6g}, expected 0 or 1/2")
    a1 = Y[:, 1]
    if case == "phi":
        alpha = float(a1[n // 2])
        beta1 = np.zeros(n)
    else:
        # s-grid shifted to [0, 1): beta1 cancels a1(s) - alpha against beta1(s + 1/2)
        u = s % 1.0
        order = np.argsort(u)
        a_u = a1[order]
        alpha = float(a_u[n // 4])
        d = a_u - alpha
        d = d - np.round(d)
        uu = u[order]
        beta_u = np.zeros(n)
        q1 = (uu >= 0.25) & (uu < 0.5)
        q2 = (uu >= 0.5) & (uu < 0.75)
        beta_u[q1] = np.interp(0.5 - uu[q1], uu, d)
        beta_u[q2] = np.interp(uu[q2] - 0.5, uu, d)
        beta1 = np.empty(n)
        beta1[order] = beta_u
    beta = beta0 + beta1
    B = TorusFiberShift(beta, degree=deg0, s0=-0.5)
    if theta is not None:
        conj = compose(B.inverse_map(), theta, B).forward_array(probe)
        if distances(Surface.TORUS, conj, theta0(probe)).max() > tol:
            raise ThetaCommutationFailure("B^-1 theta B differs from theta0")
    alpha = alpha % 1.0
    model_lift = klein_phi(alpha).cover_map if case == "phi" else klein_psi(alpha).cover_map
    nodes = _torus_grid(64)
    h = ConjugacyMap(Surface.TORUS, model_lift, nodes, B.forward_array(nodes), (64, 64),
                     B.forward_array, kind=f"klein_{case}",
                     extra={"case": case, "alpha": alpha, "beta": beta.tolist()})
    return _finish(h, fplus, None)
