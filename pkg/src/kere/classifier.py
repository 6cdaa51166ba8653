"""Decision procedures: from computed invariants to a conjugacy class."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .conjugacy_builder import (chart_rotation_number, curve_circle_map, invariant_circle,
                                torus_rotation_estimate)
from .errors import BudgetExceeded, KereError, NonIntegerHolonomy, NotDegreeOne, NotStationary
from .metric_space import Surface, min_distance_to_set, reduce_coords
from .orbit_analysis import (fixed_points, is_recurrent_map, singular_set, surface_grid)
from .rotation_invariants import (rotation_number, translation_vector, weighted_average)
from .surface_maps import (PRESERVING, LiftMap, QuotientLiftMap, SurfaceMap, compose,
                           homology_matrix_of, power, torus_affine)

CLASSES = ("Identity", "Periodic", "Elliptic", "Parabolic", "Hyperbolic", "Reflection",
           "SemiHyperbolic", "SemiParabolic", "SemiElliptic", "TorusTranslation",
           "TorusReversingType1", "TorusReversingType2", "KleinPhi", "KleinPsi",
           "AnnulusRotation", "AnnulusReversing", "MobiusStrip", "NotRegular", "Undetermined")

T1 = np.array([[-1, 0], [0, 1]])
T2 = np.array([[-1, 0], [1, 1]])


@dataclass
class Budget:
    grid: int = 64
    horizon: int = 300
    eps: float = 0.1
    threshold: float = 0.2
    samples: int = 8
    seed: int = 0
    period_max: int = 512
    period_tol: float = 1e-6
    conjugator_bound: int = 3
    rotation_horizon: int = 4096
    circle_horizon: int = 1000
    spread_tol: float = 0.02
    large_cluster: float = 0.10  # fraction of the grid


@dataclass
class ClassificationResult:
    surface: Surface
    cls: str
    params: dict = field(default_factory=dict)
    evidence: dict = field(default_factory=dict)
    confidence: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if not self.params:
            return self.cls
        vals = []
        for v in self.params.values():
            if isinstance(v, (list, tuple)):
                vals.append("(" + ", ".join(f"{x:.6g}" for x in v) + ")")
            elif isinstance(v, float):
                vals.append(f"{v:.6g}")
            else:
                vals.append(str(v))
        return f"{self.cls}({', '.join(vals)})"

    def to_dict(self) -> dict:
        return {"surface": self.surface.value, "class": self.cls, "params": self.params,
                "evidence": self.evidence, "confidence": self.confidence}


def canonical_parameter(cls: str, value):
    """Representative of a class parameter modulo the conjugacies within the family.

    Rotations and the reversing torus/Klein/annulus models are conjugate to
    their mirror images (t -> -t), so alpha is folded to [0, 1/2]; the type-2
    torus model is also conjugate under alpha -> alpha + 1/2, giving [0, 1/4].
    """
    if cls in ("Elliptic", "TorusReversingType1", "KleinPhi", "KleinPsi",
               "AnnulusRotation", "AnnulusReversing", "MobiusStrip"):
        a = float(value) % 1.0
        return min(a, 1.0 - a)
    if cls == "TorusReversingType2":
        a = float(value) % 0.5
        return min(a, 0.5 - a)
    if cls == "SemiElliptic":
        a = float(value) % 0.5
        return min(a, 0.5 - a)
    if cls == "TorusTranslation":
        v = np.asarray(value, dtype=float)
        return (v - np.floor(v)).tolist()
    return value


def _result(surface, cls, params=None, **evidence) -> ClassificationResult:
    params = dict(params or {})
    for k, v in list(params.items()):
        if k in ("alpha", "theta", "rho"):
            params[k] = canonical_parameter(cls, v)
    return ClassificationResult(surface, cls, params, evidence)


def _periodicity(f: SurfaceMap, budget: Budget):
    grid, cell = surface_grid(f.surface, min(budget.grid, 32))
    if f.surface is not Surface.SPHERE:
        # cell centres are rational points, which are periodic for every integer matrix
        jitter = np.random.default_rng(budget.seed).uniform(-0.25, 0.25, grid.shape) * cell
        grid = reduce_coords(f.surface, grid + jitter)
    found, n = is_recurrent_map(f, grid, budget.period_max, budget.period_tol)
    return n if found else None


def _periodic_result(f, n, **evidence):
    if n == 1:
        return _result(f.surface, "Identity", **evidence)
    return _result(f.surface, "Periodic", {"n": int(n)}, **evidence)


# ---------------------------------------------------------------------------
# sphere


def _elliptic_alpha(f: SurfaceMap, center: np.ndarray, budget: Budget):
    """Rotation number on an invariant circle around a fixed point; falls back to a nearby orbit."""
    try:
        curve = invariant_circle(f, center, seed_radius=0.2)
        rn = rotation_number(curve_circle_map(f, curve), 0.0, budget.circle_horizon,
                             weighted=True)
        return rn.value, "invariant_circle"
    except (NotStationary, NotDegreeOne) as exc:
        from .orbit_analysis import perturb

        y = perturb(Surface.SPHERE, center[None, :], 0.2, 0.0)
        try:
            return chart_rotation_number(f, center, y, budget.rotation_horizon), "orbit_fallback"
        except KereError:
            raise BudgetExceeded(f"no rotation estimate ({exc})") from exc


def classify_sphere(f: SurfaceMap, budget: Optional[Budget] = None) -> ClassificationResult:
    budget = budget or Budget()
    if f.surface is not Surface.SPHERE:
        raise ValueError("classify_sphere needs a sphere map")
    preserving = f.orientation == PRESERVING
    if preserving:
        n = _periodicity(f, budget)
        if n is not None:
            return _periodic_result(f, n, period_tolerance=budget.period_tol)
    sing = singular_set(f, budget.grid, budget.eps, budget.horizon, budget.threshold,
                        budget.samples, budget.seed)
    all_clusters = sing.clusters(3.0)
    all_centers = sing.cluster_centers(3.0)
    census = fixed_points(f)
    biggest = max((c.shape[0] for c in all_clusters), default=0) / sing.grid.shape[0]
    # The singular set of a regular map is made of fixed points, and a conformal
    # map is locally isometric near a fixed point, so a flagged patch holding no
    # fixed point is a finite-horizon artifact of strong but bounded distortion.
    keep = []
    for c in all_clusters:
        if census.continuum or census.count == 0:
            keep.append(census.continuum)
            continue
        gap = float(min_distance_to_set(Surface.SPHERE, census.points, c).min())
        keep.append(gap <= 3.0 * sing.cell)
    clusters = [c for c, k in zip(all_clusters, keep) if k]
    centers = all_centers[np.array(keep, dtype=bool)] if keep else all_centers
    sizes = [int(c.shape[0]) for c in clusters]
    evidence = {"singular_fraction": sing.fraction, "singular_clusters": len(clusters),
                "cluster_sizes": sizes, "singular_points": centers.tolist(),
                "discarded_clusters": [_mean(c) for c, k in zip(all_clusters, keep) if not k],
                "fixed_points": census.points.tolist(), "fixed_point_continuum": census.continuum,
                "budget": vars(budget).copy()}
    confidence = {"largest_cluster_fraction": biggest,
                  "large_cluster_margin": budget.large_cluster - biggest}
    if len(clusters) > 2 or biggest > budget.large_cluster:
        return _with(_result(f.surface, "NotRegular", **evidence), confidence)
    k = len(clusters)
    try:
        if preserving:
            if k == 0:
                if census.count < 1:
                    raise BudgetExceeded("no fixed point found for an elliptic candidate")
                alpha, how = _elliptic_alpha(f, census.points[0], budget)
                evidence["rotation_source"] = how
                return _with(_result(f.surface, "Elliptic", {"alpha": alpha}, **evidence),
                             confidence)
            return _with(_result(f.surface, "Parabolic" if k == 1 else "Hyperbolic",
                                 **evidence), confidence)
        if k == 1:
            return _with(_result(f.surface, "SemiParabolic", **evidence), confidence)
        if k == 2:
            return _with(_result(f.surface, "SemiHyperbolic", **evidence), confidence)
        if census.continuum:
            return _with(_result(f.surface, "Reflection", **evidence), confidence)
        if census.count == 0:
            f2 = power(f, 2)
            c2 = fixed_points(f2)
            if c2.count < 1 or c2.continuum:
                raise BudgetExceeded("square of a semi-elliptic candidate has no isolated fixed point")
            rho2, how = _elliptic_alpha(f2, c2.points[0], budget)
            evidence["rotation_source"] = how
            theta = canonical_parameter("Elliptic", rho2) / 2.0
            return _with(_result(f.surface, "SemiElliptic", {"theta": theta}, **evidence),
                         confidence)
        return _with(_result(f.surface, "Undetermined",
                             reason=f"reversing map with {census.count} isolated fixed points "
                                    "and no singular cluster", **evidence), confidence)
    except BudgetExceeded as exc:
        return _with(_result(f.surface, "Undetermined", reason=str(exc), **evidence), confidence)


def _mean(c: np.ndarray) -> list:
    m = c.mean(axis=0)
    return (m / np.linalg.norm(m)).tolist()


def _with(res: ClassificationResult, confidence: dict) -> ClassificationResult:
    res.confidence.update(confidence)
    return res


# ---------------------------------------------------------------------------
# torus


def find_conjugator(A: np.ndarray, bound: int = 3):
    """Integer P with |entries| <= bound, det P = +-1 and P A P^-1 in {T1, T2}."""
    A = np.asarray(A, dtype=int)
    rng = range(-bound, bound + 1)
    cands = [np.eye(2, dtype=int)] + [np.array([[a, b], [c, d]]) for a, b, c, d in
                                      itertools.product(rng, repeat=4)]
    for P in cands:
        det = P[0, 0] * P[1, 1] - P[0, 1] * P[1, 0]
        if det not in (1, -1):
            continue
        Pinv = det * np.array([[P[1, 1], -P[0, 1]], [-P[1, 0], P[0, 0]]])
        B = P @ A @ Pinv
        if np.array_equal(B, T1):
            return P, 1
        if np.array_equal(B, T2):
            return P, 2
    return None, None


def _t_rotation(fp: SurfaceMap, horizon: int) -> float:
    """Weighted mean t-displacement of the lift along an orbit (alpha of a reversing model)."""
    X = np.array([[0.1, 0.2]])
    steps = np.empty(horizon)
    for k in range(horizon):
        Y = fp.lift_array(X)
        steps[k] = Y[0, 1] - X[0, 1]
        X = Y - np.floor(Y)
    return float(weighted_average(steps)) % 1.0


def classify_torus(f: SurfaceMap, budget: Optional[Budget] = None) -> ClassificationResult:
    budget = budget or Budget()
    try:
        A = homology_matrix_of(f)
    except NonIntegerHolonomy as exc:
        return _result(f.surface, "Undetermined", reason=str(exc))
    det = int(round(np.linalg.det(A)))
    evidence = {"homology_matrix": A.tolist(), "determinant": det,
                "orientation": f.orientation, "budget": vars(budget).copy()}
    n = _periodicity(f, budget)
    if n is not None:
        return _periodic_result(f, n, **evidence)
    if np.array_equal(A, np.eye(2, dtype=int)):
        tv = translation_vector(f, (0.1, 0.2), 1000)
        evidence.update(translation_vector=tv.value.tolist(), spread=tv.spread,
                        spread_bound=tv.bound)
        conf = {"spread_margin": budget.spread_tol - tv.spread}
        if tv.spread > budget.spread_tol:
            return _with(_result(f.surface, "NotRegular", **evidence), conf)
        rho = torus_rotation_estimate(f, budget.rotation_horizon)
        return _with(_result(f.surface, "TorusTranslation", {"rho": rho.tolist()}, **evidence),
                     conf)
    if det == -1:
        P, kind = find_conjugator(A, budget.conjugator_bound)
        if P is None:
            return _result(f.surface, "Undetermined",
                           reason=f"no conjugator with entries in [-{budget.conjugator_bound}, "
                                  f"{budget.conjugator_bound}]", **evidence)
        Pm = torus_affine(P)
        fp = compose(Pm, f, Pm.inverse_map())
        tv2 = translation_vector(power(fp, 2), (0.1, 0.2), 1000)
        theta2 = tv2.value
        evidence.update(conjugator=P.tolist(), theta_square=theta2.tolist(), spread=tv2.spread)
        conf = {"spread_margin": budget.spread_tol - tv2.spread,
                "eigen_margin": budget.spread_tol - abs(theta2[0] - round(theta2[0]))}
        if tv2.spread > budget.spread_tol or abs(theta2[0] - round(theta2[0])) > budget.spread_tol:
            return _with(_result(f.surface, "NotRegular", **evidence), conf)
        alpha = _t_rotation(fp, budget.rotation_horizon)
        evidence["alpha_from_square"] = (theta2[1] / 2.0) % 0.5
        cls = "TorusReversingType1" if kind == 1 else "TorusReversingType2"
        return _with(_result(f.surface, cls, {"alpha": alpha}, **evidence), conf)
    order = next((k for k in range(2, 13)
                  if np.array_equal(np.linalg.matrix_power(A, k), np.eye(2, dtype=int))), None)
    if order is not None:
        return _result(f.surface, "Undetermined",
                       reason=f"finite-order homology (order {order}) but no period <= "
                              f"{budget.period_max} found", **evidence)
    return _result(f.surface, "NotRegular", reason="homology matrix of infinite order",
                   **evidence)


# ---------------------------------------------------------------------------
# Klein bottle


class _Cover(LiftMap):
    """The torus map carried by the lift of a Klein-bottle map."""

    def __init__(self, f: SurfaceMap):
        super().__init__(Surface.TORUS, "cover", {}, f.orientation)
        self.base = f

    def _lift(self, X):
        return self.base.lift_array(X)

    def _lift_inverse(self, X):
        return self.base.lift_inverse_array(X)


def _klein_plus(f: SurfaceMap) -> SurfaceMap:
    if isinstance(f, QuotientLiftMap):
        cover = f.cover_map
    elif f.lift_available:
        cover = _Cover(f)
    else:
        raise ValueError("Klein-bottle maps must be given by an equivariant torus lift")
    if cover.orientation == PRESERVING:
        return cover
    theta = torus_affine([[-1, 0], [0, 1]], (0.0, 0.5))
    return compose(theta, cover)


def classify_klein(f: SurfaceMap, budget: Optional[Budget] = None) -> ClassificationResult:
    budget = budget or Budget()
    fplus = _klein_plus(f)
    A = homology_matrix_of(fplus)
    evidence = {"lift_homology": A.tolist(), "budget": vars(budget).copy()}
    n = _periodicity(f, budget)
    if n is not None:
        return _periodic_result(f, n, **evidence)
    if not np.array_equal(A, np.eye(2, dtype=int)):
        return _result(f.surface, "NotRegular", reason="lift acts nontrivially on homology",
                       **evidence)
    tv = translation_vector(fplus, (0.1, 0.2), 1000)
    rho = torus_rotation_estimate(fplus, budget.rotation_horizon)
    evidence.update(rotation_vector=rho.tolist(), spread=tv.spread)
    conf = {"spread_margin": budget.spread_tol - tv.spread}
    if tv.spread > budget.spread_tol:
        return _with(_result(f.surface, "NotRegular", **evidence), conf)
    s_shift = rho[0]
    d_phi = min(s_shift, 1 - s_shift)
    d_psi = abs(s_shift - 0.5)
    conf["phi_psi_margin"] = abs(d_phi - d_psi)
    if min(d_phi, d_psi) > budget.spread_tol:
        return _with(_result(f.surface, "NotRegular",
                             reason=f"fibre shift {s_shift:.6g} is neither 0 nor 1/2",
                             **evidence), conf)
    cls = "KleinPhi" if d_phi < d_psi else "KleinPsi"
    return _with(_result(f.surface, cls, {"alpha": float(rho[1])}, **evidence), conf)


# ---------------------------------------------------------------------------
# annulus and Mobius strip, through their doubles


class DoubledMap(LiftMap):
    """The double of an annulus map, as a torus map in coordinates (u, t).

    u in [0, 1/2] is the copy s = 4u - 1 and u in [1/2, 1] the mirror copy
    s = 3 - 4u.  ``u_shift`` recentres u (a shift of -1/4 turns the Mobius
    strip involution into theta0).
    """

    def __init__(self, base: SurfaceMap, u_shift: float = 0.0):
        super().__init__(Surface.TORUS, "double", {"u_shift": u_shift}, base.orientation)
        self.base = base
        self.u_shift = float(u_shift)
        probe = np.array([[0.0, 0.0], [0.01, 0.0]])
        u0 = self._raw(probe)
        self._c0 = u0[0, 0]
        du = u0[1, 0] - u0[0, 0]
        du -= round(du)
        self._sigma = 1.0 if du > 0 else -1.0

    def _split(self, X):
        u = X[:, 0] + self.u_shift
        k = np.floor(u)
        v = u - k
        first = v <= 0.5
        s = np.where(first, 4 * v - 1, 3 - 4 * v)
        return k, first, np.column_stack([s, X[:, 1]])

    def _join(self, first, Y):
        s = np.clip(Y[:, 0], -1.0, 1.0)
        v = np.where(first, (s + 1) / 4, (3 - s) / 4)
        return v - self.u_shift

    def _raw(self, X):
        _, first, S = self._split(X)
        Y = self.base.lift_array(S)
        return np.column_stack([self._join(first, Y), Y[:, 1]])

    def _apply(self, X, inverse):
        _, first, S = self._split(X)
        Y = self.base.lift_inverse_array(S) if inverse else self.base.lift_array(S)
        v = self._join(first, Y)
        sigma = self._sigma
        c0 = self._c0
        if inverse:
            # inverse of u -> c0 + sigma u
            target = (X[:, 0] - c0) / sigma
        else:
            target = c0 + sigma * X[:, 0]
        u = v + np.round(target - v)
        return np.column_stack([u, Y[:, 1]])

    def _lift(self, X):
        return self._apply(X, False)

    def _lift_inverse(self, X):
        return self._apply(X, True)


def _double_result(res: ClassificationResult, surface: Surface, mapping: dict):
    out = mapping.get(res.cls)
    ev = {"double_class": res.cls, "double_params": res.params, **res.evidence}
    if res.cls in ("Identity", "Periodic", "NotRegular", "Undetermined"):
        return ClassificationResult(surface, res.cls, res.params, ev, res.confidence)
    if out is None:
        return ClassificationResult(surface, "Undetermined", {},
                                    {**ev, "reason": f"double classified as {res.cls}"},
                                    res.confidence)
    cls, param = out
    return ClassificationResult(surface, cls, {"alpha": canonical_parameter(cls, param(res))},
                                ev, res.confidence)


def classify_annulus(f: SurfaceMap, budget: Optional[Budget] = None) -> ClassificationResult:
    if f.surface is not Surface.ANNULUS:
        raise ValueError("classify_annulus needs an annulus map")
    D = DoubledMap(f)
    res = classify_torus(D, budget)

    def rot(r):
        rho = r.params["rho"]
        return rho[1]

    if res.cls == "TorusTranslation":
        rho_u = res.params["rho"][0]
        if min(rho_u, 1 - rho_u) > 1e-3:
            return ClassificationResult(f.surface, "Undetermined", {},
                                        {"reason": "double shifts across the boundary",
                                         **res.evidence})
    return _double_result(res, f.surface, {
        "TorusTranslation": ("AnnulusRotation", rot),
        "TorusReversingType1": ("AnnulusReversing", lambda r: r.params["alpha"]),
    })


def classify_mobius_strip(f: SurfaceMap, budget: Optional[Budget] = None) -> ClassificationResult:
    if f.surface is not Surface.MOBIUS:
        raise ValueError("classify_mobius_strip needs a Mobius-strip map")
    D = DoubledMap(f, u_shift=0.25)
    K = QuotientLiftMap(Surface.KLEIN, "double", {}, D)
    res = classify_klein(K, budget)
    return _double_result(res, f.surface, {"KleinPhi": ("MobiusStrip", lambda r: r.params["alpha"])})


def classify(f: SurfaceMap, budget: Optional[Budget] = None) -> ClassificationResult:
    return {Surface.SPHERE: classify_sphere, Surface.TORUS: classify_torus,
            Surface.KLEIN: classify_klein, Surface.ANNULUS: classify_annulus,
            Surface.MOBIUS: classify_mobius_strip}[f.surface](f, budget)
