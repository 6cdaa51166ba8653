"""Rotation numbers of circle maps and translation vectors of torus lifts."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NonTrivialHomology, NotDegreeOne
from .surface_maps import SurfaceMap, homology_matrix_of


# ---------------------------------------------------------------------------
# weighted ergodic averages


def smooth_weights(n: int) -> np.ndarray:
    """Normalized bump weights exp(-1/(t(1-t))) on n equispaced interior nodes.

    For quasi-periodic displacement sequences the weighted average converges
    much faster than the plain one (error decays faster than any power of n).
    """
    t = (np.arange(n) + 1.0) / (n + 1.0)
    w = np.exp(-1.0 / (t * (1.0 - t)))
    return w / w.sum()


def weighted_average(samples: np.ndarray) -> np.ndarray:
    """Weighted Birkhoff average along axis 0."""
    w = smooth_weights(samples.shape[0])
    return np.tensordot(w, samples, axes=(0, 0))


# ---------------------------------------------------------------------------
# circle maps


@dataclass
class CircleMap:
    """Degree-one circle map given by a lift F with F(x + 1) = F(x) + 1."""

    lift: Callable[[np.ndarray], np.ndarray]

    def forward(self, x):
        y = self.lift(np.asarray(x, dtype=float))
        return y - np.floor(y)

    @classmethod
    def rigid(cls, alpha: float) -> "CircleMap":
        return cls(lambda x: x + alpha)

    def check_degree_one(self, samples: int = 64, tol: float = 1e-9):
        x = np.linspace(0.0, 1.0, samples, endpoint=False)
        y = self.lift(x)
        if np.max(np.abs(self.lift(x + 1.0) - y - 1.0)) > tol:
            raise NotDegreeOne("lift is not periodic of degree one")
        fine = np.linspace(0.0, 1.0, 4 * samples + 1)
        if np.any(np.diff(self.lift(fine)) <= 0):
            raise NotDegreeOne("lift is not strictly increasing")


@dataclass
class RotationNumber:
    value: float
    error_bound: float
    horizon: int


def rotation_number(c: CircleMap, x0: float = 0.0, horizon: int = 10_000,
                    weighted: bool = False) -> RotationNumber:
    """(F^h(x0) - x0) / h mod 1; optionally the smoothly weighted average of the steps."""
    if horizon < 100:
        raise ValueError("horizon must be >= 100")
    c.check_degree_one()
    x = np.array([float(x0)])
    steps = np.empty(horizon)
    for k in range(horizon):
        y = c.lift(x)
        steps[k] = y[0] - x[0]
        # keep the orbit in [0, 1) so the lift is evaluated on its base domain
        x = y - np.floor(y)
    raw = float(weighted_average(steps)) if weighted else float(steps.sum() / horizon)
    return RotationNumber(raw % 1.0, 1.0 / horizon, horizon)


# ---------------------------------------------------------------------------
# torus lifts


@dataclass
class TranslationVector:
    value: np.ndarray
    horizon: int
    spread: float
    M: float  # sup of |lift(x) - x| over the visited points

    @property
    def bound(self) -> float:
        """Base-point spread bound 4 M / horizon."""
        return 4.0 * self.M / self.horizon


def _require_identity_homology(f: SurfaceMap):
    A = homology_matrix_of(f)
    if not np.array_equal(A, np.eye(2, dtype=int)):
        raise NonTrivialHomology(f"homology matrix {A.tolist()} is not the identity")


def lift_orbit_displacements(f: SurfaceMap, X: np.ndarray, horizon: int,
                             shift=(0.0, 0.0)) -> np.ndarray:
    """Array (horizon, len(X), 2) of per-step displacements of the lift plus ``shift``."""
    shift = np.asarray(shift, dtype=float)
    X = np.array(X, dtype=float, ndmin=2)
    out = np.empty((horizon,) + X.shape)
    for k in range(horizon):
        Y = f.lift_array(X) + shift
        out[k] = Y - X
        # lift(x + v) = lift(x) + v, so re-centering the base keeps steps exact
        X = Y - np.floor(Y)
    return out


def translation_vector(f: SurfaceMap, x0=(0.0, 0.0), horizon: int = 1000,
                       base_points: int = 10, seed: int = 0, shift=(0.0, 0.0),
                       weighted: bool = False) -> TranslationVector:
    """Translation vector of the lift (plus integer ``shift``) from x0 and its base-point spread."""
    _require_identity_homology(f)
    rng = np.random.default_rng(seed)
    X = np.vstack([np.asarray(x0, dtype=float)[None, :], rng.random((base_points - 1, 2))])
    steps = lift_orbit_displacements(f, X, horizon, shift)
    if weighted:
        est = weighted_average(steps)
    else:
        est = steps.sum(axis=0) / horizon
    diffs = est[:, None, :] - est[None, :, :]
    spread = float(np.sqrt((diffs ** 2).sum(-1)).max())
    M = float(np.sqrt((steps ** 2).sum(-1)).max())
    return TranslationVector(est[0], horizon, spread, M)


def rotation_vector(f: SurfaceMap, horizon: int = 1000, x0=(0.0, 0.0)) -> np.ndarray:
    tv = translation_vector(f, x0, horizon)
    return tv.value - np.floor(tv.value)


@dataclass
class FixedPointCrossCheck:
    theta: np.ndarray
    theta_zero: bool
    min_displacement: float
    has_fixed_point: bool
    tolerance: float

    @property
    def agree(self) -> bool:
        return self.theta_zero == self.has_fixed_point


def vector_is_zero_iff_fixed_point_check(f: SurfaceMap, horizon: int = 1000, grid: int = 64,
                                         tol: Optional[float] = None) -> FixedPointCrossCheck:
    """Compare |theta| ~ 0 with the existence of an approximate fixed point of the lift.

    Diagnostic only: a grid search never certifies the absence of a fixed point.
    """
    tv = translation_vector(f, (0.0, 0.0), horizon)
    if tol is None:
        tol = 2.0 / grid
    c = (np.arange(grid) + 0.5) / grid
    S, T = np.meshgrid(c, c, indexing="ij")
    X = np.column_stack([S.ravel(), T.ravel()])
    disp = np.linalg.norm(f.lift_array(X) - X, axis=1)
    theta_norm = float(np.linalg.norm(tv.value))
    return FixedPointCrossCheck(tv.value, theta_norm < max(tol, tv.spread), float(disp.min()),
                                bool(disp.min() < tol), tol)


def angle_turns(v: np.ndarray) -> np.ndarray:
    """Angle of planar vectors in turns, in [0, 1)."""
    a = np.arctan2(v[..., 1], v[..., 0]) / (2 * math.pi)
    return a - np.floor(a)
