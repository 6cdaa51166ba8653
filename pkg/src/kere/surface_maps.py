"""Catalog of surface homeomorphisms and a small composition algebra.

Every map evaluates on numpy arrays of chart coordinates (``forward_array``,
``inverse_array``).  Maps on the torus, the Klein bottle, the annulus and the
Mobius strip also evaluate a *lift*: on the torus and the Klein bottle this is
a map of the plane covering the torus, on the annulus and the Mobius strip a
map of the strip ``[-1, 1] x R``.  Klein-bottle and Mobius-strip maps are
given by their orientation-preserving lift to the orientation double cover.
"""

from __future__ import annotations

import math
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import ConfigError, NoLift, NonIntegerHolonomy, SurfaceMismatch
from .metric_space import Surface, SurfacePoint, as_surface, reduce_coords, theta0

PRESERVING = "Preserving"
REVERSING = "Reversing"

MAX_CHAIN_DEPTH = 64

TWO_PI = 2.0 * math.pi


class SurfaceMap:
    """An invertible self-map of a surface.

    Subclasses implement ``_forward``/``_inverse`` on arrays already in
    canonical chart form, plus ``_lift``/``_lift_inverse`` when a lift exists.
    """

    surface: Surface
    kind: str
    orientation: str = PRESERVING
    homology: Optional[np.ndarray] = None  # declared 2x2 integer matrix, if known
    _canonical_output = False  # True when _forward/_inverse already return canonical coords

    def __init__(self, surface, kind, params=None, orientation=PRESERVING):
        self.surface = as_surface(surface)
        self.kind = kind
        self.params = dict(params or {})
        self.orientation = orientation

    # -- array evaluation ---------------------------------------------------
    def forward_array(self, X) -> np.ndarray:
        X = reduce_coords(self.surface, X)
        return reduce_coords(self.surface, self._forward(X))

    def inverse_array(self, X) -> np.ndarray:
        X = reduce_coords(self.surface, X)
        return reduce_coords(self.surface, self._inverse(X))

    def step_forward(self, X) -> np.ndarray:
        """forward_array for inputs already in canonical chart form (hot loops)."""
        Y = self._forward(X)
        return Y if self._canonical_output else reduce_coords(self.surface, Y)

    def step_inverse(self, X) -> np.ndarray:
        Y = self._inverse(X)
        return Y if self._canonical_output else reduce_coords(self.surface, Y)

    def _forward(self, X):
        if self.lift_available:
            return self._lift(X)
        raise NotImplementedError

    def _inverse(self, X):
        if self.lift_available:
            return self._lift_inverse(X)
        raise NotImplementedError

    @property
    def lift_available(self) -> bool:
        return False

    def lift_array(self, X) -> np.ndarray:
        if not self.lift_available:
            raise NoLift(f"{self.kind} on {self.surface.value} has no lift")
        return self._lift(np.array(X, dtype=float, ndmin=2))

    def lift_inverse_array(self, X) -> np.ndarray:
        if not self.lift_available:
            raise NoLift(f"{self.kind} on {self.surface.value} has no lift")
        return self._lift_inverse(np.array(X, dtype=float, ndmin=2))

    def _lift(self, X):
        raise NoLift(self.kind)

    def _lift_inverse(self, X):
        raise NoLift(self.kind)

    # -- algebra --------------------------------------------------------------
    def inverse_map(self) -> "SurfaceMap":
        return Composite([(self, -1)])

    def then(self, other: "SurfaceMap") -> "SurfaceMap":
        """The map x -> other(self(x))."""
        return Composite([(self, 1), (other, 1)])

    def to_dict(self) -> dict:
        return {"surface": self.surface.value, "kind": self.kind,
                "params": _jsonable(self.params)}

    def __repr__(self):
        return f"{type(self).__name__}({self.kind}, {self.params})"


def _jsonable(params):
    out = {}
    for k, v in params.items():
        if isinstance(v, complex):
            out[k] = [v.real, v.imag]
        elif isinstance(v, np.ndarray):
            out[k] = v.tolist()
        elif isinstance(v, (list, tuple)):
            out[k] = [list(x) if isinstance(x, (tuple, np.ndarray)) else x for x in v]
        else:
            out[k] = v
    return out


# ---------------------------------------------------------------------------
# sphere: homogeneous coordinates


def sphere_to_homogeneous(X):
    """Unit vectors -> homogeneous pairs (Z0, Z1) with z = Z0/Z1 (stereographic from N)."""
    x, y, z = X[:, 0], X[:, 1], X[:, 2]
    south = z <= 0
    Z0 = np.where(south, x + 1j * y, 1.0 + z)
    Z1 = np.where(south, (1.0 - z) + 0j, x - 1j * y)
    return Z0, Z1


def homogeneous_to_sphere(W0, W1):
    m = np.maximum(np.abs(W0), np.abs(W1))
    W0 = W0 / m
    W1 = W1 / m
    a2 = np.abs(W0) ** 2
    b2 = np.abs(W1) ** 2
    c = W0 * np.conj(W1)
    n = a2 + b2
    return np.column_stack([2 * c.real / n, 2 * c.imag / n, (a2 - b2) / n])


def sphere_to_complex(X):
    """Stereographic coordinate z (inf at the north pole)."""
    Z0, Z1 = sphere_to_homogeneous(np.array(X, dtype=float, ndmin=2))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = Z0 / Z1
    return np.where(np.abs(Z1) == 0, np.inf + 0j, z)


def complex_to_sphere(z):
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    inf = ~np.isfinite(z)
    W0 = np.where(inf, 1.0 + 0j, z)
    W1 = np.where(inf, 0j, 1.0 + 0j)
    return homogeneous_to_sphere(W0, W1)


def sphere_radius(X):
    """Modulus |z| of the stereographic coordinate, computed stably near both poles."""
    rho = np.hypot(X[:, 0], X[:, 1])
    z = X[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(z > 0, (1.0 + z) / rho, rho / (1.0 - z))
    return np.where(np.isnan(r), 0.0, r)


def _rotate_about_z(X, angle):
    c = np.cos(angle)
    s = np.sin(angle)
    return np.column_stack([c * X[:, 0] - s * X[:, 1], s * X[:, 0] + c * X[:, 1], X[:, 2]])


def lorentz_matrix(M) -> np.ndarray:
    """4x4 real matrix of H -> M H M^* on Hermitian matrices [[t+z, x+iy], [x-iy, t-z]].

    A Mobius map acts on the sphere {t = 1} as this linear map on the light
    cone followed by division by t.
    """
    M = np.asarray(M, dtype=complex)
    M = M / np.sqrt(np.linalg.det(M))
    basis = [np.eye(2), np.array([[0, 1], [1, 0]]), np.array([[0, 1j], [-1j, 0]]),
             np.array([[1, 0], [0, -1]])]
    L = np.empty((4, 4))
    for j, B in enumerate(basis):
        H = M @ B @ M.conj().T
        L[:, j] = [0.5 * (H[0, 0] + H[1, 1]).real, H[0, 1].real, H[0, 1].imag,
                   0.5 * (H[0, 0] - H[1, 1]).real]
    return L


def _lorentz_apply(L, X):
    # the time component is positive, so normalizing the spatial part suffices
    return _spatial_apply(np.ascontiguousarray(L[1:, 1:].T), L[1:, 0].copy(), X)


def _spatial_apply(At, b, X):
    V = X @ At
    V += b
    V *= (1.0 / np.sqrt(np.einsum("ij,ij->i", V, V)))[:, None]
    return V


class MobiusMap(SurfaceMap):
    """z -> (az+b)/(cz+d), or with conj(z) in place of z for fractional reflections."""

    def __init__(self, a, b, c, d, reflect=False, kind=None):
        a, b, c, d = (complex(v) for v in (a, b, c, d))
        if abs(a * d - b * c) == 0:
            raise ConfigError("degenerate Mobius coefficients")
        kind = kind or ("fractional_reflection" if reflect else "mobius")
        super().__init__(Surface.SPHERE, kind, {"a": a, "b": b, "c": c, "d": d},
                         REVERSING if reflect else PRESERVING)
        self.matrix = np.array([[a, b], [c, d]])
        self.reflect = reflect
        L = lorentz_matrix(self.matrix)
        C = np.diag([1.0, 1.0, -1.0, 1.0])  # complex conjugation
        Linv = np.linalg.inv(L)
        self._fwd = L @ C if reflect else L
        self._inv = C @ Linv if reflect else Linv
        self._canonical_output = True
        self._fwd_parts = (np.ascontiguousarray(self._fwd[1:, 1:].T), self._fwd[1:, 0].copy())
        self._inv_parts = (np.ascontiguousarray(self._inv[1:, 1:].T), self._inv[1:, 0].copy())

    def _apply(self, M, X, conj_before, conj_after):
        """Homogeneous-coordinate evaluation (reference path, slow)."""
        Z0, Z1 = sphere_to_homogeneous(X)
        if conj_before:
            Z0, Z1 = np.conj(Z0), np.conj(Z1)
        W0 = M[0, 0] * Z0 + M[0, 1] * Z1
        W1 = M[1, 0] * Z0 + M[1, 1] * Z1
        if conj_after:
            W0, W1 = np.conj(W0), np.conj(W1)
        return homogeneous_to_sphere(W0, W1)

    def _forward(self, X):
        return _spatial_apply(*self._fwd_parts, X)

    def _inverse(self, X):
        return _spatial_apply(*self._inv_parts, X)

    def fixed_points(self) -> np.ndarray:
        """Exact fixed points of an orientation-preserving Mobius map (sphere coordinates)."""
        if self.reflect:
            raise ValueError("closed-form fixed points only for Mobius maps")
        a, b = self.matrix[0]
        c, d = self.matrix[1]
        if abs(c) < 1e-15:
            pts = [np.inf]
            if abs(a - d) > 1e-15:
                pts.append(b / (d - a))
            return complex_to_sphere(np.array(pts))
        disc = np.sqrt((a - d) ** 2 + 4 * b * c + 0j)
        roots = {((a - d) + disc) / (2 * c), ((a - d) - disc) / (2 * c)}
        return complex_to_sphere(np.array(sorted(roots, key=lambda z: (z.real, z.imag))))


def mobius(a, b, c, d) -> MobiusMap:
    return MobiusMap(a, b, c, d)


def fractional_reflection(a, b, c, d) -> MobiusMap:
    return MobiusMap(a, b, c, d, reflect=True)


def elliptic_rotation(turns: float) -> MobiusMap:
    """z -> exp(2 pi i turns) z."""
    return MobiusMap(np.exp(1j * TWO_PI * turns), 0, 0, 1)


class RotationProfile(SurfaceMap):
    """Rotates each circle |z| = r by angle phi(r) (radians); fixes 0 and infinity.

    phi is piecewise linear through the table and extrapolated linearly
    beyond its last node.
    """

    def __init__(self, radii=(0.0, 1.0), angles=(0.0, 1.0)):
        r = np.asarray(radii, dtype=float)
        p = np.asarray(angles, dtype=float)
        if r.ndim != 1 or r.size < 2 or r.size != p.size or np.any(np.diff(r) <= 0) or r[0] != 0:
            raise ConfigError("rotation_profile needs increasing radii starting at 0")
        super().__init__(Surface.SPHERE, "rotation_profile",
                         {"radii": r.tolist(), "angles": p.tolist()})
        self.radii = r
        self.angles = p

    def phi(self, r):
        r = np.asarray(r, dtype=float)
        slope = (self.angles[-1] - self.angles[-2]) / (self.radii[-1] - self.radii[-2])
        inside = np.interp(np.minimum(r, self.radii[-1]), self.radii, self.angles)
        out = np.where(r > self.radii[-1], self.angles[-1] + slope * (r - self.radii[-1]), inside)
        return np.where(np.isfinite(out), out, 0.0)

    def _forward(self, X):
        return _rotate_about_z(X, self.phi(sphere_radius(X)))

    def _inverse(self, X):
        return _rotate_about_z(X, -self.phi(sphere_radius(X)))


def rotation_profile(radii=(0.0, 1.0), angles=(0.0, 1.0)) -> RotationProfile:
    return RotationProfile(radii, angles)


class PolarWarp(SurfaceMap):
    """(r, theta) -> (r + amp r (1 - r) sin theta, theta) on |z| <= 1, identity outside."""

    def __init__(self, amp=0.1):
        if abs(amp) >= 1:
            raise ConfigError("polar_warp amplitude must satisfy |amp| < 1")
        super().__init__(Surface.SPHERE, "polar_warp", {"amp": float(amp)})
        self.amp = float(amp)

    @staticmethod
    def _with_radius(X, r_new):
        rho_old = np.hypot(X[:, 0], X[:, 1])
        safe = rho_old > 0
        ux = np.where(safe, X[:, 0] / np.where(safe, rho_old, 1.0), 1.0)
        uy = np.where(safe, X[:, 1] / np.where(safe, rho_old, 1.0), 0.0)
        # outside the unit disc the caller keeps X, so clamp away the point at infinity
        r_new = np.minimum(r_new, 1.0)
        rho = 2 * r_new / (1 + r_new ** 2)
        z = (r_new ** 2 - 1) / (r_new ** 2 + 1)
        return np.column_stack([rho * ux, rho * uy, z])

    def _forward(self, X):
        r = sphere_radius(X)
        k = self.amp * np.sin(np.arctan2(X[:, 1], X[:, 0]))
        inside = r < 1
        r_new = np.where(inside, r + k * r * (1 - r), r)
        out = self._with_radius(X, r_new)
        return np.where(inside[:, None], out, X)

    def _inverse(self, X):
        rp = sphere_radius(X)
        k = self.amp * np.sin(np.arctan2(X[:, 1], X[:, 0]))
        inside = rp < 1
        # -k r^2 + (1 + k) r - rp = 0, root in [0, 1], written without cancellation
        disc = np.sqrt(np.maximum((1 + k) ** 2 - 4 * k * rp, 0.0))
        r = 2 * rp / ((1 + k) + disc)
        out = self._with_radius(X, np.where(inside, r, rp))
        return np.where(inside[:, None], out, X)


def polar_warp(amp=0.1) -> PolarWarp:
    return PolarWarp(amp)


# ---------------------------------------------------------------------------
# torus


class LiftMap(SurfaceMap):
    """Base for maps given by a lift; forward is the chart reduction of the lift."""

    @property
    def lift_available(self) -> bool:
        return True

    def _forward(self, X):
        return self._lift(X)

    def _inverse(self, X):
        return self._lift_inverse(X)


class TorusAffine(LiftMap):
    """Lift x -> M x + v with M in GL(2, Z)."""

    def __init__(self, matrix, shift, kind="torus_affine", params=None):
        M = np.array(matrix, dtype=float)
        det = round(float(np.linalg.det(M)))
        if M.shape != (2, 2) or np.any(M != np.round(M)) or abs(det) != 1:
            raise ConfigError("torus_affine needs an integer matrix with determinant +-1")
        if params is None:
            params = {"matrix": M.astype(int).tolist(), "shift": [float(v) for v in shift]}
        super().__init__(Surface.TORUS, kind, params, PRESERVING if det == 1 else REVERSING)
        self.matrix = M
        self.inv_matrix = np.round(np.linalg.inv(M))
        self.shift = np.asarray(shift, dtype=float)
        self.homology = M.astype(int)

    def _lift(self, X):
        return X @ self.matrix.T + self.shift

    def _lift_inverse(self, X):
        return (X - self.shift) @ self.inv_matrix.T


def torus_translation(alpha, beta) -> TorusAffine:
    return TorusAffine(np.eye(2), (alpha, beta), "torus_translation",
                       {"alpha": float(alpha), "beta": float(beta)})


def torus_reversing_type1(alpha) -> TorusAffine:
    return TorusAffine([[-1, 0], [0, 1]], (0.0, alpha), "torus_reversing_type1",
                       {"alpha": float(alpha)})


def torus_reversing_type2(alpha) -> TorusAffine:
    return TorusAffine([[-1, 0], [1, 1]], (0.0, alpha), "torus_reversing_type2",
                       {"alpha": float(alpha)})


def torus_affine(matrix, shift=(0.0, 0.0)) -> TorusAffine:
    return TorusAffine(matrix, shift)


class TorusShear(LiftMap):
    """(s, t) -> (s, t + b sin 2 pi s) followed by (s, t) -> (s + a sin 2 pi t, t)."""

    def __init__(self, a=0.05, b=0.05):
        super().__init__(Surface.TORUS, "torus_shear", {"a": float(a), "b": float(b)})
        self.a, self.b = float(a), float(b)
        self.homology = np.eye(2, dtype=int)

    def _lift(self, X):
        s, t = X[:, 0], X[:, 1] + self.b * np.sin(TWO_PI * X[:, 0])
        return np.column_stack([s + self.a * np.sin(TWO_PI * t), t])

    def _lift_inverse(self, X):
        s = X[:, 0] - self.a * np.sin(TWO_PI * X[:, 1])
        return np.column_stack([s, X[:, 1] - self.b * np.sin(TWO_PI * s)])


def torus_shear(a=0.05, b=0.05) -> TorusShear:
    return TorusShear(a, b)


class PeriodicTable:
    """Piecewise-linear function on the circle with an integer degree.

    Values are given at ``s_k = s0 + k/n``; ``f(s + 1) = f(s) + degree``.
    """

    def __init__(self, values, degree=0, s0=-0.5):
        self.values = np.asarray(values, dtype=float)
        self.degree = int(degree)
        self.s0 = float(s0)
        self.n = self.values.size

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        u = (s - self.s0) * self.n
        k = np.floor(u)
        frac = u - k
        k = k.astype(np.int64)
        wraps, idx = np.divmod(k, self.n)
        wraps1, idx1 = np.divmod(k + 1, self.n)
        v0 = self.values[idx] + wraps * self.degree
        v1 = self.values[idx1] + wraps1 * self.degree
        return v0 + frac * (v1 - v0)


class TorusFiberShift(LiftMap):
    """(s, t) -> (s, t + beta(s)) with beta a tabulated circle map of given degree."""

    def __init__(self, values, degree=0, s0=-0.5):
        self.table = PeriodicTable(values, degree, s0)
        super().__init__(Surface.TORUS, "torus_fiber_shift",
                         {"values": self.table.values.tolist(), "degree": int(degree),
                          "s0": float(s0)})
        self.homology = np.array([[1, 0], [int(degree), 1]])

    def _lift(self, X):
        return np.column_stack([X[:, 0], X[:, 1] + self.table(X[:, 0])])

    def _lift_inverse(self, X):
        return np.column_stack([X[:, 0], X[:, 1] - self.table(X[:, 0])])


class TorusGridWarp(LiftMap):
    """x -> x + D(x), D a displacement field tabulated on a periodic n x n grid.

    The inverse is computed by fixed-point iteration, which converges when
    the bilinear interpolant of D is a contraction.
    """

    def __init__(self, displacement):
        D = np.asarray(displacement, dtype=float)
        if D.ndim != 3 or D.shape[0] != D.shape[1] or D.shape[2] != 2:
            raise ConfigError("torus_grid_warp displacement must have shape (n, n, 2)")
        super().__init__(Surface.TORUS, "torus_grid_warp", {"displacement": D.tolist()})
        self.D = D
        self.n = D.shape[0]
        self.homology = np.eye(2, dtype=int)

    def _disp(self, X):
        u = np.mod(X, 1.0) * self.n
        i0 = np.floor(u).astype(int)
        f = u - i0
        i0 %= self.n
        i1 = (i0 + 1) % self.n
        D = self.D
        fx, fy = f[:, 0:1], f[:, 1:2]
        return ((1 - fx) * (1 - fy) * D[i0[:, 0], i0[:, 1]] + fx * (1 - fy) * D[i1[:, 0], i0[:, 1]]
                + (1 - fx) * fy * D[i0[:, 0], i1[:, 1]] + fx * fy * D[i1[:, 0], i1[:, 1]])

    def _lift(self, X):
        return X + self._disp(X)

    def _lift_inverse(self, X):
        Y = X - self._disp(X)
        for _ in range(200):
            Y_new = X - self._disp(Y)
            if np.max(np.abs(Y_new - Y)) < 1e-15:
                return Y_new
            Y = Y_new
        return Y


# ---------------------------------------------------------------------------
# Klein bottle and Mobius strip: maps given by an equivariant lift


class QuotientLiftMap(LiftMap):
    """A map of the Klein bottle (or Mobius strip) induced by a lift commuting with the deck involution."""

    def __init__(self, surface, kind, params, cover_map: SurfaceMap):
        super().__init__(surface, kind, params, cover_map.orientation)
        self.cover_map = cover_map
        self.homology = getattr(cover_map, "homology", None)

    def _lift(self, X):
        return self.cover_map._lift(X)

    def _lift_inverse(self, X):
        return self.cover_map._lift_inverse(X)


def klein_phi(alpha) -> QuotientLiftMap:
    return QuotientLiftMap(Surface.KLEIN, "klein_phi", {"alpha": float(alpha)},
                           torus_translation(0.0, alpha))


def klein_psi(alpha) -> QuotientLiftMap:
    return QuotientLiftMap(Surface.KLEIN, "klein_psi", {"alpha": float(alpha)},
                           torus_translation(0.5, alpha))


class KleinWarpLift(LiftMap):
    """Torus homeomorphism commuting with (s, t) -> (-s, t + 1/2).

    (s, t) -> (s, t + b cos 2 pi s), then s -> s + a sin(2 pi s) cos(4 pi t).
    """

    def __init__(self, a=0.04, b=0.05):
        if abs(a) * TWO_PI >= 1:
            raise ConfigError("klein_warp needs |a| < 1/(2 pi)")
        super().__init__(Surface.TORUS, "klein_warp_lift", {"a": float(a), "b": float(b)})
        self.a, self.b = float(a), float(b)
        self.homology = np.eye(2, dtype=int)

    def _lift(self, X):
        t = X[:, 1] + self.b * np.cos(TWO_PI * X[:, 0])
        s = X[:, 0] + self.a * np.sin(TWO_PI * X[:, 0]) * np.cos(2 * TWO_PI * t)
        return np.column_stack([s, t])

    def _lift_inverse(self, X):
        c = self.a * np.cos(2 * TWO_PI * X[:, 1])
        s = X[:, 0].copy()
        for _ in range(60):
            g = s + c * np.sin(TWO_PI * s) - X[:, 0]
            s = s - g / (1 + c * TWO_PI * np.cos(TWO_PI * s))
        return np.column_stack([s, X[:, 1] - self.b * np.cos(TWO_PI * s)])


def klein_warp(a=0.04, b=0.05) -> QuotientLiftMap:
    return QuotientLiftMap(Surface.KLEIN, "klein_warp", {"a": float(a), "b": float(b)},
                           KleinWarpLift(a, b))


class AnnulusAffine(LiftMap):
    """(s, t) -> (sign * s, t + alpha) on [-1, 1] x S^1 (lift to the strip [-1, 1] x R)."""

    def __init__(self, sign, alpha, kind, surface=Surface.ANNULUS):
        super().__init__(surface, kind, {"alpha": float(alpha)},
                         PRESERVING if sign > 0 else REVERSING)
        self.sign = 1.0 if sign > 0 else -1.0
        self.alpha = float(alpha)

    def _lift(self, X):
        return np.column_stack([self.sign * X[:, 0], X[:, 1] + self.alpha])

    def _lift_inverse(self, X):
        return np.column_stack([self.sign * X[:, 0], X[:, 1] - self.alpha])


def annulus_rotation(alpha) -> AnnulusAffine:
    return AnnulusAffine(1, alpha, "annulus_rotation")


def annulus_reversing(alpha) -> AnnulusAffine:
    return AnnulusAffine(-1, alpha, "annulus_reversing")


def mobius_strip_rotation(alpha) -> AnnulusAffine:
    """Map of the Mobius strip induced by the annulus rotation (s, t) -> (s, t + alpha)."""
    return AnnulusAffine(1, alpha, "mobius_strip_rotation", Surface.MOBIUS)


class AnnulusWarp(LiftMap):
    """(s, t) -> (s, t + b s^2), then s -> s + a s (1 - s^2) cos(4 pi t).

    Fixes both boundary circles and commutes with (s, t) -> (-s, t + 1/2), so
    it also descends to the Mobius strip.
    """

    def __init__(self, a=0.2, b=0.05, surface=Surface.ANNULUS):
        if abs(a) >= 0.5:
            raise ConfigError("annulus_warp needs |a| < 1/2")
        super().__init__(surface, "annulus_warp", {"a": float(a), "b": float(b)})
        self.a, self.b = float(a), float(b)

    def _lift(self, X):
        t = X[:, 1] + self.b * X[:, 0] ** 2
        s = X[:, 0] + self.a * X[:, 0] * (1 - X[:, 0] ** 2) * np.cos(2 * TWO_PI * t)
        return np.column_stack([s, t])

    def _lift_inverse(self, X):
        c = self.a * np.cos(2 * TWO_PI * X[:, 1])
        s = X[:, 0].copy()
        for _ in range(60):
            g = s + c * s * (1 - s * s) - X[:, 0]
            s = np.clip(s - g / (1 + c * (1 - 3 * s * s)), -1.0, 1.0)
        return np.column_stack([s, X[:, 1] - self.b * s ** 2])


def annulus_warp(a=0.2, b=0.05, surface=Surface.ANNULUS) -> AnnulusWarp:
    return AnnulusWarp(a, b, as_surface(surface))


# ---------------------------------------------------------------------------
# composition


class Composite(SurfaceMap):
    """Chain of maps applied left to right; each entry is (map, +1 or -1)."""

    def __init__(self, chain: Sequence):
        flat = []
        for m, e in chain:
            if e not in (1, -1):
                raise ConfigError("chain exponents must be +1 or -1")
            flat.append((m, e))
        if not flat:
            raise ConfigError("empty composite chain")
        if len(flat) > MAX_CHAIN_DEPTH:
            raise ConfigError(f"composite depth {len(flat)} exceeds {MAX_CHAIN_DEPTH}")
        surfaces = {m.surface for m, _ in flat}
        if len(surfaces) != 1:
            raise SurfaceMismatch("composite chain mixes surfaces")
        reversing = sum(m.orientation == REVERSING for m, _ in flat) % 2
        super().__init__(flat[0][0].surface, "composite", {},
                         REVERSING if reversing else PRESERVING)
        self.chain = tuple(flat)
        mats = [getattr(m, "homology", None) for m, _ in flat]
        if all(M is not None for M in mats):
            A = np.eye(2, dtype=int)
            for (m, e), M in zip(flat, mats):
                Mi = M if e == 1 else np.round(np.linalg.inv(M)).astype(int)
                A = Mi @ A
            self.homology = A

    @property
    def lift_available(self) -> bool:
        return all(m.lift_available for m, _ in self.chain)

    def _forward(self, X):
        for m, e in self.chain:
            X = m.forward_array(X) if e == 1 else m.inverse_array(X)
        return X

    def _inverse(self, X):
        for m, e in reversed(self.chain):
            X = m.inverse_array(X) if e == 1 else m.forward_array(X)
        return X

    def _lift(self, X):
        for m, e in self.chain:
            X = m._lift(X) if e == 1 else m._lift_inverse(X)
        return X

    def _lift_inverse(self, X):
        for m, e in reversed(self.chain):
            X = m._lift_inverse(X) if e == 1 else m._lift(X)
        return X

    def to_dict(self) -> dict:
        return {"surface": self.surface.value, "kind": "composite", "params": {},
                "chain": [{"map": m.to_dict(), "exponent": e} for m, e in self.chain]}


def composite(chain) -> Composite:
    return Composite(chain)


def conjugate(f: SurfaceMap, warp: SurfaceMap) -> Composite:
    """warp o f o warp^-1."""
    return Composite([(warp, -1), (f, 1), (warp, 1)])


def compose(*maps: SurfaceMap) -> Composite:
    """compose(f, g) is x -> f(g(x))."""
    return Composite([(m, 1) for m in reversed(maps)])


def power(f: SurfaceMap, n: int) -> SurfaceMap:
    if n == 0:
        raise ValueError("power 0 is the identity; use an explicit identity map")
    e = 1 if n > 0 else -1
    return Composite([(f, e)] * abs(n))


def identity(surface) -> SurfaceMap:
    surface = as_surface(surface)
    if surface is Surface.SPHERE:
        return MobiusMap(1, 0, 0, 1)
    if surface is Surface.TORUS:
        return torus_translation(0.0, 0.0)
    if surface is Surface.KLEIN:
        return klein_phi(0.0)
    if surface is Surface.ANNULUS:
        return annulus_rotation(0.0)
    if surface is Surface.MOBIUS:
        return mobius_strip_rotation(0.0)
    raise ValueError(surface)


# ---------------------------------------------------------------------------
# point-level operations


def _check(f: SurfaceMap, x: SurfacePoint):
    if x.surface is not f.surface:
        raise SurfaceMismatch(f"point on {x.surface.value}, map on {f.surface.value}")


def forward(f: SurfaceMap, x: SurfacePoint) -> SurfacePoint:
    _check(f, x)
    return SurfacePoint.from_array(f.surface, f.forward_array(x.array)[0])


def inverse(f: SurfaceMap, x: SurfacePoint) -> SurfacePoint:
    _check(f, x)
    return SurfacePoint.from_array(f.surface, f.inverse_array(x.array)[0])


def lift_forward(f: SurfaceMap, x) -> np.ndarray:
    if f.surface not in (Surface.TORUS, Surface.KLEIN) or not f.lift_available:
        raise NoLift(f"{f.kind} on {f.surface.value} has no plane lift")
    return f.lift_array(np.asarray(x, dtype=float))[0]


def homology_matrix_of(f: SurfaceMap, samples: int = 8, seed: int = 0) -> np.ndarray:
    """Integer matrix A with lift(x + v) = lift(x) + A v, measured numerically."""
    if f.surface not in (Surface.TORUS, Surface.KLEIN) or not f.lift_available:
        raise NoLift(f"{f.kind} on {f.surface.value} has no plane lift")
    X = np.random.default_rng(seed).random((samples, 2))
    base = f.lift_array(X)
    cols = []
    for e in np.eye(2):
        cols.append(f.lift_array(X + e) - base)
    D = np.stack(cols, axis=2)  # samples x 2 x 2, column j is the image of e_j
    A = np.round(D.mean(axis=0))
    residual = float(np.max(np.abs(D - A)))
    if residual > 1e-3:
        raise NonIntegerHolonomy(f"lift holonomy residual {residual:.3g}")
    return A.astype(int)


def jacobian_determinant(f: SurfaceMap, X, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian determinant in oriented local frames."""
    X = np.array(X, dtype=float, ndmin=2)
    if f.surface is Surface.SPHERE:
        X = X / np.linalg.norm(X, axis=1, keepdims=True)
        helper = np.where(np.abs(X[:, 2:3]) < 0.9, [[0.0, 0.0, 1.0]], [[1.0, 0.0, 0.0]])
        e1 = np.cross(helper, X)
        e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
        e2 = np.cross(X, e1)

        def push(v):
            P = f.forward_array((X + h * v) / np.linalg.norm(X + h * v, axis=1, keepdims=True))
            M = f.forward_array((X - h * v) / np.linalg.norm(X - h * v, axis=1, keepdims=True))
            return (P - M) / (2 * h)

        d1, d2 = push(e1), push(e2)
        return np.einsum("ij,ij->i", np.cross(d1, d2), f.forward_array(X))
    if not f.lift_available:
        raise NoLift(f.kind)
    cols = []
    for e in np.eye(2):
        cols.append((f.lift_array(X + h * e) - f.lift_array(X - h * e)) / (2 * h))
    return cols[0][:, 0] * cols[1][:, 1] - cols[0][:, 1] * cols[1][:, 0]


# ---------------------------------------------------------------------------
# JSON documents


def _complex(v):
    if isinstance(v, (list, tuple)):
        return complex(v[0], v[1])
    return complex(v)


_BUILDERS: dict = {
    "mobius": lambda p: mobius(*(_complex(p[k]) for k in "abcd")),
    "fractional_reflection": lambda p: fractional_reflection(*(_complex(p[k]) for k in "abcd")),
    "rotation_profile": lambda p: rotation_profile(p.get("radii", (0.0, 1.0)),
                                                   p.get("angles", (0.0, 1.0))),
    "polar_warp": lambda p: polar_warp(p.get("amp", 0.1)),
    "torus_translation": lambda p: torus_translation(p["alpha"], p["beta"]),
    "torus_reversing_type1": lambda p: torus_reversing_type1(p["alpha"]),
    "torus_reversing_type2": lambda p: torus_reversing_type2(p["alpha"]),
    "torus_affine": lambda p: torus_affine(p["matrix"], p.get("shift", (0.0, 0.0))),
    "torus_shear": lambda p: torus_shear(p.get("a", 0.05), p.get("b", 0.05)),
    "torus_fiber_shift": lambda p: TorusFiberShift(p["values"], p.get("degree", 0),
                                                   p.get("s0", -0.5)),
    "torus_grid_warp": lambda p: TorusGridWarp(p["displacement"]),
    "klein_phi": lambda p: klein_phi(p["alpha"]),
    "klein_psi": lambda p: klein_psi(p["alpha"]),
    "klein_warp": lambda p: klein_warp(p.get("a", 0.04), p.get("b", 0.05)),
    "klein_warp_lift": lambda p: KleinWarpLift(p.get("a", 0.04), p.get("b", 0.05)),
    "annulus_rotation": lambda p: annulus_rotation(p["alpha"]),
    "annulus_reversing": lambda p: annulus_reversing(p["alpha"]),
    "mobius_strip_rotation": lambda p: mobius_strip_rotation(p["alpha"]),
}

BUILTIN_KINDS = tuple(sorted(_BUILDERS)) + ("composite",)


def map_from_dict(doc: dict) -> SurfaceMap:
    """Build a map from its JSON document ``{"surface", "kind", "params", "chain"}``."""
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ConfigError("map document needs a 'kind'")
    kind = doc["kind"]
    params = doc.get("params") or {}
    try:
        if kind == "composite":
            chain = []
            for item in doc.get("chain") or []:
                if "map" in item:
                    chain.append((map_from_dict(item["map"]), int(item.get("exponent", 1))))
                else:
                    chain.append((map_from_dict(item), 1))
            f = Composite(chain)
        elif kind == "annulus_warp":
            f = annulus_warp(params.get("a", 0.2), params.get("b", 0.05),
                             doc.get("surface", "Annulus"))
        elif kind in _BUILDERS:
            f = _BUILDERS[kind](params)
        else:
            raise ConfigError(f"unknown map kind {kind!r}")
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad parameters for {kind}: {exc}") from exc
    if "surface" in doc and as_surface(doc["surface"]) is not f.surface:
        raise ConfigError(f"{kind} lives on {f.surface.value}, document says {doc['surface']}")
    return f


def map_to_dict(f: SurfaceMap) -> dict:
    return f.to_dict()


def as_function(f: SurfaceMap) -> Callable:
    return f.forward_array
