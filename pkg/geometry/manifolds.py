"""
Embedded manifolds with closed-form geodesics.

Every manifold lives inside [-1,1]^D and exposes an intrinsic parametrization,
its inverse, the geodesic distance and normal-style coordinates around a
center point (the raw material of the analytic charts).
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

import numpy as np
from scipy.stats import ortho_group

logger = logging.getLogger("Geometry")

TWO_PI = 2.0 * np.pi

# Points further than this from the manifold are rejected by distance queries.
ON_MANIFOLD_TOL = 1e-9


class DomainError(ValueError):
    """Raised for out-of-domain parameters or off-manifold points."""


class ConfigurationError(ValueError):
    """Raised for inconsistent manifold, target or noise settings."""


def wrap_angle(delta: np.ndarray) -> np.ndarray:
    """Map angle differences into [-pi, pi)."""
    return np.mod(delta + np.pi, TWO_PI) - np.pi


def _as_rows(values, width: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        if arr.size == width:
            arr = arr.reshape(1, width)
        elif width == 1:
            arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] != width:
        raise DomainError(f"{name} must have {width} columns, got shape {np.shape(values)}")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} contains non-finite values")
    return arr


class Manifold(ABC):
    """
    A compact d-dimensional manifold embedded in [-1,1]^D.

    Subclasses implement the raw (unchecked, vectorized) parametrization and
    the geometry; the public methods here add validation.
    """

    kind: str = "manifold"

    def __init__(self, intrinsic_dim: int, ambient_dim: int):
        if ambient_dim < intrinsic_dim or intrinsic_dim < 1:
            raise ConfigurationError(
                f"Need 1 <= d <= D, got d={intrinsic_dim}, D={ambient_dim}"
            )
        self.intrinsic_dim = intrinsic_dim
        self.ambient_dim = ambient_dim

    # --- parametrization -------------------------------------------------

    @abstractmethod
    def _embed_raw(self, thetas: np.ndarray) -> np.ndarray:
        """Evaluate the parametrization on an (N, d) array without checks."""

    @abstractmethod
    def in_domain(self, thetas: np.ndarray) -> np.ndarray:
        """Boolean mask of parameter rows inside the parametrization domain."""

    @abstractmethod
    def intrinsic(self, points: np.ndarray) -> np.ndarray:
        """Inverse parametrization for points on the manifold."""

    @abstractmethod
    def sample_intrinsic(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """Draw m parameter rows whose images are uniform on the manifold."""

    def clip_intrinsic(self, thetas: np.ndarray) -> np.ndarray:
        """Bring perturbed parameters back into the domain."""
        return thetas

    def embed(self, theta) -> np.ndarray:
        """
        Embed a single parameter vector.

        Args:
            theta: intrinsic coordinates (length d)

        Returns:
            AmbientPoint as a length-D array
        """
        return self.embed_batch(theta)[0]

    def embed_batch(self, thetas) -> np.ndarray:
        rows = _as_rows(thetas, self.intrinsic_dim, "theta")
        mask = self.in_domain(rows)
        if not np.all(mask):
            bad = rows[~mask][0]
            raise DomainError(f"theta {bad.tolist()} outside the {self.kind} parametrization domain")
        return self._embed_raw(rows)

    # --- geometry --------------------------------------------------------

    @abstractmethod
    def _geodesic_raw(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Row-wise geodesic distance for points known to be on the manifold."""

    @abstractmethod
    def log_coordinates(self, center: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Normal-style coordinates of points around center, in distance units."""

    @abstractmethod
    def exp_coordinates(self, center: np.ndarray, coords: np.ndarray) -> np.ndarray:
        """Inverse of log_coordinates; rows leaving the domain come back as NaN."""

    def to_base(self, points: np.ndarray) -> np.ndarray:
        """Coordinates in which target functions are expressed."""
        return np.asarray(points, dtype=float)

    @property
    def base_scale(self) -> float:
        """Factor taking geodesic lengths in base coordinates to geodesic lengths on this manifold."""
        return 1.0

    def residual(self, points: np.ndarray) -> np.ndarray:
        """Sup-norm distance between each point and its re-embedded projection."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.max(np.abs(pts - self._embed_raw(self.intrinsic(pts))), axis=1)

    def check_on_manifold(self, points: np.ndarray, tol: float = ON_MANIFOLD_TOL) -> np.ndarray:
        pts = _as_rows(points, self.ambient_dim, "point")
        res = self.residual(pts)
        if np.any(res > tol):
            raise DomainError(
                f"point off the {self.kind} (residual {float(res.max()):.3e} > {tol:g})"
            )
        return pts

    def geodesic_distance(self, x, y) -> float:
        """
        Geodesic distance between two points on the manifold.

        Raises:
            DomainError: if either point is off the manifold
        """
        return float(self.geodesic_batch(x, y)[0])

    def geodesic_batch(self, x, y) -> np.ndarray:
        xs = self.check_on_manifold(x)
        ys = self.check_on_manifold(y)
        return self._geodesic_raw(xs, ys)

    # --- constants -------------------------------------------------------

    @property
    def analytic_c0(self) -> Optional[float]:
        """Sup of d_G / chord when known in closed form."""
        return None

    @property
    @abstractmethod
    def diameter(self) -> float:
        ...

    @property
    @abstractmethod
    def comparability_radius(self) -> float:
        """Radius below which chord and geodesic are within a factor 2."""

    @property
    def max_chart_radius(self) -> float:
        """Charts are injective for radii strictly below this value."""
        return float("inf")

    @property
    @abstractmethod
    def default_delta(self) -> float:
        ...

    @property
    @abstractmethod
    def max_norm(self) -> float:
        """Upper bound of the Euclidean norm of embedded points."""

    @abstractmethod
    def descriptor(self) -> Dict[str, Any]:
        ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}(d={self.intrinsic_dim}, D={self.ambient_dim})"


class Circle(Manifold):
    """Circle of the given radius in the plane, parametrized by angle in [0, 2pi]."""

    kind = "circle"

    def __init__(self, radius: float = 0.9):
        super().__init__(1, 2)
        if not 0 < radius < 1:
            raise ConfigurationError(f"circle radius must lie in (0,1), got {radius}")
        self.radius = float(radius)

    def _embed_raw(self, thetas):
        t = thetas[:, 0]
        return self.radius * np.column_stack([np.cos(t), np.sin(t)])

    def in_domain(self, thetas):
        t = thetas[:, 0]
        return (t >= 0.0) & (t <= TWO_PI)

    def clip_intrinsic(self, thetas):
        return np.mod(thetas, TWO_PI)

    def intrinsic(self, points):
        pts = np.atleast_2d(points)
        return np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI)[:, None]

    def sample_intrinsic(self, rng, m):
        return rng.uniform(0.0, TWO_PI, size=(m, 1))

    def _geodesic_raw(self, x, y):
        dphi = wrap_angle(self.intrinsic(x)[:, 0] - self.intrinsic(y)[:, 0])
        return self.radius * np.abs(dphi)

    def log_coordinates(self, center, points):
        c = self.intrinsic(np.atleast_2d(center))[0, 0]
        phi = self.intrinsic(points)[:, 0]
        return (self.radius * wrap_angle(phi - c))[:, None]

    def exp_coordinates(self, center, coords):
        c = self.intrinsic(np.atleast_2d(center))[0, 0]
        phi = c + np.asarray(coords, dtype=float)[:, 0] / self.radius
        return self._embed_raw(phi[:, None])

    @property
    def analytic_c0(self):
        return np.pi / 2

    @property
    def diameter(self):
        return np.pi * self.radius

    @property
    def comparability_radius(self):
        return np.pi * self.radius

    @property
    def max_chart_radius(self):
        return np.pi * self.radius

    @property
    def default_delta(self):
        return np.pi * self.radius / 2

    @property
    def max_norm(self):
        return self.radius

    def descriptor(self):
        return {"kind": self.kind, "scale": self.radius}


class Sphere(Manifold):
    """Round 2-sphere in R^3; theta = (polar in [0,pi], azimuth in [0,2pi])."""

    kind = "sphere"

    def __init__(self, radius: float = 0.9):
        super().__init__(2, 3)
        if not 0 < radius < 1:
            raise ConfigurationError(f"sphere radius must lie in (0,1), got {radius}")
        self.radius = float(radius)

    def _embed_raw(self, thetas):
        polar, azim = thetas[:, 0], thetas[:, 1]
        return self.radius * np.column_stack(
            [np.sin(polar) * np.cos(azim), np.sin(polar) * np.sin(azim), np.cos(polar)]
        )

    def in_domain(self, thetas):
        polar, azim = thetas[:, 0], thetas[:, 1]
        return (polar >= 0) & (polar <= np.pi) & (azim >= 0) & (azim <= TWO_PI)

    def clip_intrinsic(self, thetas):
        return self.intrinsic(self._embed_raw(thetas))

    def intrinsic(self, points):
        pts = np.atleast_2d(points)
        norm = np.linalg.norm(pts, axis=1)
        polar = np.arccos(np.clip(pts[:, 2] / norm, -1.0, 1.0))
        azim = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI)
        return np.column_stack([polar, azim])

    def sample_intrinsic(self, rng, m):
        z = rng.normal(size=(m, 3))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        return self.intrinsic(z)

    def _angle(self, x, y):
        cross = np.linalg.norm(np.cross(x, y), axis=1)
        dot = np.sum(x * y, axis=1)
        return np.arctan2(cross, dot)

    def _geodesic_raw(self, x, y):
        return self.radius * self._angle(x, y)

    def _tangent_basis(self, center):
        p = np.asarray(center, dtype=float).reshape(-1)
        p = p / np.linalg.norm(p)
        helper = np.zeros(3)
        helper[int(np.argmin(np.abs(p)))] = 1.0
        e1 = helper - helper.dot(p) * p
        e1 /= np.linalg.norm(e1)
        e2 = np.cross(p, e1)
        return p, e1, e2

    def log_coordinates(self, center, points):
        p, e1, e2 = self._tangent_basis(center)
        pts = np.atleast_2d(points)
        u = pts / np.linalg.norm(pts, axis=1, keepdims=True)
        angle = self._angle(np.broadcast_to(p, u.shape), u)
        w = u - np.outer(u @ p, p)
        wn = np.linalg.norm(w, axis=1)
        safe = np.where(wn > 0, wn, 1.0)
        scale = np.where(wn > 0, self.radius * angle / safe, 0.0)
        return np.column_stack([(w @ e1) * scale, (w @ e2) * scale])

    def exp_coordinates(self, center, coords):
        p, e1, e2 = self._tangent_basis(center)
        v = np.atleast_2d(np.asarray(coords, dtype=float))
        length = np.linalg.norm(v, axis=1)
        angle = length / self.radius
        safe = np.where(length > 0, length, 1.0)
        direction = (np.outer(v[:, 0], e1) + np.outer(v[:, 1], e2)) / safe[:, None]
        return self.radius * (np.outer(np.cos(angle), p) + np.sin(angle)[:, None] * direction)

    @property
    def analytic_c0(self):
        return np.pi / 2

    @property
    def diameter(self):
        return np.pi * self.radius

    @property
    def comparability_radius(self):
        return np.pi * self.radius

    @property
    def max_chart_radius(self):
        return np.pi * self.radius

    @property
    def default_delta(self):
        return np.pi * self.radius / 2

    @property
    def max_norm(self):
        return self.radius

    def descriptor(self):
        return {"kind": self.kind, "scale": self.radius}


class FlatTorus(Manifold):
    """Flat torus (a cos p1, a sin p1, a cos p2, a sin p2) in R^4."""

    kind = "torus"

    def __init__(self, radius: float = 0.9):
        super().__init__(2, 4)
        if not 0 < radius < 1:
            raise ConfigurationError(f"torus radius must lie in (0,1), got {radius}")
        self.radius = float(radius)

    def _embed_raw(self, thetas):
        a = self.radius
        return a * np.column_stack(
            [np.cos(thetas[:, 0]), np.sin(thetas[:, 0]), np.cos(thetas[:, 1]), np.sin(thetas[:, 1])]
        )

    def in_domain(self, thetas):
        return np.all((thetas >= 0) & (thetas <= TWO_PI), axis=1)

    def clip_intrinsic(self, thetas):
        return np.mod(thetas, TWO_PI)

    def intrinsic(self, points):
        pts = np.atleast_2d(points)
        return np.mod(
            np.column_stack([np.arctan2(pts[:, 1], pts[:, 0]), np.arctan2(pts[:, 3], pts[:, 2])]),
            TWO_PI,
        )

    def sample_intrinsic(self, rng, m):
        return rng.uniform(0.0, TWO_PI, size=(m, 2))

    def _geodesic_raw(self, x, y):
        delta = wrap_angle(self.intrinsic(x) - self.intrinsic(y))
        return self.radius * np.linalg.norm(delta, axis=1)

    def log_coordinates(self, center, points):
        c = self.intrinsic(np.atleast_2d(center))[0]
        return self.radius * wrap_angle(self.intrinsic(points) - c)

    def exp_coordinates(self, center, coords):
        c = self.intrinsic(np.atleast_2d(center))[0]
        return self._embed_raw(c + np.atleast_2d(coords) / self.radius)

    @property
    def analytic_c0(self):
        return np.pi / 2

    @property
    def diameter(self):
        return np.pi * self.radius * np.sqrt(2.0)

    @property
    def comparability_radius(self):
        return self.diameter

    @property
    def max_chart_radius(self):
        return np.pi * self.radius

    @property
    def default_delta(self):
        return np.pi * self.radius / 2

    @property
    def max_norm(self):
        return self.radius * np.sqrt(2.0)

    def descriptor(self):
        return {"kind": self.kind, "scale": self.radius}


class SwissRoll(Manifold):
    """
    Swiss roll sheet (c t cos t, h, c t sin t) for t in [t0, t1], |h| <= height.

    The sheet is intrinsically flat: (arc length along the spiral, h) is an
    isometry onto a rectangle, so geodesics are straight lines there. The
    sheet has boundary and is used for geometry checks, not rate sweeps.
    """

    kind = "swiss-roll"

    def __init__(self, scale: float = 0.9, t0: float = 1.5 * np.pi, t1: float = 4.5 * np.pi):
        super().__init__(2, 3)
        if not 0 < scale < 1 or not 0 < t0 < t1:
            raise ConfigurationError("swiss roll needs 0 < scale < 1 and 0 < t0 < t1")
        self.scale = float(scale)
        self.t0, self.t1 = float(t0), float(t1)
        self.c = self.scale / self.t1
        self.height = self.scale
        self._t_table = np.linspace(self.t0, self.t1, 4097)
        self._s_table = self._arc_length(self._t_table)

    def _arc_length(self, t):
        return 0.5 * self.c * (t * np.sqrt(1.0 + t * t) + np.arcsinh(t))

    def _arc_inverse(self, s):
        t = np.interp(s, self._s_table, self._t_table)
        for _ in range(6):
            t = t - (self._arc_length(t) - s) / (self.c * np.sqrt(1.0 + t * t))
        return t

    def _embed_raw(self, thetas):
        t, h = thetas[:, 0], thetas[:, 1]
        return np.column_stack([self.c * t * np.cos(t), h, self.c * t * np.sin(t)])

    def in_domain(self, thetas):
        t, h = thetas[:, 0], thetas[:, 1]
        return (t >= self.t0) & (t <= self.t1) & (np.abs(h) <= self.height)

    def clip_intrinsic(self, thetas):
        return np.column_stack(
            [np.clip(thetas[:, 0], self.t0, self.t1), np.clip(thetas[:, 1], -self.height, self.height)]
        )

    def intrinsic(self, points):
        pts = np.atleast_2d(points)
        t = np.hypot(pts[:, 0], pts[:, 2]) / self.c
        return np.column_stack([t, pts[:, 1]])

    def _flat(self, points):
        th = self.intrinsic(points)
        return np.column_stack([self._arc_length(th[:, 0]), th[:, 1]])

    def sample_intrinsic(self, rng, m):
        s = rng.uniform(self._s_table[0], self._s_table[-1], size=m)
        h = rng.uniform(-self.height, self.height, size=m)
        return np.column_stack([self._arc_inverse(s), h])

    def _geodesic_raw(self, x, y):
        return np.linalg.norm(self._flat(x) - self._flat(y), axis=1)

    def log_coordinates(self, center, points):
        return self._flat(points) - self._flat(np.atleast_2d(center))[0]

    def exp_coordinates(self, center, coords):
        flat = self._flat(np.atleast_2d(center))[0] + np.atleast_2d(coords)
        inside = (
            (flat[:, 0] >= self._s_table[0])
            & (flat[:, 0] <= self._s_table[-1])
            & (np.abs(flat[:, 1]) <= self.height)
        )
        thetas = np.column_stack([self._arc_inverse(flat[:, 0]), flat[:, 1]])
        out = self._embed_raw(thetas)
        out[~inside] = np.nan
        return out

    @property
    def diameter(self):
        return float(np.hypot(self._s_table[-1] - self._s_table[0], 2 * self.height))

    @property
    def comparability_radius(self):
        return np.pi * self.c * self.t0

    @property
    def default_delta(self):
        return 0.5

    @property
    def max_norm(self):
        return float(np.hypot(self.c * self.t1, self.height))

    def descriptor(self):
        return {"kind": self.kind, "scale": self.scale, "t0": self.t0, "t1": self.t1}


class Segment(Manifold):
    """Straight segment from start along a unit direction; theta is arc length."""

    kind = "segment"

    def __init__(self, start, direction, length: float):
        start = np.asarray(start, dtype=float)
        direction = np.asarray(direction, dtype=float)
        super().__init__(1, start.size)
        self.start = start
        self.direction = direction / np.linalg.norm(direction)
        self.length = float(length)
        end = self.start + self.length * self.direction
        if np.any(np.abs(self.start) > 1) or np.any(np.abs(end) > 1):
            raise ConfigurationError("segment must stay inside [-1,1]^D")

    def _embed_raw(self, thetas):
        return self.start + np.outer(thetas[:, 0], self.direction)

    def in_domain(self, thetas):
        return (thetas[:, 0] >= 0) & (thetas[:, 0] <= self.length)

    def clip_intrinsic(self, thetas):
        return np.clip(thetas, 0.0, self.length)

    def intrinsic(self, points):
        return ((np.atleast_2d(points) - self.start) @ self.direction)[:, None]

    def sample_intrinsic(self, rng, m):
        return rng.uniform(0.0, self.length, size=(m, 1))

    def _geodesic_raw(self, x, y):
        return np.abs(self.intrinsic(x)[:, 0] - self.intrinsic(y)[:, 0])

    def log_coordinates(self, center, points):
        return self.intrinsic(points) - self.intrinsic(np.atleast_2d(center))[0]

    def exp_coordinates(self, center, coords):
        t = self.intrinsic(np.atleast_2d(center))[0, 0] + np.atleast_2d(coords)[:, 0]
        out = self._embed_raw(t[:, None])
        out[(t < 0) | (t > self.length)] = np.nan
        return out

    @property
    def analytic_c0(self):
        return 1.0

    @property
    def diameter(self):
        return self.length

    @property
    def comparability_radius(self):
        return self.length

    @property
    def default_delta(self):
        return self.length

    @property
    def max_norm(self):
        return float(max(np.linalg.norm(self.start), np.linalg.norm(self.start + self.length * self.direction)))

    def descriptor(self):
        return {
            "kind": self.kind,
            "start": self.start.tolist(),
            "direction": self.direction.tolist(),
            "length": self.length,
        }


class ProductEmbedding(Manifold):
    """
    A base manifold zero-padded into R^D and rotated by a fixed orthogonal map.

    The image is shrunk by a uniform factor only when the base could leave
    [-1,1]^D after rotation; geodesics scale by the same factor.
    """

    kind = "product-embedding"

    def __init__(self, base: Manifold, ambient_dim: int, rotation_seed: int = 0, scale: float = 0.9):
        if ambient_dim < base.ambient_dim:
            raise ConfigurationError(
                f"ambient_dim {ambient_dim} below the base dimension {base.ambient_dim}"
            )
        super().__init__(base.intrinsic_dim, ambient_dim)
        self.base = base
        self.rotation_seed = int(rotation_seed)
        self.scale = float(scale)
        self.rotation = (
            np.eye(1) if ambient_dim == 1 else ortho_group.rvs(ambient_dim, random_state=self.rotation_seed)
        )
        self.shrink = min(1.0, scale / base.max_norm)

    def _lift(self, base_points):
        padded = np.zeros((base_points.shape[0], self.ambient_dim))
        padded[:, : self.base.ambient_dim] = base_points
        return self.shrink * padded @ self.rotation.T

    def to_base(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return (pts @ self.rotation / self.shrink)[:, : self.base.ambient_dim]

    def _embed_raw(self, thetas):
        return self._lift(self.base._embed_raw(thetas))

    def in_domain(self, thetas):
        return self.base.in_domain(thetas)

    def clip_intrinsic(self, thetas):
        return self.base.clip_intrinsic(thetas)

    def intrinsic(self, points):
        return self.base.intrinsic(self.to_base(points))

    def sample_intrinsic(self, rng, m):
        return self.base.sample_intrinsic(rng, m)

    def _geodesic_raw(self, x, y):
        return self.shrink * self.base._geodesic_raw(self.to_base(x), self.to_base(y))

    def log_coordinates(self, center, points):
        return self.shrink * self.base.log_coordinates(self.to_base(center)[0], self.to_base(points))

    def exp_coordinates(self, center, coords):
        base_pts = self.base.exp_coordinates(self.to_base(center)[0], np.atleast_2d(coords) / self.shrink)
        return self._lift(base_pts)

    @property
    def base_scale(self):
        return self.shrink * self.base.base_scale

    @property
    def analytic_c0(self):
        return self.base.analytic_c0

    @property
    def diameter(self):
        return self.shrink * self.base.diameter

    @property
    def comparability_radius(self):
        return self.shrink * self.base.comparability_radius

    @property
    def max_chart_radius(self):
        return self.shrink * self.base.max_chart_radius

    @property
    def default_delta(self):
        return self.shrink * self.base.default_delta

    @property
    def max_norm(self):
        return self.shrink * self.base.max_norm

    def descriptor(self):
        return {
            "kind": self.kind,
            "ambient_dim": self.ambient_dim,
            "rotation_seed": self.rotation_seed,
            "scale": self.scale,
            "base": self.base.descriptor(),
        }


def manifold_from_descriptor(desc: Dict[str, Any]) -> Manifold:
    """Rebuild a manifold from the dict produced by descriptor()."""
    kind = desc["kind"]
    scale = desc.get("scale", 0.9)
    if kind == "circle":
        return Circle(scale)
    if kind == "sphere":
        return Sphere(scale)
    if kind == "torus":
        return FlatTorus(scale)
    if kind == "swiss-roll":
        return SwissRoll(scale, desc.get("t0", 1.5 * np.pi), desc.get("t1", 4.5 * np.pi))
    if kind == "segment":
        return Segment(desc["start"], desc["direction"], desc["length"])
    if kind == "product-embedding":
        return ProductEmbedding(
            manifold_from_descriptor(desc["base"]),
            ambient_dim=desc["ambient_dim"],
            rotation_seed=desc.get("rotation_seed", 0),
            scale=scale,
        )
    raise ConfigurationError(f"Unknown manifold kind: {kind}")
