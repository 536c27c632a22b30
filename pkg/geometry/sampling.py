"""
Input distributions, bounded noise and sample-set generation.

All draws are pure functions of (parameters, seed): every call derives its
own generator from numpy's SeedSequence as default_rng([seed, stream]).
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Optional, Union

import numpy as np
from scipy.optimize import brentq
from scipy.stats import truncnorm

from .manifolds import ConfigurationError, DomainError, Manifold
from .targets import TargetFunction

logger = logging.getLogger("Geometry")

# Streams of one seed: inputs, atoms, noise.
STREAM_INPUTS = 0
STREAM_ATOMS = 1
STREAM_NOISE = 2

EMBED_TOL = 1e-12


@dataclass(frozen=True)
class Uniform:
    """Uniform distribution with respect to the Riemannian volume."""

    kind: str = "uniform"


@dataclass(frozen=True)
class BoundaryAtom:
    """
    Uniform draws where each point is, with probability p_atom, replaced by a
    manifold point sitting exactly on an interior face of the cube grid of
    resolution q_star.
    """

    q_star: int
    p_atom: float
    kind: str = "boundary-atom"

    def __post_init__(self):
        if not 0 <= self.p_atom <= 1:
            raise ConfigurationError(f"p_atom must lie in [0,1], got {self.p_atom}")
        if self.q_star < 1:
            raise ConfigurationError("q_star must be >= 1")


Distribution = Union[Uniform, BoundaryAtom]


@dataclass(frozen=True)
class Noise:
    """
    Bounded zero-mean noise.

    Attributes:
        kind: "none", "uniform" (on [-amplitude, amplitude]) or
              "truncated-gaussian" (N(0, sigma^2) truncated at +-amplitude)
        amplitude: bound on |epsilon|
        sigma: Gaussian scale for the truncated family
    """

    kind: str = "uniform"
    amplitude: float = 0.2
    sigma: float = 0.1

    def __post_init__(self):
        if self.kind not in ("none", "uniform", "truncated-gaussian"):
            raise ConfigurationError(f"Unknown noise kind: {self.kind}")
        if self.amplitude < 0 or self.sigma <= 0:
            raise ConfigurationError("noise amplitude must be >= 0 and sigma > 0")

    @property
    def bound(self) -> float:
        return 0.0 if self.kind == "none" else self.amplitude

    def draw(self, rng: np.random.Generator, m: int) -> np.ndarray:
        if self.kind == "none" or self.amplitude == 0:
            return np.zeros(m)
        if self.kind == "uniform":
            return rng.uniform(-self.amplitude, self.amplitude, size=m)
        cut = self.amplitude / self.sigma
        return truncnorm.rvs(-cut, cut, scale=self.sigma, size=m, random_state=rng)


@dataclass
class SampleSet:
    """
    Ordered samples (x_i, y_i) with |y_i| <= bound.

    Attributes:
        points: (m, D) ambient inputs
        values: (m,) outputs
        bound: the constant M
        seed: generating seed
        manifold: manifold descriptor
        intrinsic: (m, d) parameters the inputs were generated from, if known
    """

    points: np.ndarray
    values: np.ndarray
    bound: float
    seed: int = 0
    manifold: Dict[str, Any] = field(default_factory=dict)
    intrinsic: Optional[np.ndarray] = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.points.shape[0] != self.values.shape[0]:
            raise ConfigurationError("points and values must have the same length")
        if np.any(np.abs(self.values) > self.bound):
            raise ConfigurationError(f"sample outputs exceed the bound M={self.bound}")

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.points.shape[1]

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write `x_1,...,x_D,y` rows with 17 significant digits."""
        path = Path(path)
        header = ",".join([f"x_{i + 1}" for i in range(self.ambient_dim)] + ["y"])
        table = np.column_stack([self.points, self.values])
        np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g")
        return path

    @classmethod
    def from_csv(cls, path: Union[str, Path], bound: Optional[float] = None, seed: int = 0) -> "SampleSet":
        table = np.loadtxt(Path(path), delimiter=",", skiprows=1, ndmin=2)
        values = table[:, -1]
        return cls(
            points=table[:, :-1],
            values=values,
            bound=float(np.max(np.abs(values))) if bound is None else bound,
            seed=seed,
        )


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), stream])


def _face_planes(q_star: int) -> np.ndarray:
    i = np.arange(1, 2 * q_star)
    return (-q_star + i) / q_star


def _place_on_face(
    manifold: Manifold, theta: np.ndarray, q_star: int, rng: np.random.Generator, attempts: int = 200
) -> Optional[np.ndarray]:
    """
    Move a point along a random intrinsic direction until one ambient
    coordinate hits a grid face, then pin that coordinate to the face value.
    """
    planes = _face_planes(q_star)
    for _ in range(attempts):
        axis = int(rng.integers(manifold.ambient_dim))
        x0 = manifold._embed_raw(theta[None, :])[0]
        plane = float(planes[np.argmin(np.abs(planes - x0[axis]))])
        direction = rng.normal(size=manifold.intrinsic_dim)
        direction /= np.linalg.norm(direction)
        span = 2.0 * manifold.diameter
        steps = np.linspace(-span, span, 129)
        grid = theta[None, :] + steps[:, None] * direction[None, :]
        raw = manifold._embed_raw(grid)
        canonical = manifold._embed_raw(manifold.clip_intrinsic(grid))
        valid = np.all(np.abs(raw - canonical) <= EMBED_TOL, axis=1)
        g = raw[:, axis] - plane
        g[~valid] = np.nan
        order = np.argsort(np.abs(steps))
        for idx in order:
            if idx + 1 >= len(steps):
                continue
            lo, hi = g[idx], g[idx + 1]
            if np.isnan(lo) or np.isnan(hi) or lo * hi > 0:
                continue

            def f(t: float) -> float:
                return manifold._embed_raw((theta + t * direction)[None, :])[0, axis] - plane

            t_star = brentq(f, steps[idx], steps[idx + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
            point = manifold._embed_raw((theta + t_star * direction)[None, :])[0]
            if abs(point[axis] - plane) > EMBED_TOL:
                break
            point[axis] = plane
            return point
        theta = manifold.sample_intrinsic(rng, 1)[0]
    return None


def sample_inputs(
    manifold: Manifold, m: int, dist: Optional[Distribution] = None, seed: int = 0
) -> List[np.ndarray]:
    """
    Draw m inputs from the chosen distribution.

    Args:
        manifold: the input manifold
        m: number of points (>= 1)
        dist: Uniform() (default) or BoundaryAtom(q_star, p_atom)
        seed: generating seed

    Returns:
        List of AmbientPoints in generation order
    """
    points, _ = _draw_inputs(manifold, m, dist or Uniform(), seed)
    return list(points)


def _draw_inputs(manifold: Manifold, m: int, dist: Distribution, seed: int):
    if m < 1:
        raise ConfigurationError(f"m must be >= 1, got {m}")
    thetas = manifold.sample_intrinsic(_rng(seed, STREAM_INPUTS), m)
    points = manifold._embed_raw(thetas)
    if isinstance(dist, BoundaryAtom) and dist.p_atom > 0:
        rng = _rng(seed, STREAM_ATOMS)
        atoms = rng.random(m) < dist.p_atom
        for i in np.flatnonzero(atoms):
            placed = _place_on_face(manifold, thetas[i], dist.q_star, rng)
            if placed is None:
                raise DomainError("could not place a boundary atom on the cube grid")
            points[i] = placed
            thetas[i] = manifold.intrinsic(placed[None, :])[0]
        logger.debug(f"Placed {int(atoms.sum())} boundary atoms out of {m} inputs")
    return points, thetas


def draw_sample_set(
    manifold: Manifold,
    target: TargetFunction,
    noise: Noise,
    m: int,
    seed: int,
    dist: Optional[Distribution] = None,
    bound: Optional[float] = None,
) -> SampleSet:
    """
    Draw S_m = {(x_i, f(x_i) + eps_i)}.

    Args:
        bound: the constant M; defaults to sup|f| + noise bound

    Raises:
        ConfigurationError: if the noise bound does not fit under M
    """
    limit = target.sup_norm + noise.bound if bound is None else float(bound)
    if noise.bound > limit - target.sup_norm + 1e-15:
        raise ConfigurationError(
            f"noise bound {noise.bound} exceeds the margin M - sup|f| = {limit - target.sup_norm}"
        )
    points, thetas = _draw_inputs(manifold, m, dist or Uniform(), seed)
    eps = noise.draw(_rng(seed, STREAM_NOISE), m)
    values = np.clip(target.evaluate(manifold, points) + eps, -limit, limit)
    return SampleSet(
        points=points,
        values=values,
        bound=limit,
        seed=seed,
        manifold=manifold.descriptor(),
        intrinsic=thetas,
    )


class ComparabilityReport(NamedTuple):
    min_ratio: float
    max_ratio: float
    n_pairs: int

    @property
    def holds(self) -> bool:
        return self.min_ratio >= 0.5 and self.max_ratio <= 2.0


def check_comparability(manifold: Manifold, n_pairs: int, seed: int) -> ComparabilityReport:
    """
    Check 1/2 d_G <= ||x - x'|| <= 2 d_G on pairs closer than the
    manifold's comparability radius.
    """
    rng = _rng(seed, STREAM_INPUTS)
    a = manifold.sample_intrinsic(rng, n_pairs)
    b = manifold.sample_intrinsic(rng, n_pairs)
    x, y = manifold._embed_raw(a), manifold._embed_raw(b)
    dist = manifold._geodesic_raw(x, y)
    keep = (dist > 1e-12) & (dist < manifold.comparability_radius)
    if not np.any(keep):
        return ComparabilityReport(float("nan"), float("nan"), 0)
    ratio = np.linalg.norm(x[keep] - y[keep], axis=1) / dist[keep]
    return ComparabilityReport(float(ratio.min()), float(ratio.max()), int(keep.sum()))
