"""
Finite atlas construction: greedy geodesic cover, embedding constant, grid
resolution q* and the sparse cube -> chart assignment.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, Iterable, List, Optional, Tuple

import numpy as np

from geometry import ConfigurationError, Manifold, manifold_from_descriptor
from netcore import active_cubes, localization_eval_batch

from .charts import ANALYTIC, BACKENDS, Chart, distortion_constants, estimate_embedding_constant, grid_resolution
from .fitting import fit_chart_net

logger = logging.getLogger("Charts")

Index = Tuple[int, ...]

# Candidates are covered to this fraction of delta/2 so fresh points land inside delta/2.
COVER_MARGIN = 0.9

# Sup-norm distance to the manifold beyond which a point opens no cube.
ADMISSION_RADIUS = 1e-6


class CoverError(RuntimeError):
    """Raised when the greedy cover misses sampled points after every retry."""


class AssignmentError(RuntimeError):
    """Raised when no chart ball contains the sampled part of a cube."""


def encode_index(j: Iterable[int]) -> str:
    return ",".join(str(int(c)) for c in j)


def decode_index(key: str) -> Index:
    return tuple(int(c) for c in key.split(","))


@dataclass(frozen=True, eq=False)
class Atlas:
    """
    Charts {xi_i, delta_i} with C0, q* and the cube -> chart map.

    Attributes:
        charts: charts in insertion order of the greedy cover
        c0: embedding constant
        q_star: ambient grid half-resolution
        assignment: sparse map from cube multi-index j to chart index
        manifold: manifold the atlas covers
        delta_policy: "analytic" or "fixed"
    """

    charts: Tuple[Chart, ...]
    c0: float
    q_star: int
    assignment: Dict[Index, int] = field(default_factory=dict)
    manifold: Optional[Manifold] = field(default=None, repr=False)
    delta_policy: str = "analytic"

    @property
    def size(self) -> int:
        """F_X, the number of charts."""
        return len(self.charts)

    @property
    def ambient_dim(self) -> int:
        return self.manifold.ambient_dim

    @property
    def intrinsic_dim(self) -> int:
        return self.manifold.intrinsic_dim

    @property
    def alpha(self) -> float:
        return min(c.alpha for c in self.charts)

    @property
    def beta(self) -> float:
        return max(c.beta for c in self.charts)

    def chart_for(self, j: Index) -> Optional[Chart]:
        idx = self.assignment.get(tuple(j))
        return None if idx is None else self.charts[idx]

    def ensure_assigned(self, points) -> "Atlas":
        """
        Extend the assignment to every cube containing one of the points.

        Points farther than ADMISSION_RADIUS from the manifold are ignored,
        so off-manifold queries never give a chart to a cube that misses X.

        Returns:
            self when nothing is missing, otherwise a new Atlas
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        added = _assign_cubes(self.charts, self.manifold, self.q_star, pts, self.assignment)
        if not added:
            return self
        logger.info(f"Assigned charts to {len(added)} further cubes (total {len(self.assignment) + len(added)})")
        merged = dict(self.assignment)
        merged.update(added)
        return replace(self, assignment=merged)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "manifold": self.manifold.descriptor(),
            "delta_policy": self.delta_policy,
            "charts": [c.to_dict() for c in self.charts],
            "C0": self.c0,
            "q_star": self.q_star,
            "alpha": self.alpha,
            "beta": self.beta,
            "assignment": {encode_index(j): idx for j, idx in sorted(self.assignment.items())},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "Atlas":
        manifold = manifold_from_descriptor(data["manifold"])
        return cls(
            charts=tuple(Chart.from_dict(c, manifold) for c in data["charts"]),
            c0=float(data["C0"]),
            q_star=int(data["q_star"]),
            assignment={decode_index(k): int(v) for k, v in data["assignment"].items()},
            manifold=manifold,
            delta_policy=data.get("delta_policy", "analytic"),
        )


def _distance_to_centers(manifold: Manifold, points: np.ndarray, charts) -> np.ndarray:
    """(N, F) geodesic distances from points to chart centers."""
    return np.column_stack(
        [manifold._geodesic_raw(points, np.broadcast_to(c.center, points.shape)) for c in charts]
    )


def _select_chart(dist: np.ndarray, deltas: np.ndarray) -> Optional[int]:
    """Smallest chart index whose ball holds every row, or None."""
    contains = np.flatnonzero(np.all(dist <= deltas, axis=0))
    return int(contains[0]) if contains.size else None


def _group_by_cube(points: np.ndarray, q: int) -> Dict[Index, List[int]]:
    groups: Dict[Index, List[int]] = {}
    for i, cubes in enumerate(active_cubes(points, q)):
        for j in cubes:
            groups.setdefault(j, []).append(i)
    return groups


def _assign_cubes(charts, manifold: Manifold, q: int, points: np.ndarray, known: Dict[Index, int]) -> Dict[Index, int]:
    on_manifold = manifold.residual(points) <= ADMISSION_RADIUS
    if not np.all(on_manifold):
        logger.debug(f"{int(np.sum(~on_manifold))} points off the {manifold.kind} open no cubes")
        points = points[on_manifold]
    groups = {j: rows for j, rows in _group_by_cube(points, q).items() if j not in known}
    if not groups:
        return {}
    dist = _distance_to_centers(manifold, points, charts)
    deltas = np.array([c.delta for c in charts])
    added = {}
    for j in sorted(groups):
        choice = _select_chart(dist[groups[j]], deltas)
        if choice is None:
            raise AssignmentError(
                f"no chart ball contains the {len(groups[j])} sampled points of cube {j}; "
                f"reduce delta or raise q*"
            )
        added[j] = choice
    return added


def assign_chart_to_cube(
    atlas: Atlas, manifold: Manifold, j: Index, points=None, n_samples: int = 20000, seed: int = 0
) -> Optional[int]:
    """
    Chart index for cube j, or None when the cube misses the manifold.

    Args:
        atlas: atlas providing charts and q*
        manifold: the covered manifold
        j: cube multi-index in {1..2q*}^D
        points: manifold points to test with; a dense uniform sample when omitted
        n_samples: size of that sample
        seed: its seed

    Raises:
        AssignmentError: if the cube meets the manifold but no ball contains it
    """
    j = tuple(int(c) for c in j)
    if points is None:
        rng = np.random.default_rng([seed, 3])
        points = manifold._embed_raw(manifold.sample_intrinsic(rng, n_samples))
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    inside = localization_eval_batch(atlas.q_star, np.tile(j, (pts.shape[0], 1)), pts) == 1
    if not np.any(inside):
        return None
    dist = _distance_to_centers(manifold, pts[inside], atlas.charts)
    choice = _select_chart(dist, np.array([c.delta for c in atlas.charts]))
    if choice is None:
        raise AssignmentError(f"no chart ball contains the sampled part of cube {j}")
    return choice


def greedy_cover(manifold: Manifold, candidates: np.ndarray, radius: float) -> np.ndarray:
    """Farthest-point insertion until every candidate is within radius of a center."""
    chosen = [0]
    nearest = manifold._geodesic_raw(candidates, np.broadcast_to(candidates[0], candidates.shape))
    while nearest.max() > radius:
        idx = int(np.argmax(nearest))
        chosen.append(idx)
        nearest = np.minimum(
            nearest, manifold._geodesic_raw(candidates, np.broadcast_to(candidates[idx], candidates.shape))
        )
    return candidates[chosen]


def build_atlas(
    manifold: Manifold,
    delta: Optional[float] = None,
    seed: int = 0,
    backend: str = ANALYTIC,
    safety: float = 1.1,
    n_candidates: int = 2000,
    n_verify: int = 10000,
    n_assign: int = 20000,
    max_rounds: int = 5,
) -> Atlas:
    """
    Build an atlas for the manifold.

    Args:
        manifold: manifold to cover
        delta: fixed chart radius; None uses the manifold's analytic default
        seed: seed of every sampling step
        backend: "analytic" or "fitted-net" charts
        safety: factor on the sampled embedding constant
        n_candidates: initial greedy-cover candidates
        n_verify: fresh points the cover is verified on
        n_assign: dense sample used for the cube assignment
        max_rounds: densification rounds before giving up

    Raises:
        ConfigurationError: delta not below the injectivity radius
        CoverError: cover not achieved within max_rounds
        AssignmentError: a sampled cube without a containing chart
    """
    if backend not in BACKENDS:
        raise ConfigurationError(f"Unknown chart backend: {backend}")
    policy = "analytic" if delta is None else "fixed"
    delta = float(manifold.default_delta if delta is None else delta)
    if not 0 < delta < manifold.max_chart_radius:
        raise ConfigurationError(
            f"delta={delta:.4f} must lie in (0, {manifold.max_chart_radius:.4f}) for injective charts"
        )

    rng = np.random.default_rng([seed, 0])
    candidates = manifold._embed_raw(manifold.sample_intrinsic(rng, n_candidates))
    verify = manifold._embed_raw(manifold.sample_intrinsic(np.random.default_rng([seed, 1]), n_verify))
    centers = None
    for round_ in range(max_rounds):
        centers = greedy_cover(manifold, candidates, COVER_MARGIN * delta / 2)
        gaps = np.column_stack(
            [manifold._geodesic_raw(verify, np.broadcast_to(c, verify.shape)) for c in centers]
        ).min(axis=1)
        uncovered = verify[gaps > delta / 2]
        if uncovered.shape[0] == 0:
            break
        logger.debug(f"cover round {round_}: {uncovered.shape[0]} verification points uncovered")
        extra = manifold._embed_raw(manifold.sample_intrinsic(rng, candidates.shape[0]))
        candidates = np.vstack([candidates, uncovered, extra])
    else:
        raise CoverError(
            f"greedy cover with delta={delta:.4f} left {uncovered.shape[0]} of {n_verify} points "
            f"uncovered after {max_rounds} rounds"
        )

    charts = []
    for i, center in enumerate(centers):
        chart = Chart(center, delta, ANALYTIC, manifold=manifold)
        if backend != ANALYTIC:
            chart = fit_chart_net(chart, seed=seed + i)
        else:
            chart = chart.with_constants(*distortion_constants(chart, seed=seed + i))
        charts.append(chart)

    c0 = estimate_embedding_constant(manifold, 10000, seed, safety)
    q_star = grid_resolution(c0, manifold.ambient_dim, delta)
    dense = manifold._embed_raw(manifold.sample_intrinsic(np.random.default_rng([seed, 2]), n_assign))
    assignment = _assign_cubes(charts, manifold, q_star, dense, {})
    atlas = Atlas(tuple(charts), c0, q_star, assignment, manifold, policy)
    logger.info(
        f"Atlas built: F_X={atlas.size}, delta={delta:.4f}, C0={c0:.4f}, q*={q_star}, "
        f"{len(assignment)} cubes assigned"
    )
    return atlas
