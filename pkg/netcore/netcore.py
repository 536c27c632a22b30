"""
Activations, grid centers and the two-layer Heaviside localization networks.

N_{1,r,q,zeta_j} is evaluated by its literal nested-Heaviside formula and is
exactly the indicator of the closed cube zeta_j + [-1/(2q), 1/(2q)]^r. The
per-axis quantity xi - zeta is formed once and shared by both inner units,
which keeps the network bit-consistent with a direct comparison.
"""

import itertools
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

Index = Tuple[int, ...]


def _reject_nan(t: np.ndarray) -> None:
    if np.any(np.isnan(t)):
        raise ValueError("activation input is NaN")


def heaviside(t):
    """sigma_0 with sigma_0(0) = 1, so that N1 matches the closed cube."""
    arr = np.asarray(t, dtype=float)
    _reject_nan(arr)
    out = (arr >= 0).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def square_rectifier(t):
    """sigma_2(t) = max(t, 0)^2."""
    arr = np.asarray(t, dtype=float)
    _reject_nan(arr)
    out = np.square(np.maximum(arr, 0.0))
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class GridSpec:
    """(2 * resolution)^dim cube centers on [-1,1]^dim."""

    resolution: int
    dim: int

    def __post_init__(self):
        if self.resolution < 1 or self.dim < 1:
            raise ValueError("resolution and dim must be positive")

    @property
    def count(self) -> int:
        return (2 * self.resolution) ** self.dim


def center_coordinate(index, q: int):
    """zeta^(l) = -1 + (2 j - 1)/(2q), computed as one division."""
    return (-2 * q + 2 * np.asarray(index) - 1) / (2 * q)


def grid_centers(spec: GridSpec) -> np.ndarray:
    """
    All centers in lexicographic order of their multi-indices.

    Returns:
        array of shape ((2q)^r, r)
    """
    axis = center_coordinate(np.arange(1, 2 * spec.resolution + 1), spec.resolution)
    return np.array(list(itertools.product(axis, repeat=spec.dim)), dtype=float).reshape(-1, spec.dim)


def grid_indices(spec: GridSpec) -> List[Index]:
    return list(itertools.product(range(1, 2 * spec.resolution + 1), repeat=spec.dim))


@dataclass(frozen=True)
class LocalizationNet:
    """
    N_{1,r,q,zeta_j}: indicator of the cube with center zeta_j and width 1/q.

    Attributes:
        r: input dimension
        q: grid half-resolution
        j: multi-index in {1..2q}^r
    """

    r: int
    q: int
    j: Index

    def __post_init__(self):
        if len(self.j) != self.r:
            raise ValueError(f"index {self.j} does not have {self.r} components")
        if any(not 1 <= c <= 2 * self.q for c in self.j):
            raise ValueError(f"index {self.j} outside 1..{2 * self.q}")

    @property
    def center(self) -> np.ndarray:
        return center_coordinate(np.array(self.j), self.q)

    def inner_sum(self, xi) -> float:
        """First hidden layer plus bias: 1/2 on the cube, <= -1/2 off it."""
        x = np.asarray(xi, dtype=float).reshape(-1)
        _reject_nan(x)
        half = 1.0 / (2 * self.q)
        delta = x - self.center
        hits = heaviside(half + delta).sum() + heaviside(half - delta).sum()
        return hits - 2 * self.r + 0.5

    def __call__(self, xi) -> int:
        return heaviside(self.inner_sum(xi))


def localization_eval(net: LocalizationNet, xi) -> int:
    """Evaluate N_{1,r,q,zeta_j}(xi) through the nested Heaviside formula."""
    return net(xi)


def localization_eval_batch(q: int, indices: np.ndarray, points: np.ndarray) -> np.ndarray:
    """
    Row-wise N_{1,r,q,zeta_j}(xi) for paired (j, xi) rows.

    Args:
        q: grid half-resolution
        indices: (N, r) integer multi-indices
        points: (N, r) inputs
    """
    pts = np.asarray(points, dtype=float)
    _reject_nan(pts)
    half = 1.0 / (2 * q)
    delta = pts - center_coordinate(np.asarray(indices), q)
    r = pts.shape[1]
    hits = heaviside(half + delta).sum(axis=1) + heaviside(half - delta).sum(axis=1)
    return heaviside(hits - 2 * r + 0.5)


def cube_indicator_oracle(r: int, q: int, j: Sequence[int], xi) -> int:
    """Direct test |xi - zeta| <= 1/(2q) on every axis."""
    x = np.asarray(xi, dtype=float).reshape(-1)
    if x.size != r:
        raise ValueError(f"xi must have {r} coordinates")
    delta = x - center_coordinate(np.asarray(j), q)
    return int(np.all(np.abs(delta) <= 1.0 / (2 * q)))


def _axis_hits(points: np.ndarray, q: int) -> List[List[np.ndarray]]:
    """Per point and axis, the indices whose closed interval holds the coordinate."""
    half = 1.0 / (2 * q)
    base = np.clip(np.floor((points + 1.0) * q).astype(np.int64) + 1, 1, 2 * q)
    candidates = np.stack([base - 1, base, base + 1], axis=-1)
    valid = (candidates >= 1) & (candidates <= 2 * q)
    delta = points[..., None] - center_coordinate(candidates, q)
    valid &= (delta >= -half) & (delta <= half)
    return [[candidates[i, ax][valid[i, ax]] for ax in range(points.shape[1])] for i in range(points.shape[0])]


def active_cubes(points, q: int) -> List[List[Index]]:
    """
    For every point, the multi-indices j with N_{1,r,q,zeta_j}(point) = 1.

    Candidates come from per-axis interval tests; each is then confirmed by
    the localization network itself. Points on shared faces get several
    cubes, points outside [-1,1]^r get none.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    _reject_nan(pts)
    per_point: List[List[Index]] = []
    pair_rows, pair_index = [], []
    for i, axes in enumerate(_axis_hits(pts, q)):
        combos = list(itertools.product(*[a.tolist() for a in axes])) if all(len(a) for a in axes) else []
        per_point.append(combos)
        pair_rows.extend([i] * len(combos))
        pair_index.extend(combos)
    if not pair_index:
        return per_point
    fired = localization_eval_batch(q, np.array(pair_index), pts[pair_rows])
    if not np.all(fired == 1):
        raise AssertionError("localization network disagrees with its interval candidates")
    return per_point


class UnassignedCubeError(KeyError):
    """Raised when a cell indicator is requested for a cube without a chart."""


def composite_cell_eval(atlas, j: Sequence[int], k: Sequence[int], n: int, x, gated: bool = False) -> int:
    """
    N_{3,k,j}(x) = N_{1,d,n,t_k}(N_{2,j}(x)).

    With gated=True the cube gate N_{1,D,q*,zeta_j}(x) multiplies the result,
    which makes it the indicator of the cell H_{k,j}.

    Raises:
        UnassignedCubeError: if cube j has no chart
    """
    j = tuple(int(c) for c in j)
    chart = atlas.chart_for(j)
    if chart is None:
        raise UnassignedCubeError(f"cube {j} has no assigned chart")
    point = np.asarray(x, dtype=float).reshape(-1)
    image, _ = chart.evaluate(point[None, :])
    value = LocalizationNet(len(k), n, tuple(int(c) for c in k))(image[0])
    if gated:
        value *= LocalizationNet(point.size, atlas.q_star, j)(point)
    return int(value)
