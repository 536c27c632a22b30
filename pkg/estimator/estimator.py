"""
The three-hidden-layer deep net estimator.

Layer one gates the sample by its ambient cube (N_{1,D,q*,zeta_j}), layer two
applies the cube's chart (N_{2,j}), layer three localizes the chart image on
the (2n)^d grid (N_{1,d,n,t_k}). Building the estimator evaluates these gated
indicators once per sample and stores per-cell counts T and output sums Sy;
predictions combine the stored sums with the cells firing at the query.

Prediction modes:
  literal   numerator over the firing cells, denominator the total count of
            all sample memberships
  interior  local average over the cells of Lambda_x
  feedback  per-sample weights counting how many of the sample's cells fire
            at the query
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from charts import Atlas
from geometry import SampleSet
from netcore import active_cubes

logger = logging.getLogger("Estimator")

MODES = ("literal", "interior", "feedback")
ACCUMULATION_ORDERS = ("index", "canonical")

Index = Tuple[int, ...]


class EstimatorBuildError(RuntimeError):
    """Raised when a sample falls into a cube without a chart."""


def choose_n(m: int, s: float, d: int, scale: float = 1.0) -> int:
    """
    n = ceil(scale * m^(1/(2s+d))), nudged down by 1e-12 against float overshoot.

    scale only moves the constant in front of the rate; scale 1 is the
    plain ceil(m^(1/(2s+d))).
    """
    if m < 1:
        raise ValueError(f"m must be >= 1, got {m}")
    if not 0 < s <= 1 or d < 1:
        raise ValueError("need s in (0,1] and d >= 1")
    if scale <= 0:
        raise ValueError(f"scale must be positive, got {scale}")
    return max(1, int(math.ceil(scale * m ** (1.0 / (2 * s + d)) - 1e-12)))


@dataclass(frozen=True, order=True)
class CellIndex:
    """Cell H_{k,j}: ambient cube j and chart-space cube k."""

    j: Index
    k: Index

    def to_dict(self) -> Dict[str, List[int]]:
        return {"j": list(self.j), "k": list(self.k)}


@dataclass
class CellTable:
    """
    Sparse per-cell sums.

    Attributes:
        n: chart-space grid half-resolution
        counts: T per cell
        sums: Sy per cell, accumulated in `order`
        memberships: per sample, its cells in lexicographic order
        members: per cell, its samples in accumulation order
        order: accumulation order of sample indices
    """

    n: int
    counts: Dict[CellIndex, int] = field(default_factory=dict)
    sums: Dict[CellIndex, float] = field(default_factory=dict)
    memberships: List[List[CellIndex]] = field(default_factory=list)
    members: Dict[CellIndex, List[int]] = field(default_factory=dict)
    order: List[int] = field(default_factory=list)

    @property
    def total_count(self) -> int:
        return sum(self.counts.values())

    def count(self, cell: CellIndex) -> int:
        return self.counts.get(cell, 0)

    def total(self, cell: CellIndex) -> float:
        return self.sums.get(cell, 0.0)


def _accumulate(n: int, memberships: List[List[CellIndex]], values: np.ndarray, order: Sequence[int]) -> CellTable:
    table = CellTable(n=n, memberships=memberships, order=list(order))
    for i in table.order:
        y = float(values[i])
        for cell in memberships[i]:
            table.counts[cell] = table.counts.get(cell, 0) + 1
            table.sums[cell] = table.sums.get(cell, 0.0) + y
            table.members.setdefault(cell, []).append(i)
    return table


def _canonical_order(points: np.ndarray, values: np.ndarray) -> List[int]:
    """Sample indices sorted lexicographically by (x_1, ..., x_D, y)."""
    keys = np.column_stack([points, values])
    return np.lexsort(keys.T[::-1]).tolist()


def cell_indicators(atlas: Atlas, n: int, points: np.ndarray, gated: bool = True) -> List[List[CellIndex]]:
    """
    For every point the cells (j, k) with N_{3,k,j}(point) = 1, lexicographically sorted.

    Gated evaluation only considers assigned cubes j containing the point;
    ungated evaluation considers every assigned cube.
    """
    if gated:
        cubes = [[j for j in hit if j in atlas.assignment] for hit in active_cubes(points, atlas.q_star)]
    else:
        every = sorted(atlas.assignment)
        cubes = [every for _ in range(points.shape[0])]

    by_chart: Dict[int, List[int]] = defaultdict(list)
    for i, hit in enumerate(cubes):
        for idx in sorted({atlas.assignment[j] for j in hit}):
            by_chart[idx].append(i)
    chart_cells: Dict[Tuple[int, int], List[Index]] = {}
    for idx, rows in by_chart.items():
        images, _ = atlas.charts[idx].evaluate(points[rows])
        for row, ks in zip(rows, active_cubes(images, n)):
            chart_cells[(idx, row)] = ks

    result = []
    for i, hit in enumerate(cubes):
        cells = [CellIndex(j, k) for j in hit for k in chart_cells[(atlas.assignment[j], i)]]
        result.append(sorted(cells))
    return result


@dataclass(frozen=True, eq=False)
class LambdaSets:
    """
    Active-cell diagnostics at one query.

    Attributes:
        lambda_x: cells H_{k,j} with x in cube j and N_{3,k,j}(x) = 1
        lambda_xs: (cell, sample) pairs of samples in S_{Lambda_x} over all their cells
        lambda_xs_prime: the pairs of lambda_xs whose cell also fires at x
    """

    lambda_x: List[CellIndex]
    lambda_xs: List[Tuple[CellIndex, int]]
    lambda_xs_prime: List[Tuple[CellIndex, int]]

    @property
    def size_x(self) -> int:
        return len(self.lambda_x)

    @property
    def size_xs(self) -> int:
        return len(self.lambda_xs)

    @property
    def size_xs_prime(self) -> int:
        return len(self.lambda_xs_prime)

    @property
    def distinct_cells_xs(self) -> int:
        return len({c for c, _ in self.lambda_xs})

    @property
    def distinct_cells_xs_prime(self) -> int:
        return len({c for c, _ in self.lambda_xs_prime})

    def summary(self) -> Dict[str, int]:
        return {
            "lambda_x": self.size_x,
            "lambda_xs": self.size_xs,
            "lambda_xs_prime": self.size_xs_prime,
            "lambda_xs_cells": self.distinct_cells_xs,
            "lambda_xs_prime_cells": self.distinct_cells_xs_prime,
        }


class DeepNetEstimator:
    """
    Built estimator: atlas, cell table and the sample outputs.

    Instances are not modified after build_estimator and can be shared by
    concurrent readers.
    """

    def __init__(
        self,
        atlas: Atlas,
        table: CellTable,
        values: np.ndarray,
        bound: float,
        gated: bool = True,
        mode: str = "feedback",
        accumulation: str = "index",
    ):
        if mode not in MODES:
            raise ValueError(f"Unknown prediction mode: {mode}")
        if accumulation not in ACCUMULATION_ORDERS:
            raise ValueError(f"Unknown accumulation order: {accumulation}")
        self.atlas = atlas
        self.table = table
        self.values = np.asarray(values, dtype=float)
        self.bound = float(bound)
        self.gated = gated
        self.mode = mode
        self.accumulation = accumulation
        self._rank = {i: r for r, i in enumerate(table.order)}

    @property
    def n(self) -> int:
        return self.table.n

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def extended(self, points) -> "DeepNetEstimator":
        """The same estimator over an atlas whose assignment also covers `points`."""
        atlas = self.atlas.ensure_assigned(np.atleast_2d(np.asarray(points, dtype=float)))
        if atlas is self.atlas:
            return self
        return DeepNetEstimator(atlas, self.table, self.values, self.bound, self.gated, self.mode, self.accumulation)

    def firing_cells(self, points, gated: Optional[bool] = None) -> List[List[CellIndex]]:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cell_indicators(self.atlas, self.n, pts, self.gated if gated is None else gated)

    def _sample_counts(self, cells: List[CellIndex]) -> Dict[int, int]:
        """Per sample, the number of its cells among `cells`."""
        counts: Dict[int, int] = defaultdict(int)
        for cell in cells:
            for i in self.table.members.get(cell, ()):
                counts[i] += 1
        return counts

    def _literal(self, cells: List[CellIndex]) -> float:
        denominator = self.table.total_count
        if denominator == 0:
            return 0.0
        numerator = 0.0
        for cell in cells:
            numerator += self.table.total(cell)
        return numerator / denominator

    def _interior(self, cells: List[CellIndex]) -> float:
        numerator, denominator = 0.0, 0
        for cell in cells:
            numerator += self.table.total(cell)
            denominator += self.table.count(cell)
        return numerator / denominator if denominator else 0.0

    def _feedback(self, cells: List[CellIndex]) -> float:
        counts = self._sample_counts(cells)
        numerator, denominator = 0.0, 0
        for i in sorted(counts, key=self._rank.__getitem__):
            numerator += float(self.values[i]) * counts[i]
            denominator += counts[i]
        return numerator / denominator if denominator else 0.0

    def _combine(self, mode: str, gated_cells: List[CellIndex], fired: List[CellIndex]) -> float:
        if mode == "interior":
            return self._interior(gated_cells)
        if mode == "literal":
            return self._literal(fired)
        return self._feedback(fired)

    def predict(self, x, mode: Optional[str] = None) -> float:
        return float(self.predict_batch(np.atleast_2d(np.asarray(x, dtype=float)), mode)[0])

    def _query_cells(self, pts: np.ndarray, modes: Sequence[str]):
        """Lambda_x per query, plus the firing cells used by literal and feedback."""
        gated_cells = self.firing_cells(pts, gated=True)
        if self.gated or all(mode == "interior" for mode in modes):
            return gated_cells, gated_cells
        return gated_cells, self.firing_cells(pts, gated=False)

    def predict_modes(self, queries, modes: Sequence[str]) -> Dict[str, np.ndarray]:
        """Predictions of several modes sharing one cell evaluation."""
        for mode in modes:
            if mode not in MODES:
                raise ValueError(f"Unknown prediction mode: {mode}")
        pts = np.atleast_2d(np.asarray(queries, dtype=float))
        gated_cells, fired = self._query_cells(pts, modes)
        return {
            mode: np.array([self._combine(mode, g, f) for g, f in zip(gated_cells, fired)], dtype=float)
            for mode in modes
        }

    def predict_batch(self, queries, mode: Optional[str] = None) -> np.ndarray:
        mode = mode or self.mode
        return self.predict_modes(queries, [mode])[mode]

    def smoother_matrix(self, queries, mode: Optional[str] = None) -> np.ndarray:
        """
        Weights W with prediction = W @ y for every query row.

        Returns:
            (Q, m) array; rows of interior and feedback sum to 1 or are zero
        """
        mode = mode or self.mode
        pts = np.atleast_2d(np.asarray(queries, dtype=float))
        gated_cells, fired = self._query_cells(pts, [mode])
        weights = np.zeros((pts.shape[0], self.m))
        total = self.table.total_count
        for row, (g, f) in enumerate(zip(gated_cells, fired)):
            counts = self._sample_counts(g if mode == "interior" else f)
            denominator = total if mode == "literal" else sum(counts.values())
            if denominator == 0:
                continue
            for i, c in counts.items():
                weights[row, i] = c / denominator
        return weights

    def lambda_sets_batch(self, queries) -> List[LambdaSets]:
        pts = np.atleast_2d(np.asarray(queries, dtype=float))
        gated_cells, fired = self._query_cells(pts, ["feedback"])
        result = []
        for lam, fire in zip(gated_cells, fired):
            fire = set(fire)
            samples = sorted(self._sample_counts(lam))
            pairs = [(cell, i) for i in samples for cell in self.table.memberships[i]]
            result.append(LambdaSets(lam, pairs, [(cell, i) for cell, i in pairs if cell in fire]))
        return result

    def lambda_sets(self, x) -> LambdaSets:
        return self.lambda_sets_batch(np.atleast_2d(np.asarray(x, dtype=float)))[0]

    def to_dict(self, atlas_ref: str = "") -> Dict[str, Any]:
        return {
            "atlas_ref": atlas_ref,
            "n": self.n,
            "M": self.bound,
            "gated": self.gated,
            "mode": self.mode,
            "accumulation": self.accumulation,
            "order": list(self.table.order),
            "cells": [
                {"j": list(c.j), "k": list(c.k), "T": self.table.counts[c], "Sy": self.table.sums[c]}
                for c in sorted(self.table.counts)
            ],
            "samples": [
                {"y": float(y), "cells": [c.to_dict() for c in cells]}
                for y, cells in zip(self.values, self.table.memberships)
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], atlas: Atlas) -> "DeepNetEstimator":
        memberships = [
            [CellIndex(tuple(c["j"]), tuple(c["k"])) for c in sample["cells"]] for sample in data["samples"]
        ]
        values = np.array([sample["y"] for sample in data["samples"]], dtype=float)
        order = data.get("order", list(range(len(values))))
        table = CellTable(n=int(data["n"]), memberships=memberships, order=list(order))
        for cell in data["cells"]:
            key = CellIndex(tuple(cell["j"]), tuple(cell["k"]))
            table.counts[key] = int(cell["T"])
            table.sums[key] = float(cell["Sy"])
        for i in table.order:
            for cell in memberships[i]:
                table.members.setdefault(cell, []).append(i)
        return cls(
            atlas,
            table,
            values,
            float(data["M"]),
            gated=bool(data.get("gated", True)),
            mode=data.get("mode", "feedback"),
            accumulation=data.get("accumulation", "index"),
        )


def build_estimator(
    atlas: Atlas,
    sample_set: SampleSet,
    n: int,
    gated: bool = True,
    mode: str = "feedback",
    accumulation: str = "index",
) -> DeepNetEstimator:
    """
    Evaluate the gated cell indicators on every sample and accumulate T, Sy.

    Args:
        atlas: atlas whose assignment covers every cube hit by a sample
        sample_set: training samples
        n: chart-space grid half-resolution
        gated: query-side cube gating for literal and feedback predictions
        mode: default prediction mode
        accumulation: "index" (sample order) or "canonical" (sorted by (x, y))

    Raises:
        EstimatorBuildError: a sample outside [-1,1]^D or in an unassigned cube
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    points = sample_set.points
    if len(sample_set):
        hits = active_cubes(points, atlas.q_star)
        for i, cubes in enumerate(hits):
            if not cubes:
                raise EstimatorBuildError(f"sample {i} lies outside [-1,1]^D")
            missing = [j for j in cubes if j not in atlas.assignment]
            if missing:
                raise EstimatorBuildError(f"sample {i} falls into cube {missing[0]} which has no chart")
        memberships = cell_indicators(atlas, n, points, gated=True)
    else:
        memberships = []
    order = (
        _canonical_order(points, sample_set.values)
        if accumulation == "canonical" and len(sample_set)
        else list(range(len(sample_set)))
    )
    table = _accumulate(n, memberships, sample_set.values, order)
    logger.info(
        f"Estimator built: m={len(sample_set)}, n={n}, {len(table.counts)} non-empty cells, "
        f"{table.total_count} memberships"
    )
    return DeepNetEstimator(atlas, table, sample_set.values, sample_set.bound, gated, mode, accumulation)


def predict_literal(est: DeepNetEstimator, x) -> float:
    """Printed-formula prediction: firing-cell sums over the global membership count."""
    return est.predict(x, "literal")


def predict_interior(est: DeepNetEstimator, x) -> float:
    """Local average over Lambda_x; 0 when no sample shares a cell with x."""
    return est.predict(x, "interior")


def predict_feedback(est: DeepNetEstimator, x) -> float:
    """Feedback-corrected prediction sum_i y_i sum Phi / sum_i sum Phi."""
    return est.predict(x, "feedback")


def predict_batch(est: DeepNetEstimator, queries, mode: Optional[str] = None) -> np.ndarray:
    return est.predict_batch(queries, mode)


def smoother_matrix(est: DeepNetEstimator, queries, mode: Optional[str] = None) -> np.ndarray:
    return est.smoother_matrix(queries, mode)


def lambda_sets(est: DeepNetEstimator, x) -> LambdaSets:
    return est.lambda_sets(x)
