"""
Brute-force references and Monte-Carlo checks.

Cell membership here uses direct coordinate comparisons instead of the
Heaviside networks, and the local average is summed cell by cell; both serve
as independent references for the estimator.
"""

import itertools
import logging
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
from scipy.stats import binom

from charts import Atlas
from estimator import CellIndex, DeepNetEstimator, cell_indicators
from geometry import Manifold, Noise, SampleSet, TargetFunction, draw_sample_set, sample_inputs
from netcore import LocalizationNet, center_coordinate, cube_indicator_oracle, localization_eval_batch

logger = logging.getLogger("Oracle")

MIN_LEMMA1_TRIALS = 10_000
LEMMA2_QUERIES = 512


@dataclass
class McReport:
    """
    Outcome of one Monte-Carlo or exhaustive check.

    passed is estimate <= bound + 3 std_error for kind "bound" and
    |estimate - bound| <= 3 std_error for kind "identity".
    """

    name: str
    estimate: float
    bound: float
    trials: int
    std_error: float
    passed: bool
    kind: str = "bound"
    details: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _axis_members(coords: np.ndarray, q: int) -> List[np.ndarray]:
    """Indices j on one axis with |x - zeta_j| <= 1/(2q)."""
    half = 1.0 / (2 * q)
    guess = np.floor((coords + 1.0) * q).astype(np.int64) + 1
    cands = guess[:, None] + np.array([-1, 0, 1], dtype=np.int64)
    centers = center_coordinate(cands, q)
    keep = (cands >= 1) & (cands <= 2 * q) & (np.abs(coords[:, None] - centers) <= half)
    return [row[mask] for row, mask in zip(cands, keep)]


def _closed_cubes(points: np.ndarray, q: int) -> List[List[tuple]]:
    per_axis = [_axis_members(points[:, ax], q) for ax in range(points.shape[1])]
    return [
        [tuple(int(c) for c in combo) for combo in itertools.product(*[axis[i] for axis in per_axis])]
        for i in range(points.shape[0])
    ]


def cell_membership_batch(atlas: Atlas, n: int, points) -> List[List[CellIndex]]:
    """cell_membership for many points; each chart is evaluated once on all rows that need it."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    cubes = [[j for j in hit if atlas.chart_for(j) is not None] for hit in _closed_cubes(pts, atlas.q_star)]

    by_chart: Dict[int, List[int]] = defaultdict(list)
    for i, hit in enumerate(cubes):
        for idx in sorted({atlas.assignment[j] for j in hit}):
            by_chart[idx].append(i)
    chart_cells: Dict[Tuple[int, int], List[tuple]] = {}
    for idx, rows in by_chart.items():
        images, _ = atlas.charts[idx].evaluate(pts[rows])
        for row, ks in zip(rows, _closed_cubes(images, n)):
            chart_cells[(idx, row)] = ks

    return [
        sorted(CellIndex(j, k) for j in hit for k in chart_cells[(atlas.assignment[j], i)])
        for i, hit in enumerate(cubes)
    ]


def cell_membership(atlas: Atlas, n: int, x) -> List[CellIndex]:
    """
    Cells H_{k,j} containing x by direct comparison.

    x must lie in the closed cube j (coordinate comparisons) and its chart
    image in the closed cell k; cubes without a chart contribute nothing.
    """
    return cell_membership_batch(atlas, n, np.asarray(x, dtype=float).reshape(1, -1))[0]


def partition_local_average(atlas: Atlas, n: int, samples: SampleSet, x) -> float:
    """
    Mean of the outputs of samples sharing a cell with x, counted once per shared cell.

    Sums run over x's cells in lexicographic order and, inside a cell, over
    samples in ascending index order.
    """
    cells_x = cell_membership(atlas, n, x)
    if not cells_x or len(samples) == 0:
        return 0.0
    sample_cells = cell_membership_batch(atlas, n, samples.points)
    numerator, denominator = 0.0, 0
    for cell in cells_x:
        cell_sum = 0.0
        for i, cells in enumerate(sample_cells):
            if cell in cells:
                cell_sum += float(samples.values[i])
                denominator += 1
        numerator += cell_sum
    return numerator / denominator if denominator else 0.0


def lemma1_exact(m: int, p: float) -> float:
    """E[I(T>0)/T] for T ~ Binomial(m, p) by direct pmf summation."""
    k = np.arange(1, m + 1)
    return float(np.sum(binom.pmf(k, m, p) / k))


def lemma1_check(m: int, p: float, trials: int, seed: int) -> McReport:
    """
    Monte-Carlo check of E[I(T>0)/T] <= 2/((m+1)p).

    Raises:
        ValueError: p outside (0,1] or fewer than 10^4 trials
    """
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0,1], got {p}")
    if trials < MIN_LEMMA1_TRIALS:
        raise ValueError(f"need at least {MIN_LEMMA1_TRIALS} trials")
    rng = np.random.default_rng([seed, m, int(round(p * 1e6))])
    t = rng.binomial(m, p, size=trials)
    ratio = np.zeros(trials)
    hit = t > 0
    ratio[hit] = 1.0 / t[hit]
    estimate = float(ratio.mean())
    se = float(ratio.std(ddof=1) / math.sqrt(trials))
    bound = 2.0 / ((m + 1) * p)
    exact = lemma1_exact(m, p)
    return McReport(
        name=f"lemma1[m={m},p={p}]",
        estimate=estimate,
        bound=bound,
        trials=trials,
        std_error=se,
        passed=bool(estimate <= bound + 3 * se),
        details={"exact": exact, "exact_agrees": bool(abs(estimate - exact) <= 3 * se + 1e-15)},
    )


def lemma2_check(
    builder: Callable[[SampleSet], DeepNetEstimator],
    manifold: Manifold,
    target: TargetFunction,
    noise: Noise,
    m: int,
    trials: int,
    seed: int,
    mode: str = "feedback",
    chunk: int = 2048,
) -> McReport:
    """
    Bias-variance decomposition check with a fixed design.

    Inputs are drawn once; outputs are redrawn per trial. The estimator is
    linear in y for fixed inputs, so E[f_S | x] is the smoother applied to
    f(x_i). mu is the empirical measure of a fixed 512-point query set.

    Returns:
        identity report on the cross term; details carry the variance, bias^2,
        left-hand side and decomposition residual
    """
    design = draw_sample_set(manifold, target, Noise("none"), m, seed)
    estimator = builder(design)
    queries = np.array(sample_inputs(manifold, LEMMA2_QUERIES, seed=seed + 1))
    weights = estimator.smoother_matrix(queries, mode)
    f_design = target.evaluate(manifold, design.points)
    f_query = target.evaluate(manifold, queries)
    smoothed = (f_design[None, :] @ weights.T)[0]
    bias2 = float(np.mean((smoothed - f_query) ** 2))

    rng = np.random.default_rng([seed, 7])
    cross, variance, lhs = [], [], []
    done = 0
    while done < trials:
        size = min(chunk, trials - done)
        outputs = f_design[None, :] + np.stack([noise.draw(rng, m) for _ in range(size)])
        fits = outputs @ weights.T
        spread = fits - smoothed[None, :]
        cross.append(np.mean(spread * (smoothed - f_query)[None, :], axis=1))
        variance.append(np.mean(spread ** 2, axis=1))
        lhs.append(np.mean((fits - f_query[None, :]) ** 2, axis=1))
        done += size
    cross = np.concatenate(cross)
    variance = np.concatenate(variance)
    lhs = np.concatenate(lhs)
    residual = lhs - variance - bias2

    def _se(values: np.ndarray) -> float:
        return float(values.std(ddof=1) / math.sqrt(values.size)) if values.size > 1 else 0.0

    estimate, se = float(cross.mean()), _se(cross)
    res_mean, res_se = float(residual.mean()), _se(residual)
    return McReport(
        name=f"lemma2[m={m},mode={mode}]",
        estimate=estimate,
        bound=0.0,
        trials=trials,
        std_error=se,
        passed=bool(abs(estimate) <= 3 * se + 1e-12),
        kind="identity",
        details={
            "variance": float(variance.mean()),
            "bias2": bias2,
            "lhs": float(lhs.mean()),
            "residual": res_mean,
            "residual_std_error": res_se,
            "decomposition_passed": bool(abs(res_mean) <= 3 * res_se + 1e-12),
        },
    )


def proposition1_check(cases: int, seed: int, boundary_cases: int = 1000) -> McReport:
    """
    Heaviside localization network against the direct cube test.

    Random (r <= 3, q <= 8, j, xi) cases, the last `boundary_cases` of them
    with one coordinate placed exactly on a cube face.
    """
    rng = np.random.default_rng([seed, 11])
    r = rng.integers(1, 4, size=cases)
    q = rng.integers(1, 9, size=cases)
    mismatches = 0
    for dim in range(1, 4):
        for res in range(1, 9):
            rows = np.flatnonzero((r == dim) & (q == res))
            if rows.size == 0:
                continue
            j = rng.integers(1, 2 * res + 1, size=(rows.size, dim))
            xi = rng.uniform(-1.2, 1.2, size=(rows.size, dim))
            on_face = rows >= cases - boundary_cases
            if np.any(on_face):
                axis = rng.integers(dim, size=int(on_face.sum()))
                side = rng.choice([-1.0, 1.0], size=int(on_face.sum()))
                centers = center_coordinate(j[on_face, axis], res)
                face_rows = np.flatnonzero(on_face)
                xi[face_rows, axis] = centers + side / (2 * res)
            net = localization_eval_batch(res, j, xi)
            direct = np.all(np.abs(xi - center_coordinate(j, res)) <= 1.0 / (2 * res), axis=1).astype(int)
            mismatches += int(np.sum(net != direct))
    # scalar path on a subsample
    for _ in range(min(cases, 200)):
        dim, res = int(rng.integers(1, 4)), int(rng.integers(1, 9))
        j = tuple(int(c) for c in rng.integers(1, 2 * res + 1, size=dim))
        xi = rng.uniform(-1.2, 1.2, size=dim)
        mismatches += int(LocalizationNet(dim, res, j)(xi) != cube_indicator_oracle(dim, res, j, xi))
    return McReport("proposition1", float(mismatches), 0.0, cases, 0.0, mismatches == 0, "identity")


def indicator_crosscheck(atlas: Atlas, n: int, points) -> McReport:
    """Gated composite indicators against cell_membership on the given points."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    net_cells = cell_indicators(atlas, n, pts, gated=True)
    direct = cell_membership_batch(atlas, n, pts)
    mismatches = sum(a != b for a, b in zip(net_cells, direct))
    return McReport(
        f"indicator-crosscheck[{atlas.manifold.kind}]", float(mismatches), 0.0, len(pts), 0.0, mismatches == 0, "identity"
    )


def cardinality_check(atlas: Atlas, n: int, queries) -> McReport:
    """|Lambda_x| <= 2^(D+d) over the query points."""
    pts = np.atleast_2d(np.asarray(queries, dtype=float))
    cap = 2 ** (atlas.ambient_dim + atlas.intrinsic_dim)
    sizes = np.array([len(c) for c in cell_indicators(atlas, n, pts, gated=True)])
    violations = int(np.sum(sizes > cap))
    return McReport(
        f"cardinality[{atlas.manifold.kind}]",
        float(sizes.max(initial=0)),
        float(cap),
        len(pts),
        0.0,
        violations == 0,
        details={"violations": violations},
    )

