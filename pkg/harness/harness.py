"""
Experiment runner: rate sweeps, the feedback-vs-literal comparison, the
ambient-dimension comparison, verification reports and result emission.

Every trial draws from its own seed, derived from (master seed, m, trial),
so adding trials never changes the earlier ones and whole sweeps are
reproducible byte for byte.
"""

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from charts import Atlas, build_atlas
from estimator import DeepNetEstimator, build_estimator, choose_n
from geometry import Circle, Manifold, Noise, SampleSet, Sphere, draw_sample_set, make_target, sample_inputs
from oracle import (
    McReport,
    cardinality_check,
    indicator_crosscheck,
    lemma1_check,
    lemma2_check,
    proposition1_check,
)

from .config import ExperimentConfig

logger = logging.getLogger("Harness")

MONOTONE_SHARE = 0.8


class ExperimentError(RuntimeError):
    """Raised when a trial fails; the message carries (m, trial)."""


def trial_seed(seed: int, m: int, trial: int, stream: str = "train") -> int:
    """64-bit seed from blake2b over the trial coordinates."""
    digest = hashlib.blake2b(f"{seed}:{m}:{trial}:{stream}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def theoretical_slope(s: float, d: int) -> float:
    return -2.0 * s / (2.0 * s + d)


def fit_slope(m_values: Sequence[int], mse: Sequence[float]):
    """
    Least-squares line through (log2 m, log2 mse).

    Returns:
        (slope, intercept), both NaN when some mse is zero or not finite
    """
    mse = np.asarray(mse, dtype=float)
    if len(m_values) < 2 or np.any(~np.isfinite(mse)) or np.any(mse <= 0):
        return float("nan"), float("nan")
    slope, intercept = np.polyfit(np.log2(np.asarray(m_values, dtype=float)), np.log2(mse), 1)
    return float(slope), float(intercept)


def _finite_or_none(value: float) -> Optional[float]:
    return None if value is None or not math.isfinite(value) else float(value)


@dataclass
class RatePoint:
    m: int
    n_used: int
    mse_mean: float
    mse_std: float
    trial_mse: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "n_used": self.n_used,
            "mse_mean": self.mse_mean,
            "mse_std": self.mse_std,
            "log2_m": math.log2(self.m),
            "log_mse": math.log2(self.mse_mean) if self.mse_mean > 0 else None,
            "trial_mse": list(self.trial_mse),
        }


@dataclass
class RateResult:
    """
    One mode's learning curve.

    Attributes:
        mode: estimator mode
        points: per-m statistics in increasing m
        slope, intercept: least-squares fit in log2-log2 coordinates
        theoretical_slope: -2s/(2s+d)
        fingerprint: hash of the generating configuration
        label: series name in comparisons
        diagnostics: extra per-m values (e.g. mean |Lambda'|/|Lambda|)
    """

    mode: str
    points: List[RatePoint]
    slope: float
    intercept: float
    theoretical_slope: float
    fingerprint: str = ""
    label: str = ""
    diagnostics: Dict[str, List[float]] = field(default_factory=dict)

    @property
    def slope_defined(self) -> bool:
        return math.isfinite(self.slope)

    @property
    def mse(self) -> List[float]:
        return [p.mse_mean for p in self.points]

    @property
    def monotone_fraction(self) -> float:
        """Share of adjacent m pairs whose mean mse does not increase; 1.0 below two points."""
        mse = self.mse
        if len(mse) < 2:
            return 1.0
        return sum(b <= a for a, b in zip(mse, mse[1:])) / (len(mse) - 1)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mode": self.mode,
            "label": self.label,
            "config_fingerprint": self.fingerprint,
            "slope": _finite_or_none(self.slope),
            "intercept": _finite_or_none(self.intercept),
            "slope_defined": self.slope_defined,
            "theoretical_slope": self.theoretical_slope,
            "mse_monotone_fraction": self.monotone_fraction,
            "points": [p.to_dict() for p in self.points],
            "diagnostics": {k: [_finite_or_none(v) for v in vs] for k, vs in self.diagnostics.items()},
        }


@dataclass
class FeedbackComparison:
    literal: RateResult
    feedback: RateResult
    ratio: List[float]
    feedback_wins: List[int]
    trials: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "literal": self.literal.to_dict(),
            "feedback": self.feedback.to_dict(),
            "mse_ratio_literal_over_feedback": [_finite_or_none(r) for r in self.ratio],
            "feedback_wins": self.feedback_wins,
            "trials": self.trials,
        }


@dataclass
class DimensionComparison:
    low: RateResult
    high: RateResult

    @property
    def slope_difference(self) -> float:
        return abs(self.low.slope - self.high.slope)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "low": self.low.to_dict(),
            "high": self.high.to_dict(),
            "slope_difference": _finite_or_none(self.slope_difference),
        }


def _lambda_ratio(estimator, test: np.ndarray) -> float:
    """Mean |Lambda'_{x,S}| / |Lambda_{x,S}| over queries with a non-empty Lambda_{x,S}."""
    ratios = [ls.size_xs_prime / ls.size_xs for ls in estimator.lambda_sets_batch(test) if ls.size_xs]
    return float(np.mean(ratios)) if ratios else float("nan")


def _build_atlas(config: ExperimentConfig, manifold: Manifold) -> Atlas:
    return build_atlas(
        manifold, config.atlas.delta, config.seed, config.atlas.chart_backend, config.atlas.safety
    )


def _sweep(
    config: ExperimentConfig,
    modes: Sequence[str],
    manifold: Optional[Manifold] = None,
    lambda_diagnostic: bool = False,
    label: str = "",
):
    manifold = manifold or config.manifold.build()
    target = config.target.build()
    noise = config.noise.build()
    atlas = _build_atlas(config, manifold)
    dist = config.distribution.build(atlas.q_star)
    s, d = target.smoothness, manifold.intrinsic_dim

    per_mode = {mode: [] for mode in modes}
    lambda_means: List[float] = []
    for m in config.m_values:
        n = choose_n(m, s, d, config.n_scale)
        trial_mse = {mode: [] for mode in modes}
        trial_lambda = []
        for trial in range(config.trials):
            try:
                sample = draw_sample_set(
                    manifold, target, noise, m, trial_seed(config.seed, m, trial), dist, bound=config.bound
                )
                test = np.array(
                    sample_inputs(manifold, config.test_points, dist, trial_seed(config.seed, m, trial, "test"))
                )
                local = atlas.ensure_assigned(np.vstack([sample.points, test]))
                est = build_estimator(local, sample, n, gated=config.gated)
                truth = target.evaluate(manifold, test)
                predictions = est.predict_modes(test, modes)
                if lambda_diagnostic:
                    trial_lambda.append(_lambda_ratio(est, test))
            except Exception as e:
                raise ExperimentError(f"trial failed at m={m}, trial={trial}: {e}") from e
            for mode in modes:
                trial_mse[mode].append(float(np.mean((predictions[mode] - truth) ** 2)))
            logger.debug(f"m={m} trial={trial} " + " ".join(f"{k}={v[-1]:.4e}" for k, v in trial_mse.items()))
        for mode in modes:
            values = np.array(trial_mse[mode])
            std = float(values.std(ddof=1)) if values.size > 1 else 0.0
            per_mode[mode].append(RatePoint(m, n, float(values.mean()), std, values.tolist()))
        if lambda_diagnostic:
            finite = [v for v in trial_lambda if math.isfinite(v)]
            lambda_means.append(float(np.mean(finite)) if finite else float("nan"))
        logger.info(
            f"{label or 'sweep'} m={m} n={n}: "
            + ", ".join(f"{mode} mse={per_mode[mode][-1].mse_mean:.4e}" for mode in modes)
        )

    results = {}
    for mode in modes:
        slope, intercept = fit_slope(config.m_values, [p.mse_mean for p in per_mode[mode]])
        if not math.isfinite(slope):
            logger.warning(f"{mode}: log-log slope undefined (zero or non-finite mse)")
        result = RateResult(
            mode, per_mode[mode], slope, intercept, theoretical_slope(s, d), config.fingerprint(), label or mode
        )
        if result.monotone_fraction < MONOTONE_SHARE:
            logger.warning(f"{mode}: mse decreases on only {result.monotone_fraction:.0%} of adjacent m pairs")
        if lambda_diagnostic:
            result.diagnostics["lambda_prime_ratio"] = lambda_means
        results[mode] = result
    return results


def generate_dataset(config: ExperimentConfig, m: int, seed: Optional[int] = None) -> SampleSet:
    """
    One sample set of size m from the configured manifold, target, noise and distribution.

    A boundary-atom distribution needs q*, so the atlas is built first in that case.
    """
    seed = config.seed if seed is None else seed
    manifold = config.manifold.build()
    q_star = 1
    if config.distribution.kind == "boundary-atom":
        q_star = _build_atlas(config, manifold).q_star
    dist = config.distribution.build(q_star)
    return draw_sample_set(
        manifold, config.target.build(), config.noise.build(), m, seed, dist, bound=config.bound
    )


def load_dataset(config: ExperimentConfig, path: Union[str, Path]) -> SampleSet:
    """Read a dataset CSV; M is the configured bound or sup|f| + noise bound."""
    bound = config.bound
    if bound is None:
        bound = config.target.build().sup_norm + config.noise.build().bound
    sample = SampleSet.from_csv(path, bound=bound, seed=config.seed)
    sample.manifold = config.manifold.build().descriptor()
    return sample


def fit_estimator(config: ExperimentConfig, sample: SampleSet, mode: Optional[str] = None) -> DeepNetEstimator:
    """Atlas for the configured manifold, extended to the sample, and the estimator with n = choose_n(m, s, d, n_scale)."""
    manifold = config.manifold.build()
    atlas = _build_atlas(config, manifold).ensure_assigned(sample.points)
    n = choose_n(len(sample), config.target.s, manifold.intrinsic_dim, config.n_scale)
    return build_estimator(atlas, sample, n, gated=config.gated, mode=mode or config.modes[0])


def run_rate_sweeps(config: ExperimentConfig) -> Dict[str, RateResult]:
    """Rate sweep of every configured mode on shared data."""
    return _sweep(config, config.modes)


def run_rate_sweep(config: ExperimentConfig, mode: Optional[str] = None) -> RateResult:
    """
    Rate sweep for one mode (the first configured mode by default).

    Raises:
        ExperimentError: a trial failed; chained to the cause
    """
    mode = mode or config.modes[0]
    return _sweep(config, [mode])[mode]


def run_feedback_comparison(config: ExperimentConfig, baseline: str = "literal") -> FeedbackComparison:
    """
    Literal (or another baseline mode) against feedback on the same data.

    Raises:
        ExperimentError: distribution is not boundary-atom
    """
    if config.distribution.kind != "boundary-atom":
        raise ExperimentError("feedback comparison needs a boundary-atom distribution")
    results = _sweep(config, [baseline, "feedback"], lambda_diagnostic=True)
    base, feedback = results[baseline], results["feedback"]
    ratio = [b.mse_mean / f.mse_mean if f.mse_mean > 0 else float("nan") for b, f in zip(base.points, feedback.points)]
    wins = [
        int(sum(fm < bm for fm, bm in zip(f.trial_mse, b.trial_mse))) for b, f in zip(base.points, feedback.points)
    ]
    return FeedbackComparison(base, feedback, ratio, wins, config.trials)


def run_dimension_comparison(config: ExperimentConfig, high_dim: Optional[int] = None) -> DimensionComparison:
    """
    The same intrinsic manifold at the configured and at a higher ambient dimension.

    Both sweeps share seeds, so the intrinsic parameters of every trial agree.
    """
    mode = config.modes[0]
    low_manifold = config.manifold.build()
    high_spec = config.manifold.model_copy(update={"ambient_dim": high_dim or config.compare_ambient_dim})
    high_manifold = high_spec.build()
    low = _sweep(config, [mode], low_manifold, label=f"D={low_manifold.ambient_dim}")[mode]
    high = _sweep(config, [mode], high_manifold, label=f"D={high_manifold.ambient_dim}")[mode]
    return DimensionComparison(low, high)


def run_verification(seed: int = 0, quick: bool = False) -> List[McReport]:
    """
    Property and Monte-Carlo checks as McReports.

    quick shrinks every sample size for interactive use.
    """
    scale = 0.1 if quick else 1.0
    count = int(100_000 * scale)
    reports = [proposition1_check(count, seed)]
    for manifold in (Circle(0.9), Sphere(0.9)):
        atlas = build_atlas(manifold, seed=seed)
        n = choose_n(1024, 1.0, manifold.intrinsic_dim)
        points = np.array(sample_inputs(manifold, count, seed=seed + 1))
        atlas = atlas.ensure_assigned(points)
        reports.append(indicator_crosscheck(atlas, n, points))
        reports.append(cardinality_check(atlas, n, points))
    for m in (10, 100, 1000):
        for p in (0.01, 0.05, 0.1, 0.5):
            reports.append(lemma1_check(m, p, max(10_000, count), seed))

    circle = Circle(0.9)
    circle_atlas = build_atlas(circle, seed=seed)

    def builder(sample):
        local = circle_atlas.ensure_assigned(np.vstack([sample.points, sample_inputs(circle, 512, seed=seed + 1)]))
        return build_estimator(local, sample, choose_n(len(sample), 1.0, 1))

    reports.append(
        lemma2_check(builder, circle, make_target("sine"), Noise("uniform", 0.2), 50, int(20_000 * scale), seed)
    )
    failed = [r.name for r in reports if not r.passed]
    logger.info(f"Verification finished: {len(reports) - len(failed)}/{len(reports)} passed")
    if failed:
        logger.warning(f"Failed checks: {', '.join(failed)}")
    return reports


Result = Union[RateResult, FeedbackComparison, DimensionComparison, Dict[str, RateResult], List[McReport]]


def result_payload(result: Result) -> Any:
    if isinstance(result, dict):
        return {"results": [r.to_dict() for r in result.values()]}
    if isinstance(result, list):
        return [r.to_dict() for r in result]
    return result.to_dict()


def _series(result: Result) -> List[RateResult]:
    if isinstance(result, RateResult):
        return [result]
    if isinstance(result, dict):
        return list(result.values())
    if isinstance(result, FeedbackComparison):
        return [result.literal, result.feedback]
    if isinstance(result, DimensionComparison):
        return [result.low, result.high]
    raise ValueError("csv output needs rate results")


CSV_COLUMNS = ["series", "m", "n_used", "mse_mean", "mse_std", "log2_m", "log_mse"]


def emit_results(result: Result, path: Union[str, Path], fmt: str = "json") -> Path:
    """
    Write a result as sorted-key JSON or as a plot-ready CSV (one row per m and series).

    Returns:
        the written path
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        with open(path, "w", encoding="utf-8") as f:
            json.dump(result_payload(result), f, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False)
            f.write("\n")
    elif fmt == "csv":
        with open(path, "w", encoding="utf-8", newline="") as f:
            writer = csv.DictWriter(f, fieldnames=CSV_COLUMNS)
            writer.writeheader()
            for series in _series(result):
                for point in series.points:
                    row = point.to_dict()
                    writer.writerow({"series": series.label or series.mode, **{k: row[k] for k in CSV_COLUMNS[1:]}})
    else:
        raise ValueError(f"Unknown result format: {fmt}")
    logger.info(f"Results written to {path}")
    return path


def predict_queries(estimator, queries, mode: str) -> List[Dict[str, Any]]:
    """
    Predictions with Lambda-set sizes, one row per query.

    The estimator's assignment is first extended to the cubes of the queries.
    """
    pts = np.atleast_2d(np.asarray(queries, dtype=float))
    local = estimator.extended(pts)
    predictions = local.predict_batch(pts, mode)
    rows = []
    for x, value, sets in zip(pts, predictions, local.lambda_sets_batch(pts)):
        row = {f"x_{i + 1}": float(c) for i, c in enumerate(x)}
        row.update(
            prediction=float(value),
            mode=mode,
            lambda_x=sets.size_x,
            lambda_xs=sets.size_xs,
            lambda_xs_prime=sets.size_xs_prime,
        )
        rows.append(row)
    return rows


def read_queries(path: Union[str, Path]) -> np.ndarray:
    """Query points from a CSV with a header row; a trailing `y` column is ignored."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    columns = [i for i, name in enumerate(header) if name.startswith("x_")]
    return table[:, columns] if columns else table


def write_predictions(rows: List[Dict[str, Any]], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not rows:
        raise ValueError("no predictions to write")
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    return path
