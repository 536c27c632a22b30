"""
Chart maps Phi_xi from geodesic balls onto [-1,1]^d and their constants.

An analytic chart divides the manifold's normal-style coordinates around the
center by the radius delta. A fitted chart carries a square-rectifier network
(see fitting.py) trained against the analytic one.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from geometry import ConfigurationError, Manifold

logger = logging.getLogger("Charts")

ANALYTIC = "analytic"
FITTED = "fitted-net"
BACKENDS = (ANALYTIC, FITTED)

# Slack on the unit ball / unit cube before an output is flagged out of domain.
BALL_TOL = 1e-12

MIN_DISTORTION_PAIRS = 1000


def sample_ball(manifold: Manifold, center: np.ndarray, delta: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """
    Draw n manifold points inside B_G(center, delta) through exp_coordinates.

    Tangent vectors are uniform in the delta-ball; rows the exponential map
    sends out of the parametrization are redrawn.
    """
    d = manifold.intrinsic_dim
    rows = []
    have = 0
    for _ in range(100):
        want = 2 * (n - have) + 16
        direction = rng.normal(size=(want, d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = delta * rng.random(want) ** (1.0 / d)
        pts = manifold.exp_coordinates(center, direction * radius[:, None])
        pts = pts[np.all(np.isfinite(pts), axis=1)]
        rows.append(pts)
        have += pts.shape[0]
        if have >= n:
            break
    if have < n:
        raise ConfigurationError(f"could not draw {n} points inside the chart ball of radius {delta}")
    return np.concatenate(rows)[:n]


@dataclass
class Chart:
    """
    One chart of the atlas.

    Attributes:
        center: chart center xi (length D)
        delta: geodesic radius delta_xi
        backend: "analytic" or "fitted-net"
        alpha: sampled lower distortion constant
        beta: sampled upper distortion constant
        net: square-rectifier network for the fitted backend
        manifold: manifold the analytic map is computed on
    """

    center: np.ndarray
    delta: float
    backend: str = ANALYTIC
    alpha: float = float("nan")
    beta: float = float("nan")
    net: Optional[Any] = None
    manifold: Optional[Manifold] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float).reshape(-1)
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"Unknown chart backend: {self.backend}")
        if self.delta <= 0:
            raise ConfigurationError("chart radius must be positive")
        if self.backend == FITTED and self.net is None:
            raise ConfigurationError("fitted-net chart needs network coefficients")
        if self.backend == ANALYTIC and self.manifold is None:
            raise ConfigurationError("analytic chart needs its manifold")

    @property
    def dim(self) -> int:
        return self.net.out_dim if self.backend == FITTED else self.manifold.intrinsic_dim

    def analytic_raw(self, points: np.ndarray) -> np.ndarray:
        return self.manifold.log_coordinates(self.center, points) / self.delta

    def evaluate(self, points) -> Tuple[np.ndarray, np.ndarray]:
        """
        Batch chart evaluation.

        Args:
            points: (N, D) ambient points

        Returns:
            (values clipped to [-1,1]^d, boolean out-of-domain flags)
        """
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.backend == ANALYTIC:
            raw = self.analytic_raw(pts)
            outside = np.linalg.norm(raw, axis=1) > 1.0 + BALL_TOL
        else:
            raw = self.net(pts)
            outside = np.any(np.abs(raw) > 1.0 + BALL_TOL, axis=1)
        return np.clip(raw, -1.0, 1.0), outside

    def with_constants(self, alpha: float, beta: float) -> "Chart":
        return Chart(self.center, self.delta, self.backend, alpha, beta, self.net, self.manifold)

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "center": self.center.tolist(),
            "delta": self.delta,
            "backend": self.backend,
            "alpha": self.alpha,
            "beta": self.beta,
        }
        if self.backend == FITTED:
            data["coeffs"] = self.net.to_dict()
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any], manifold: Optional[Manifold]) -> "Chart":
        net = None
        if data.get("backend") == FITTED:
            from .fitting import ChartNet

            net = ChartNet.from_dict(data["coeffs"])
        return cls(
            center=data["center"],
            delta=float(data["delta"]),
            backend=data.get("backend", ANALYTIC),
            alpha=float(data.get("alpha", float("nan"))),
            beta=float(data.get("beta", float("nan"))),
            net=net,
            manifold=manifold,
        )


def chart_map(chart: Chart, x) -> np.ndarray:
    """
    Evaluate N_2 (the chart) at a single ambient point.

    Outside the chart ball the output is clamped to [-1,1]^d and a warning is
    logged; the gated estimator never consumes such values.
    """
    values, outside = chart.evaluate(np.asarray(x, dtype=float).reshape(1, -1))
    if outside[0]:
        logger.warning(f"chart at {chart.center.round(4).tolist()} evaluated out of domain; output clamped")
    return values[0]


def distortion_constants(
    chart: Chart, manifold: Optional[Manifold] = None, n_pairs: int = MIN_DISTORTION_PAIRS, seed: int = 0
) -> Tuple[float, float]:
    """
    Sampled alpha, beta with alpha d_G <= |Phi(x) - Phi(x')| <= beta d_G in the ball.

    Args:
        chart: chart to measure
        manifold: manifold of the ball (defaults to the chart's own)
        n_pairs: number of in-ball pairs (>= 1000)
        seed: sampling seed

    Returns:
        (alpha_hat, beta_hat)
    """
    manifold = manifold or chart.manifold
    if n_pairs < MIN_DISTORTION_PAIRS:
        raise ConfigurationError(f"n_pairs must be >= {MIN_DISTORTION_PAIRS}")
    rng = np.random.default_rng([seed, 0])
    a = sample_ball(manifold, chart.center, chart.delta, n_pairs, rng)
    b = sample_ball(manifold, chart.center, chart.delta, n_pairs, rng)
    dist = manifold._geodesic_raw(a, b)
    # near-coincident pairs only measure rounding
    keep = dist > 1e-6 * chart.delta
    if not np.any(keep):
        raise ConfigurationError("all sampled chart pairs are degenerate")
    phi_a, _ = chart.evaluate(a[keep])
    phi_b, _ = chart.evaluate(b[keep])
    ratio = np.linalg.norm(phi_a - phi_b, axis=1) / dist[keep]
    return float(ratio.min()), float(ratio.max())


def sampled_embedding_ratio(manifold: Manifold, n_pairs: int, seed: int) -> float:
    """Largest sampled d_G / chord over uniform pairs."""
    rng = np.random.default_rng([seed, 1])
    x = manifold._embed_raw(manifold.sample_intrinsic(rng, n_pairs))
    y = manifold._embed_raw(manifold.sample_intrinsic(rng, n_pairs))
    chord = np.linalg.norm(x - y, axis=1)
    keep = chord > 1e-12
    if not np.any(keep):
        raise ConfigurationError("all sampled pairs are coincident")
    return float(np.max(manifold._geodesic_raw(x[keep], y[keep]) / chord[keep]))


def estimate_embedding_constant(manifold: Manifold, n_pairs: int, seed: int, safety: float = 1.1) -> float:
    """
    Embedding constant C0 with d_G(x, x') <= C0 |x - x'|.

    The closed-form value is returned when the manifold knows it; the sampled
    ratio is still computed and must not exceed it.

    Raises:
        ConfigurationError: n_pairs < 1000, safety < 1, or a sampled ratio above
            the analytic constant
    """
    if n_pairs < 1000:
        raise ConfigurationError("n_pairs must be >= 1000")
    if safety < 1:
        raise ConfigurationError("safety factor must be >= 1")
    sampled = sampled_embedding_ratio(manifold, n_pairs, seed)
    known = manifold.analytic_c0
    if known is not None:
        if sampled > known * (1 + 1e-9):
            raise ConfigurationError(f"sampled ratio {sampled:.6f} exceeds the analytic C0 {known:.6f}")
        return float(known)
    return max(1.0, safety * sampled)


def grid_resolution(c0: float, ambient_dim: int, min_delta: float) -> int:
    """q* = ceil(2 C0 sqrt(D) / min delta)."""
    return int(math.ceil(2.0 * c0 * math.sqrt(ambient_dim) / min_delta))


def select_grid_resolution(atlas) -> int:
    """Grid resolution q* of an atlas from its C0 and smallest chart radius."""
    return grid_resolution(atlas.c0, atlas.ambient_dim, min(c.delta for c in atlas.charts))
