"""
Square-rectifier chart networks.

Every output coordinate is a one-hidden-layer sum of exactly (D+2)(D+1) terms
a * sigma_2(w . x + b). The hidden units are split into a fixed affine block
and a kink block:

  - one constant unit sigma_2(1) and pairs sigma_2(+-x_l + 2), which stay
    positive on [-1,1]^D and span every affine function, so affine charts
    are reproduced exactly
  - D^2 + D + 1 kinks sigma_2(w . x + b), chosen greedily from a pool of
    random unit directions whose knots sit where the affine fit is worst,
    then polished by nonlinear least squares when still short of the
    tolerance

Outer weights come from linear least squares; fresh pools are drawn until the
held-out in-ball sup error drops below the tolerance.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np
from scipy.optimize import least_squares

from netcore import square_rectifier

from .charts import FITTED, Chart, distortion_constants, sample_ball

logger = logging.getLogger("Charts")

FIT_TOLERANCE = 1e-3
MAX_RESAMPLES = 20
CANDIDATES_PER_KINK = 40
POLISH_EVALUATIONS = 50


class ChartFitError(RuntimeError):
    """Raised when no kink draw reaches the residual target."""

    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


def network_width(ambient_dim: int) -> int:
    return (ambient_dim + 2) * (ambient_dim + 1)


@dataclass(eq=False)
class ChartNet:
    """
    weights: (d, T, D), biases: (d, T), outer: (d, T) with T = (D+2)(D+1).
    """

    weights: np.ndarray
    biases: np.ndarray
    outer: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.biases = np.asarray(self.biases, dtype=float)
        self.outer = np.asarray(self.outer, dtype=float)
        d, width, dim = self.weights.shape
        if width != network_width(dim):
            raise ValueError(f"chart network needs {network_width(dim)} terms per coordinate, got {width}")
        if self.biases.shape != (d, width) or self.outer.shape != (d, width):
            raise ValueError("bias and outer weight shapes do not match the hidden layer")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def width(self) -> int:
        return self.weights.shape[1]

    def __call__(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        hidden = square_rectifier(np.einsum("nk,ltk->nlt", pts, self.weights) + self.biases[None])
        return np.einsum("nlt,lt->nl", hidden, self.outer)

    def to_dict(self) -> Dict[str, Any]:
        return {"W": self.weights.tolist(), "b": self.biases.tolist(), "a": self.outer.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ChartNet":
        return cls(np.array(data["W"]), np.array(data["b"]), np.array(data["a"]))


def affine_units(ambient_dim: int):
    """
    The fixed block as (weights, biases): sigma_2(1) and pairs sigma_2(+-x_l + 2).

    sigma_2(x_l + 2) - sigma_2(-x_l + 2) = 8 x_l on [-1,1]^D, so the block
    spans every affine function of x.
    """
    eye = np.eye(ambient_dim)
    weights = [np.zeros(ambient_dim)]
    biases = [1.0]
    for w in eye:
        weights += [w, -w]
        biases += [2.0, 2.0]
    return np.array(weights), np.array(biases)


def kink_count(ambient_dim: int) -> int:
    """Hidden units left for kinks once the affine block is placed."""
    return network_width(ambient_dim) - (2 * ambient_dim + 1)


def kink_candidates(train: np.ndarray, residual: np.ndarray, count: int, rng: np.random.Generator):
    """
    Random unit directions with knots at training points drawn in proportion to |residual|.

    Returns:
        (weights, biases) of count candidate units
    """
    dim = train.shape[1]
    weights = rng.normal(size=(count, dim))
    weights /= np.linalg.norm(weights, axis=1, keepdims=True)
    mass = np.abs(residual).sum(axis=1) + 1e-12
    knots = train[rng.choice(train.shape[0], size=count, p=mass / mass.sum())]
    return weights, -np.einsum("kd,kd->k", weights, knots)


def _least_squares(features: np.ndarray, targets: np.ndarray):
    outer, *_ = np.linalg.lstsq(features, targets, rcond=None)
    return outer, targets - features @ outer


def select_kinks(base: np.ndarray, candidates: np.ndarray, targets: np.ndarray, k: int) -> List[int]:
    """
    Greedy forward selection of k candidate columns against the least-squares residual.

    Each step takes the candidate whose normalized column correlates most
    with the current residual, summed over output coordinates.
    """
    norms = np.linalg.norm(candidates, axis=0)
    norms[norms == 0] = np.inf
    chosen: List[int] = []
    _, residual = _least_squares(base, targets)
    for _ in range(k):
        scores = np.sum((candidates.T @ residual) ** 2, axis=1) / norms ** 2
        scores[chosen] = -1.0
        chosen.append(int(np.argmax(scores)))
        _, residual = _least_squares(np.hstack([base, candidates[:, chosen]]), targets)
    return chosen


def polish_kinks(
    train: np.ndarray,
    targets: np.ndarray,
    fixed_w: np.ndarray,
    fixed_b: np.ndarray,
    kink_w: np.ndarray,
    kink_b: np.ndarray,
    max_nfev: int = POLISH_EVALUATIONS,
):
    """
    Refine kink directions and knots by nonlinear least squares.

    Outer weights are eliminated by an inner linear solve, so only the
    kink parameters are optimized.
    """
    k, dim = kink_w.shape
    fixed = square_rectifier(train @ fixed_w.T + fixed_b)

    def residuals(params):
        block = params.reshape(k, dim + 1)
        kinks = square_rectifier(train @ block[:, :dim].T + block[:, dim])
        return _least_squares(np.hstack([fixed, kinks]), targets)[1].ravel()

    start = np.hstack([kink_w, kink_b[:, None]]).ravel()
    result = least_squares(residuals, start, max_nfev=max_nfev)
    block = result.x.reshape(k, dim + 1)
    return block[:, :dim], block[:, dim]


def _chart_net(weights: np.ndarray, biases: np.ndarray, train: np.ndarray, targets: np.ndarray) -> ChartNet:
    outer, _ = _least_squares(square_rectifier(train @ weights.T + biases), targets)
    d = targets.shape[1]
    return ChartNet(
        np.broadcast_to(weights, (d,) + weights.shape).copy(),
        np.broadcast_to(biases, (d, biases.size)).copy(),
        outer.T.copy(),
    )


def fit_chart_net(
    chart: Chart,
    n_train: int = 2000,
    seed: int = 0,
    tol: float = FIT_TOLERANCE,
    max_resamples: int = MAX_RESAMPLES,
    n_holdout: int = 1000,
) -> Chart:
    """
    Fit a square-rectifier network to an analytic chart.

    Every draw selects kinks from a fresh candidate pool; a draw that
    misses tol gets its kinks polished before the next draw starts.

    Args:
        chart: analytic chart the network is fitted to
        n_train: in-ball training points
        seed: seed for sampling and kink draws
        tol: held-out in-ball sup error to reach
        max_resamples: number of candidate pools before giving up
        n_holdout: in-ball points for the error check

    Returns:
        A fitted-net chart with its own distortion constants

    Raises:
        ChartFitError: if no draw reaches tol; carries the best residual
    """
    manifold = chart.manifold
    dim = manifold.ambient_dim
    train = sample_ball(manifold, chart.center, chart.delta, n_train, np.random.default_rng([seed, 0]))
    holdout = sample_ball(manifold, chart.center, chart.delta, n_holdout, np.random.default_rng([seed, 1]))
    y_train = chart.analytic_raw(train)
    y_holdout = chart.analytic_raw(holdout)

    fixed_w, fixed_b = affine_units(dim)
    fixed = square_rectifier(train @ fixed_w.T + fixed_b)
    _, affine_residual = _least_squares(fixed, y_train)
    k = kink_count(dim)

    def held_out(net: ChartNet) -> float:
        return float(np.max(np.abs(net(holdout) - y_holdout)))

    best = float("inf")
    for attempt in range(max_resamples):
        rng = np.random.default_rng([seed, 2, attempt])
        cand_w, cand_b = kink_candidates(train, affine_residual, CANDIDATES_PER_KINK * k, rng)
        chosen = select_kinks(fixed, square_rectifier(train @ cand_w.T + cand_b), y_train, k)
        kink_w, kink_b = cand_w[chosen], cand_b[chosen]
        net = _chart_net(np.vstack([fixed_w, kink_w]), np.concatenate([fixed_b, kink_b]), train, y_train)
        residual = held_out(net)
        if residual >= tol:
            kink_w, kink_b = polish_kinks(train, y_train, fixed_w, fixed_b, kink_w, kink_b)
            polished = _chart_net(np.vstack([fixed_w, kink_w]), np.concatenate([fixed_b, kink_b]), train, y_train)
            polished_residual = held_out(polished)
            if polished_residual < residual:
                net, residual = polished, polished_residual
        best = min(best, residual)
        logger.debug(f"chart fit attempt {attempt}: held-out sup error {residual:.3e}")
        if residual < tol:
            fitted = Chart(chart.center, chart.delta, FITTED, net=net, manifold=manifold)
            alpha, beta = distortion_constants(fitted, seed=seed)
            return fitted.with_constants(alpha, beta)
    raise ChartFitError(
        f"chart network did not reach {tol:g} after {max_resamples} draws (best {best:.3e})", best
    )
