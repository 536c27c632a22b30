"""
Closed-form regression functions and the (s, c0)-Lipschitz validator.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, NamedTuple, Optional

import numpy as np

from .manifolds import ConfigurationError, Manifold

TARGET_KINDS = ("constant", "coordinate", "sine", "holder-bump", "sign")


@dataclass(frozen=True)
class TargetFunction:
    """
    A regression function f_rho acting on the base coordinates of a manifold.

    Attributes:
        kind: one of TARGET_KINDS
        smoothness: declared exponent s in (0,1]
        lipschitz_const: declared constant c0
        sup_norm: bound on sup|f|
        params: family parameters (value, axis, amplitude, frequency, radius, center)
    """

    kind: str
    smoothness: float
    lipschitz_const: float
    sup_norm: float
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TARGET_KINDS:
            raise ConfigurationError(f"Unknown target kind: {self.kind}")
        if not 0 < self.smoothness <= 1:
            raise ConfigurationError(f"smoothness must lie in (0,1], got {self.smoothness}")
        if self.lipschitz_const < 0 or self.sup_norm < 0:
            raise ConfigurationError("lipschitz_const and sup_norm must be non-negative")

    def _on_base(self, base: np.ndarray) -> np.ndarray:
        p = self.params
        axis = int(p.get("axis", 0))
        if self.kind == "constant":
            return np.full(base.shape[0], float(p.get("value", 0.0)))
        if self.kind == "coordinate":
            return base[:, axis].copy()
        if self.kind == "sine":
            return float(p.get("amplitude", 1.0)) * np.sin(float(p.get("frequency", 2.0)) * base[:, axis])
        if self.kind == "sign":
            return np.sign(base[:, axis])
        center = np.zeros(base.shape[1])
        center[: len(p.get("center", [0.9]))] = p.get("center", [0.9])
        dist = np.linalg.norm(base - center, axis=1)
        bump = np.clip(1.0 - dist / float(p.get("radius", 1.0)), 0.0, None)
        return float(p.get("amplitude", 1.0)) * bump ** self.smoothness

    def evaluate(self, manifold: Manifold, points) -> np.ndarray:
        """Evaluate f at ambient points of the manifold."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self._on_base(manifold.to_base(pts))

    def lipschitz_on(self, manifold: Manifold) -> float:
        """
        The constant c0 against d_G on the given manifold.

        The declared constant holds for base geodesics; a manifold whose
        geodesics are the base ones shrunk by a factor r needs c0 / r^s.
        """
        return self.lipschitz_const / manifold.base_scale ** self.smoothness

    def describe(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "s": self.smoothness,
            "c0": self.lipschitz_const,
            "sup_norm": self.sup_norm,
            "params": dict(self.params),
        }


def make_target(
    kind: str,
    s: float = 1.0,
    c0: Optional[float] = None,
    **params: Any,
) -> TargetFunction:
    """
    Build a target with its declared constants filled in where they are known.

    For the Lipschitz families c0 refers to the base chord, which never
    exceeds the base geodesic, so the declared value holds against base
    geodesics. A manifold that rescales its base (ProductEmbedding with
    shrink < 1) needs the constant from TargetFunction.lipschitz_on.
    """
    amplitude = float(params.get("amplitude", 1.0))
    if kind == "constant":
        value = float(params.get("value", 0.0))
        return TargetFunction(kind, s, 0.0 if c0 is None else c0, abs(value), params)
    if kind == "coordinate":
        return TargetFunction(kind, 1.0, 1.0 if c0 is None else c0, 1.0, params)
    if kind == "sine":
        freq = float(params.get("frequency", 2.0))
        default_c0 = amplitude * freq
        return TargetFunction(kind, 1.0, default_c0 if c0 is None else c0, abs(amplitude), params)
    if kind == "holder-bump":
        radius = float(params.get("radius", 1.0))
        default_c0 = abs(amplitude) / radius ** s
        return TargetFunction(kind, s, default_c0 if c0 is None else c0, abs(amplitude), params)
    if kind == "sign":
        return TargetFunction(kind, s, 1.0 if c0 is None else c0, 1.0, params)
    raise ConfigurationError(f"Unknown target kind: {kind}")


class LipschitzReport(NamedTuple):
    max_ratio: float
    passed: bool
    n_pairs: int


def validate_lipschitz(
    target: TargetFunction, manifold: Manifold, n_pairs: int, seed: int
) -> LipschitzReport:
    """
    Check |f(x) - f(x')| <= c0 * d_G(x, x')^s on sampled pairs, with c0
    taken from target.lipschitz_on(manifold).

    Half of the pairs are independent uniform draws, the other half are
    close pairs (small intrinsic perturbations) that expose jumps.

    Returns:
        LipschitzReport with the largest observed ratio and the verdict
    """
    if n_pairs < 1:
        raise ConfigurationError("n_pairs must be >= 1")
    rng = np.random.default_rng([seed, 0])
    n_far = (n_pairs + 1) // 2
    n_near = n_pairs - n_far
    theta_a = manifold.sample_intrinsic(rng, n_pairs)
    theta_b = np.empty_like(theta_a)
    theta_b[:n_far] = manifold.sample_intrinsic(rng, n_far)
    if n_near:
        step = 1e-3 * manifold.diameter
        jitter = rng.normal(scale=step, size=(n_near, manifold.intrinsic_dim))
        theta_b[n_far:] = manifold.clip_intrinsic(theta_a[n_far:] + jitter)
    x = manifold._embed_raw(theta_a)
    y = manifold._embed_raw(theta_b)
    dist = manifold._geodesic_raw(x, y)
    keep = dist > 1e-12
    if not np.any(keep):
        return LipschitzReport(0.0, True, 0)
    diff = np.abs(target.evaluate(manifold, x[keep]) - target.evaluate(manifold, y[keep]))
    ratio = float(np.max(diff / dist[keep] ** target.smoothness))
    passed = ratio <= target.lipschitz_on(manifold) * (1 + 1e-9)
    return LipschitzReport(ratio, bool(passed), int(keep.sum()))
