"""
Experiment configuration: one JSON document, validated by pydantic, with
LOCALNET_<FIELD> environment overrides for top-level fields.
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Union

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator, model_validator

from geometry import (
    BoundaryAtom,
    Circle,
    FlatTorus,
    Manifold,
    Noise,
    ProductEmbedding,
    Segment,
    Sphere,
    SwissRoll,
    TargetFunction,
    Uniform,
    make_target,
)

logger = logging.getLogger("Harness")

ENV_PREFIX = "LOCALNET_"

BASE_KINDS = ("circle", "sphere", "torus", "swiss-roll", "segment")


class ManifoldSpec(BaseModel):
    """
    kind names a base manifold, or "product-embedding" together with `base`.
    An ambient_dim above the base dimension wraps the base into a rotated
    product embedding.
    """

    kind: Literal["circle", "sphere", "torus", "swiss-roll", "segment", "product-embedding"] = "circle"
    base: Optional[Literal["circle", "sphere", "torus", "swiss-roll", "segment"]] = None
    scale: float = Field(0.9, gt=0, lt=1)
    ambient_dim: Optional[int] = Field(None, ge=1)
    rotation_seed: int = 0
    start: Optional[List[float]] = None
    direction: Optional[List[float]] = None
    length: Optional[float] = None

    @model_validator(mode="after")
    def _check_base(self):
        if self.kind == "product-embedding" and self.base is None:
            raise ValueError("product-embedding needs a base manifold kind")
        return self

    def _base(self, kind: str) -> Manifold:
        if kind == "circle":
            return Circle(self.scale)
        if kind == "sphere":
            return Sphere(self.scale)
        if kind == "torus":
            return FlatTorus(self.scale)
        if kind == "swiss-roll":
            return SwissRoll(self.scale)
        return Segment(self.start or [-0.5, 0.0], self.direction or [1.0, 0.0], self.length or 1.0)

    def build(self) -> Manifold:
        base = self._base(self.base if self.kind == "product-embedding" else self.kind)
        dim = self.ambient_dim or base.ambient_dim
        if self.kind == "product-embedding" or dim != base.ambient_dim:
            return ProductEmbedding(base, dim, self.rotation_seed, self.scale)
        return base


class TargetSpec(BaseModel):
    kind: Literal["constant", "coordinate", "sine", "holder-bump", "sign"] = "sine"
    s: float = Field(1.0, gt=0, le=1)
    c0: Optional[float] = Field(None, ge=0)
    params: Dict[str, Any] = Field(default_factory=dict)

    def build(self) -> TargetFunction:
        return make_target(self.kind, self.s, self.c0, **self.params)


class NoiseSpec(BaseModel):
    kind: Literal["none", "uniform", "truncated-gaussian"] = "uniform"
    amplitude: float = Field(0.2, ge=0)
    sigma: float = Field(0.1, gt=0)

    def build(self) -> Noise:
        return Noise(self.kind, self.amplitude, self.sigma)


class DistributionSpec(BaseModel):
    kind: Literal["uniform", "boundary-atom"] = "uniform"
    p_atom: float = Field(0.0, ge=0, le=1)

    def build(self, q_star: int) -> Union[Uniform, BoundaryAtom]:
        if self.kind == "uniform":
            return Uniform()
        return BoundaryAtom(q_star, self.p_atom)


class AtlasSpec(BaseModel):
    delta: Optional[float] = Field(None, gt=0)
    chart_backend: Literal["analytic", "fitted-net"] = "analytic"
    safety: float = Field(1.1, ge=1)


class ExperimentConfig(BaseModel):
    manifold: ManifoldSpec = Field(default_factory=ManifoldSpec)
    target: TargetSpec = Field(default_factory=TargetSpec)
    noise: NoiseSpec = Field(default_factory=NoiseSpec)
    distribution: DistributionSpec = Field(default_factory=DistributionSpec)
    atlas: AtlasSpec = Field(default_factory=AtlasSpec)
    m_values: List[int] = Field(default_factory=lambda: [2 ** k for k in range(8, 15)])
    trials: int = Field(20, ge=1)
    modes: List[Literal["literal", "interior", "feedback"]] = Field(default_factory=lambda: ["feedback"])
    seed: int = Field(0, ge=0)
    output: Optional[str] = None
    test_points: int = Field(2048, ge=1)
    gated: bool = True
    bound: Optional[float] = Field(None, gt=0)
    compare_ambient_dim: int = Field(10, ge=1)
    n_scale: float = Field(0.5, gt=0)

    @field_validator("m_values")
    @classmethod
    def _increasing(cls, values: List[int]) -> List[int]:
        if not values:
            raise ValueError("m_values must not be empty")
        if values[0] < 1:
            raise ValueError("m_values must be >= 1")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("m_values must be strictly increasing")
        return values

    @field_validator("modes")
    @classmethod
    def _modes(cls, values: List[str]) -> List[str]:
        if not values:
            raise ValueError("at least one estimator mode is required")
        return values

    def fingerprint(self) -> str:
        """Short hash of the canonical JSON form of the configuration."""
        canonical = json.dumps(self.model_dump(mode="json"), sort_keys=True)
        return hashlib.blake2b(canonical.encode("utf-8"), digest_size=8).hexdigest()


def _decode(raw: str) -> Any:
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def load_config(path: Optional[Union[str, Path]] = None, **overrides: Any) -> ExperimentConfig:
    """
    Read a configuration document and apply overrides.

    Precedence: keyword overrides, then LOCALNET_<FIELD> environment variables
    (a .env file is honoured), then the document.

    Args:
        path: JSON configuration file; defaults are used when omitted
        overrides: top-level field values

    Returns:
        validated ExperimentConfig
    """
    load_dotenv()
    data: Dict[str, Any] = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    for name in ExperimentConfig.model_fields:
        raw = os.getenv(f"{ENV_PREFIX}{name.upper()}")
        if raw is not None:
            logger.debug(f"config field {name} overridden from the environment")
            data[name] = _decode(raw)
    data.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.model_validate(data)
