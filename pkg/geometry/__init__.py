"""
Geometry - embedded manifolds, regression targets and bounded-noise samples.
"""

from .manifolds import (
    Circle,
    ConfigurationError,
    DomainError,
    FlatTorus,
    Manifold,
    ProductEmbedding,
    Segment,
    Sphere,
    SwissRoll,
    manifold_from_descriptor,
)
from .targets import LipschitzReport, TargetFunction, make_target, validate_lipschitz
from .sampling import (
    BoundaryAtom,
    ComparabilityReport,
    Noise,
    SampleSet,
    Uniform,
    check_comparability,
    draw_sample_set,
    sample_inputs,
)

__all__ = [
    'Manifold', 'Circle', 'Sphere', 'FlatTorus', 'SwissRoll', 'Segment', 'ProductEmbedding',
    'manifold_from_descriptor', 'DomainError', 'ConfigurationError',
    'TargetFunction', 'make_target', 'validate_lipschitz', 'LipschitzReport',
    'Uniform', 'BoundaryAtom', 'Noise', 'SampleSet', 'sample_inputs', 'draw_sample_set',
    'check_comparability', 'ComparabilityReport',
]
