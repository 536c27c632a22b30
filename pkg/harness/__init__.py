"""
Harness - configuration, rate sweeps, comparisons, verification and artifact storage.
"""

from .config import (
    AtlasSpec,
    DistributionSpec,
    ExperimentConfig,
    ManifoldSpec,
    NoiseSpec,
    TargetSpec,
    load_config,
)
from .harness import (
    DimensionComparison,
    ExperimentError,
    FeedbackComparison,
    RatePoint,
    RateResult,
    emit_results,
    fit_estimator,
    fit_slope,
    generate_dataset,
    load_dataset,
    predict_queries,
    read_queries,
    result_payload,
    run_dimension_comparison,
    run_feedback_comparison,
    run_rate_sweep,
    run_rate_sweeps,
    run_verification,
    theoretical_slope,
    trial_seed,
    write_predictions,
)
from .storage import ArtifactStore

__all__ = [
    'ExperimentConfig', 'ManifoldSpec', 'TargetSpec', 'NoiseSpec', 'DistributionSpec', 'AtlasSpec',
    'load_config', 'RatePoint', 'RateResult', 'FeedbackComparison', 'DimensionComparison',
    'ExperimentError', 'run_rate_sweep', 'run_rate_sweeps', 'run_feedback_comparison',
    'run_dimension_comparison', 'run_verification', 'emit_results', 'fit_slope', 'generate_dataset', 'load_dataset', 'fit_estimator',
    'theoretical_slope', 'trial_seed', 'predict_queries', 'read_queries', 'result_payload', 'write_predictions', 'ArtifactStore',
]
