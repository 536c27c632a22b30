"""
Estimator - deep net regression estimator with literal, interior and feedback modes.
"""

from .estimator import (
    MODES,
    CellIndex,
    CellTable,
    DeepNetEstimator,
    EstimatorBuildError,
    LambdaSets,
    build_estimator,
    cell_indicators,
    choose_n,
    lambda_sets,
    predict_batch,
    predict_feedback,
    predict_interior,
    predict_literal,
    smoother_matrix,
)

__all__ = [
    'MODES', 'CellIndex', 'CellTable', 'DeepNetEstimator', 'EstimatorBuildError', 'LambdaSets',
    'build_estimator', 'cell_indicators', 'choose_n', 'lambda_sets', 'predict_batch', 'predict_feedback',
    'predict_interior', 'predict_literal', 'smoother_matrix',
]
