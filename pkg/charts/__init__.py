"""
Charts - finite atlas, chart maps N_2 and the cube -> chart assignment.
"""

from .charts import (
    ANALYTIC,
    FITTED,
    Chart,
    chart_map,
    distortion_constants,
    estimate_embedding_constant,
    grid_resolution,
    sample_ball,
    sampled_embedding_ratio,
    select_grid_resolution,
)
from .fitting import ChartFitError, ChartNet, affine_units, fit_chart_net, kink_count, network_width
from .atlas import Atlas, AssignmentError, CoverError, assign_chart_to_cube, build_atlas, greedy_cover

__all__ = [
    'ANALYTIC', 'FITTED', 'Chart', 'chart_map', 'distortion_constants', 'estimate_embedding_constant',
    'sampled_embedding_ratio', 'grid_resolution', 'select_grid_resolution', 'sample_ball',
    'ChartNet', 'ChartFitError', 'fit_chart_net', 'network_width', 'affine_units', 'kink_count',
    'Atlas', 'build_atlas', 'assign_chart_to_cube', 'greedy_cover', 'CoverError', 'AssignmentError',
]
