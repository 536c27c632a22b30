"""
Netcore - exact activations and Heaviside localization networks.
"""

from .netcore import (
    GridSpec,
    LocalizationNet,
    active_cubes,
    center_coordinate,
    cube_indicator_oracle,
    grid_centers,
    grid_indices,
    heaviside,
    localization_eval,
    localization_eval_batch,
    UnassignedCubeError,
    composite_cell_eval,
    square_rectifier,
)

__all__ = [
    'heaviside', 'square_rectifier', 'GridSpec', 'grid_centers', 'grid_indices',
    'center_coordinate', 'LocalizationNet', 'localization_eval', 'localization_eval_batch',
    'cube_indicator_oracle', 'active_cubes', 'composite_cell_eval', 'UnassignedCubeError',
]
