"""
Oracle - direct cell membership, partition averages and Monte-Carlo checks.
"""

from .oracle import (
    McReport,
    cardinality_check,
    cell_membership,
    cell_membership_batch,
    indicator_crosscheck,
    lemma1_check,
    lemma1_exact,
    lemma2_check,
    partition_local_average,
    proposition1_check,
)

__all__ = [
    'McReport', 'cell_membership', 'cell_membership_batch', 'partition_local_average',
    'lemma1_check', 'lemma1_exact', 'lemma2_check', 'proposition1_check',
    'indicator_crosscheck', 'cardinality_check',
]
