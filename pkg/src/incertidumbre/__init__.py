"""Cuantificación de incertidumbre de la predictiva"""
from .chi2 import chi2_quantile
from .posterior import (
    PosteriorSummary, summarize, resumir_muestras, interval, region_membership,
    standard_deviation, sample_fields, montage_csv, tabla_intervalos,
)

__all__ = [
    'chi2_quantile', 'PosteriorSummary', 'summarize', 'resumir_muestras', 'interval',
    'region_membership', 'standard_deviation', 'sample_fields', 'montage_csv', 'tabla_intervalos',
]
