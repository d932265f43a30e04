"""Métricas, experimentos y gestión de artefactos"""
from .metricas import MetricasManager, relative_error, divergence_error
from .mlops_manager import MLOpsManager, cargar_modelo_archivo
from .experimentos import ExperimentPlan, GestorExperimentos, run_experiment, verify

__all__ = [
    'MetricasManager', 'relative_error', 'divergence_error',
    'MLOpsManager', 'cargar_modelo_archivo',
    'ExperimentPlan', 'GestorExperimentos', 'run_experiment', 'verify',
]
