"""Modelos de reconstrucción: GPOD y SCVAE"""
from .modelo_base import ModeloBase
from .pod_gpod import (
    PodBasis, GpodConfig, GpodSolution, ModeloGpod, compute_pod, gpod_reconstruct,
    gpod_reconstruct_lote, select_gpod_hyperparams, project, projection_error,
    guardar_base, cargar_base,
)
from .arquitecturas import ScvaeArchitecture, preset, arquitectura_desde_dict
from .scvae import (
    LatentGaussian, TrainConfig, LossBreakdown, ScvaeModel, PredictiveDistribution,
    encode, reparameterize, decode, kl_closed_form, elbo, adaptive_weights, train, predict,
)

__all__ = [
    'ModeloBase',
    'PodBasis', 'GpodConfig', 'GpodSolution', 'ModeloGpod', 'compute_pod', 'gpod_reconstruct',
    'gpod_reconstruct_lote', 'select_gpod_hyperparams', 'project', 'projection_error',
    'guardar_base', 'cargar_base',
    'ScvaeArchitecture', 'preset', 'arquitectura_desde_dict',
    'LatentGaussian', 'TrainConfig', 'LossBreakdown', 'ScvaeModel', 'PredictiveDistribution',
    'encode', 'reparameterize', 'decode', 'kl_closed_form', 'elbo', 'adaptive_weights', 'train', 'predict',
]
