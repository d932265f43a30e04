"""Datos de flujo: mallas, muestreo, divergencia, escalado, divisiones y formatos"""
from .errores import FlowReconError, ErrorValidacion, ErrorNumerico, AdvertenciaRangoDeficiente
from .malla import (
    Grid, FlowSnapshot, FlowSeries, flatten_state, unflatten_state,
    estado_a_tensor, tensor_a_estado,
)
from .muestreo import SensorLayout, SamplingOperator, apply_sampling, random_layout, nested_layouts
from .divergencia import DivergenceOperator, apply_divergence
from .escalado import (
    ScalingParams, compute_scaling, scale, unscale, scale_state, unscale_state,
    scale_series, unscale_series,
)
from .particion import SplitSpec, split, split_sizes
from .contenedor import (
    read_frc1, write_frc1, read_layout, write_layout, read_measurements, write_measurements,
)

__all__ = [
    'FlowReconError', 'ErrorValidacion', 'ErrorNumerico', 'AdvertenciaRangoDeficiente',
    'Grid', 'FlowSnapshot', 'FlowSeries', 'flatten_state', 'unflatten_state',
    'estado_a_tensor', 'tensor_a_estado',
    'SensorLayout', 'SamplingOperator', 'apply_sampling', 'random_layout', 'nested_layouts',
    'DivergenceOperator', 'apply_divergence',
    'ScalingParams', 'compute_scaling', 'scale', 'unscale', 'scale_state', 'unscale_state',
    'scale_series', 'unscale_series',
    'SplitSpec', 'split', 'split_sizes',
    'read_frc1', 'write_frc1', 'read_layout', 'write_layout', 'read_measurements', 'write_measurements',
]
