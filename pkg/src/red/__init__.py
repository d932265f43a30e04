"""Sustrato de redes: capas, diferenciación inversa, Adam y persistencia"""
from .capas import LayerSpec, conv2d_forward, conv2d_transpose_forward
from .parametros import ParamStore
from .red import Red, RedRamificada, Tape, forward, backward, check_gradients
from .optimizador import AdamState, adam_step
from .serializacion import guardar_parametros, cargar_parametros

__all__ = [
    'LayerSpec', 'conv2d_forward', 'conv2d_transpose_forward',
    'ParamStore', 'Red', 'RedRamificada', 'Tape', 'forward', 'backward', 'check_gradients',
    'AdamState', 'adam_step', 'guardar_parametros', 'cargar_parametros',
]
