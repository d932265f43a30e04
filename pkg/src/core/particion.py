"""
División de una serie en entrenamiento, validación y prueba.

Tamaños: prueba = ⌊K·f_test⌋; validación = redondeo de (K - prueba)·f_val;
entrenamiento = resto.
"""

from dataclasses import dataclass
from typing import Tuple
import logging
import math

import numpy as np

from .errores import ErrorValidacion
from .malla import FlowSeries

logger = logging.getLogger(__name__)

MODOS = ('sequential', 'random')


@dataclass(frozen=True)
class SplitSpec:
    mode: str = 'sequential'
    test_fraction: float = 0.15
    validation_fraction: float = 0.30
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODOS:
            raise ErrorValidacion(f"Modo de división desconocido: {self.mode}")
        for nombre in ('test_fraction', 'validation_fraction'):
            valor = getattr(self, nombre)
            if not 0.0 < valor < 1.0:
                raise ErrorValidacion(f"{nombre} debe estar en (0, 1): {valor}")
        if self.test_fraction + (1 - self.test_fraction) * self.validation_fraction >= 1.0:
            raise ErrorValidacion("Las fracciones no dejan datos de entrenamiento")


def split_sizes(K: int, spec: SplitSpec) -> Tuple[int, int, int]:
    """(entrenamiento, validación, prueba) para K instantáneas"""
    n_test = int(math.floor(K * spec.test_fraction + 1e-9))
    resto = K - n_test
    n_val = int(math.floor(resto * spec.validation_fraction + 0.5))
    return resto - n_val, n_val, n_test


def split(series: FlowSeries, spec: SplitSpec) -> Tuple[FlowSeries, FlowSeries, FlowSeries]:
    """
    Divide una serie

    Args:
        series: Serie completa
        spec: Especificación de la división

    Returns:
        (entrenamiento, validación, prueba)
    """
    K = len(series)
    n_train, n_val, n_test = split_sizes(K, spec)
    if min(n_train, n_val, n_test) < 1:
        raise ErrorValidacion(
            f"La división deja un subconjunto vacío: K={K} -> ({n_train}, {n_val}, {n_test})"
        )

    if spec.mode == 'sequential':
        orden = np.arange(K)
    else:
        orden = np.random.default_rng(spec.seed).permutation(K)

    # Cada subconjunto conserva el orden temporal
    pos_train = np.sort(orden[:n_train])
    pos_val = np.sort(orden[n_train:n_train + n_val])
    pos_test = np.sort(orden[n_train + n_val:])

    logger.info(f"División {spec.mode}: entrenamiento={n_train}, validación={n_val}, prueba={n_test}")
    return (
        series.subserie(pos_train.tolist()).etiquetada('train'),
        series.subserie(pos_val.tolist()).etiquetada('validation'),
        series.subserie(pos_test.tolist()).etiquetada('test'),
    )
