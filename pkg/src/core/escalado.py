"""
Escalado min-max por canal sobre los datos de entrenamiento.

    u_c = (u_max + u_min) / 2,   d_u = (u_max - u_min) / 2,   ũ = (u - u_c) / d_u

y análogamente para v. Los extremos se toman sobre todos los puntos y todos
los instantes de entrenamiento. Un canal constante recibe d = 1.
"""

from dataclasses import dataclass
import logging

import numpy as np
from sklearn.preprocessing import MinMaxScaler

from .errores import ErrorValidacion
from .malla import FlowSeries, FlowSnapshot, Grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScalingParams:
    """Centros y semianchos por canal"""

    u_center: float
    v_center: float
    u_halfwidth: float
    v_halfwidth: float

    def __post_init__(self):
        if not (self.u_halfwidth > 0 and self.v_halfwidth > 0):
            raise ErrorValidacion("Los semianchos de escalado deben ser positivos")

    def vectores(self, grid: Grid):
        """(centro, semiancho) expandidos al vector de estado"""
        n = grid.n_puntos
        centro = np.concatenate([np.full(n, self.u_center), np.full(n, self.v_center)])
        semiancho = np.concatenate([np.full(n, self.u_halfwidth), np.full(n, self.v_halfwidth)])
        return centro, semiancho

    def a_dict(self) -> dict:
        return {
            'u_center': self.u_center, 'v_center': self.v_center,
            'u_halfwidth': self.u_halfwidth, 'v_halfwidth': self.v_halfwidth,
        }


def compute_scaling(train: FlowSeries) -> ScalingParams:
    """
    Calcula los parámetros de escalado a partir de la serie de entrenamiento

    Args:
        train: Serie de entrenamiento (no vacía)

    Returns:
        Parámetros de escalado
    """
    try:
        escalador = MinMaxScaler(feature_range=(-1, 1))
        for s in train:
            escalador.partial_fit(np.column_stack([s.u, s.v]))

        maximos, minimos = escalador.data_max_, escalador.data_min_
        centros = (maximos + minimos) / 2.0
        semianchos = (maximos - minimos) / 2.0

        # Canal degenerado (max = min)
        degenerados = semianchos <= 0
        if np.any(degenerados):
            logger.warning(f"Canal constante en el escalado: {np.array(['u', 'v'])[degenerados].tolist()}")
        semianchos = np.where(degenerados, 1.0, semianchos)

        return ScalingParams(
            u_center=float(centros[0]), v_center=float(centros[1]),
            u_halfwidth=float(semianchos[0]), v_halfwidth=float(semianchos[1]),
        )
    except Exception as e:
        logger.error(f"Error calculando escalado: {str(e)}")
        raise


def scale_state(params: ScalingParams, grid: Grid, X: np.ndarray) -> np.ndarray:
    """Escala estados (2N,) o (B, 2N)"""
    centro, semiancho = params.vectores(grid)
    return (np.asarray(X, dtype=np.float64) - centro) / semiancho


def unscale_state(params: ScalingParams, grid: Grid, X: np.ndarray) -> np.ndarray:
    """Inversa de `scale_state`"""
    centro, semiancho = params.vectores(grid)
    return np.asarray(X, dtype=np.float64) * semiancho + centro


def scale(params: ScalingParams, s: FlowSnapshot) -> FlowSnapshot:
    return FlowSnapshot(
        s.grid,
        (s.u - params.u_center) / params.u_halfwidth,
        (s.v - params.v_center) / params.v_halfwidth,
        s.time_index,
    )


def unscale(params: ScalingParams, s: FlowSnapshot) -> FlowSnapshot:
    return FlowSnapshot(
        s.grid,
        s.u * params.u_halfwidth + params.u_center,
        s.v * params.v_halfwidth + params.v_center,
        s.time_index,
    )


def scale_series(params: ScalingParams, serie: FlowSeries) -> FlowSeries:
    return FlowSeries(serie.grid, tuple(scale(params, s) for s in serie), serie.particion)


def unscale_series(params: ScalingParams, serie: FlowSeries) -> FlowSeries:
    return FlowSeries(serie.grid, tuple(unscale(params, s) for s in serie), serie.particion)
