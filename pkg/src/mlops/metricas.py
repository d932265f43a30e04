"""Métricas de reconstrucción: error relativo medio y error de divergencia"""

from typing import Dict, Optional, Sequence
import logging

import numpy as np
import pandas as pd

from ..core.divergencia import DivergenceOperator, apply_divergence
from ..core.errores import ErrorValidacion
from ..core.logger import Logger

logger = logging.getLogger(__name__)


def _como_matriz(estados) -> np.ndarray:
    if isinstance(estados, np.ndarray):
        return np.atleast_2d(estados).astype(np.float64, copy=False)
    return np.vstack([np.asarray(e, dtype=np.float64).ravel() for e in estados])


def relative_error(predictions, truths) -> float:
    """
    Error relativo medio (1/n) Σ ‖x̂ - x‖₂ / ‖x‖₂

    Args:
        predictions: Estados predichos (n, 2N) o lista de vectores
        truths: Estados reales con la misma forma

    Returns:
        Error relativo medio
    """
    P = _como_matriz(predictions)
    T = _como_matriz(truths)
    if P.shape != T.shape or P.shape[0] == 0:
        raise ErrorValidacion(f"Predicciones {P.shape} y verdades {T.shape} no son comparables")
    normas = np.linalg.norm(T, axis=1)
    if np.any(normas == 0):
        raise ErrorValidacion("Hay estados reales con norma cero")
    return float(np.mean(np.linalg.norm(P - T, axis=1) / normas))


def divergence_error(predictions, div: DivergenceOperator) -> float:
    """Norma L2 media de la divergencia discreta de los estados predichos"""
    P = _como_matriz(predictions)
    if P.shape[0] == 0:
        raise ErrorValidacion("No hay predicciones")
    return float(np.mean(np.linalg.norm(apply_divergence(div, P), axis=1)))


class MetricasManager:
    """Gestiona el cálculo y la agregación de métricas de reconstrucción"""

    def __init__(self):
        self.logger = Logger('metricas')

    def calcular_metricas_reconstruccion(self, predicciones: np.ndarray, verdades: np.ndarray,
                                         div: DivergenceOperator) -> Dict[str, float]:
        """
        Calcula las dos métricas sobre estados sin escalar
        """
        try:
            metricas = {
                'mean_relative_error': relative_error(predicciones, verdades),
                'divergence_error': divergence_error(predicciones, div),
            }
            self.logger.metricas(f"Reconstrucción de {len(verdades)} estados", metricas)
            return metricas
        except Exception as e:
            self.logger.error(f"Error calculando métricas de reconstrucción: {str(e)}")
            raise

    def errores_por_instantanea(self, predicciones: np.ndarray, verdades: np.ndarray,
                                div: DivergenceOperator,
                                time_indices: Optional[Sequence[int]] = None) -> pd.DataFrame:
        """Tabla con el error relativo y la norma de divergencia de cada instantánea"""
        try:
            P = _como_matriz(predicciones)
            T = _como_matriz(verdades)
            tabla = pd.DataFrame({
                'time_index': list(time_indices) if time_indices is not None else np.arange(len(T)),
                'relative_error': np.linalg.norm(P - T, axis=1) / np.linalg.norm(T, axis=1),
                'divergence_norm': np.linalg.norm(apply_divergence(div, P), axis=1),
            })
            return tabla
        except Exception as e:
            self.logger.error(f"Error calculando errores por instantánea: {str(e)}")
            raise

    def resumir(self, filas: pd.DataFrame, grupos: Sequence[str],
                columnas: Sequence[str] = ('mean_relative_error', 'divergence_error')) -> pd.DataFrame:
        """
        Estadísticos (media, desviación, mínimo, máximo, n) por grupo
        """
        try:
            if filas.empty:
                return pd.DataFrame()
            resumen = filas.groupby(list(grupos), sort=True)[list(columnas)].agg(['mean', 'std', 'min', 'max', 'count'])
            resumen.columns = [f"{c}_{e}" for c, e in resumen.columns]
            return resumen.reset_index()
        except Exception as e:
            self.logger.error(f"Error resumiendo métricas: {str(e)}")
            raise
