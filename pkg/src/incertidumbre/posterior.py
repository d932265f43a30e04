"""
Resúmenes Monte Carlo de la predictiva.

Se asume que la predictiva es aproximadamente normal. La covarianza
empírica Σ̂ (divisor N_MC - 1) se guarda como factores (U, S) de la SVD
fina de la matriz de muestras centrada, sin formar nunca la matriz 2N × 2N:
Σ̂ = U diag(S) Uᵀ.

La región de confianza usa k = min(N_MC, 2N) grados de libertad aunque el
rango de Σ̂ sea a lo sumo N_MC - 1.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple
import logging

import numpy as np
import pandas as pd
from scipy import linalg

from ..core.errores import ErrorValidacion
from ..core.malla import FlowSnapshot, Grid, unflatten_state
from ..core.muestreo import apply_sampling
from .chi2 import chi2_quantile

logger = logging.getLogger(__name__)

COLUMNAS_MONTAJE = ['panel_row', 'panel_col', 'j', 'i', 'u', 'v']
COLUMNAS_PANEL = 3


@dataclass(frozen=True, eq=False)
class PosteriorSummary:
    mean: np.ndarray
    U: np.ndarray
    S: np.ndarray
    n_samples: int
    dof: int

    def __post_init__(self):
        if not np.all(np.isfinite(self.mean)):
            raise ErrorValidacion("La media posterior contiene valores no finitos")
        if np.any(self.S < 0) or np.any(np.diff(self.S) > 0):
            raise ErrorValidacion("S debe ser no negativo y no creciente")

    @property
    def covariance_factors(self) -> Tuple[np.ndarray, np.ndarray]:
        return self.U, self.S


def _semillas(seed: int, cantidad: int) -> List[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(cantidad)]


def _ruido(latent_dim: int, seed: int, cantidad: int) -> np.ndarray:
    return np.vstack([g.standard_normal(latent_dim) for g in _semillas(seed, cantidad)])


def resumir_muestras(muestras: np.ndarray) -> PosteriorSummary:
    """
    Media y factores de covarianza de muestras (N_MC, 2N)
    """
    muestras = np.asarray(muestras, dtype=np.float64)
    n_mc, n_estado = muestras.shape
    if n_mc < 2:
        raise ErrorValidacion(f"Se necesitan al menos 2 muestras (recibidas {n_mc})")
    media = muestras.mean(axis=0)
    _, s, Vt = linalg.svd(muestras - media, full_matrices=False)
    return PosteriorSummary(media, Vt.T, s ** 2 / (n_mc - 1), n_mc, min(n_mc, n_estado))


def summarize(dist, N_MC: int, seed: int = 0) -> PosteriorSummary:
    """
    Resumen de la predictiva con N_MC extracciones

    Args:
        dist: Distribución predictiva (`draw_lote`, `latent_dim`)
        N_MC: Número de extracciones (>= 2)
        seed: Semilla raíz; cada extracción usa una semilla hija
    """
    if int(N_MC) < 2:
        raise ErrorValidacion(f"N_MC debe ser >= 2 (recibido {N_MC})")
    muestras = dist.draw_lote(_ruido(dist.latent_dim, seed, int(N_MC)))
    resumen = resumir_muestras(muestras)
    logger.debug(f"Resumen posterior: N_MC={N_MC}, k={resumen.dof}, traza Σ̂={resumen.S.sum():.4e}")
    return resumen


def standard_deviation(summary: PosteriorSummary) -> np.ndarray:
    """σ̂ = √diag(Σ̂), longitud 2N"""
    return np.sqrt(np.einsum('nj,j,nj->n', summary.U, summary.S, summary.U))


def _validar_p(p: float) -> None:
    if not 0 < p < 1:
        raise ErrorValidacion(f"La probabilidad debe estar en (0, 1) (recibido {p})")


def interval(summary: PosteriorSummary, n: int, p: float) -> Tuple[float, float]:
    """
    Intervalo de la componente n: x̂*_n ± √χ²_k(p) · ‖u_nᵀ S^{1/2}‖₂
    """
    _validar_p(p)
    if not 0 <= n < summary.mean.size:
        raise ErrorValidacion(f"Componente {n} fuera de rango")
    semiancho = np.sqrt(chi2_quantile(p, summary.dof)) * np.linalg.norm(summary.U[n] * np.sqrt(summary.S))
    centro = summary.mean[n]
    return float(centro - semiancho), float(centro + semiancho)


def region_membership(summary: PosteriorSummary, x: np.ndarray, p: float) -> bool:
    """
    (x - x̂*)ᵀ Σ̂⁺ (x - x̂*) <= χ²_k(p)

    La pseudoinversa ignora las direcciones con S nulo y las componentes de
    x - x̂* fuera del espacio generado por U.
    """
    _validar_p(p)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != summary.mean.shape:
        raise ErrorValidacion(f"El estado debe tener forma {summary.mean.shape}")
    tolerancia = summary.S.max(initial=0.0) * summary.mean.size * np.finfo(np.float64).eps
    activos = summary.S > tolerancia
    c = summary.U[:, activos].T @ (x - summary.mean)
    distancia = float(np.sum(c ** 2 / summary.S[activos]))
    q = chi2_quantile(p, summary.dof)
    return distancia <= q * (1 + 1e-9)


def tabla_intervalos(summary: PosteriorSummary, grid: Grid, p: float) -> pd.DataFrame:
    """Media, desviación e intervalo de cada componente del estado"""
    _validar_p(p)
    sigma = standard_deviation(summary)
    semiancho = np.sqrt(chi2_quantile(p, summary.dof)) * sigma
    n = grid.n_puntos
    k = np.arange(2 * n)
    return pd.DataFrame({
        'component': np.where(k < n, 'u', 'v'),
        'j': (k % n) // grid.nx,
        'i': (k % n) % grid.nx,
        'mean': summary.mean,
        'std': sigma,
        'low': summary.mean - semiancho,
        'high': summary.mean + semiancho,
    })


def sample_fields(dist, count: int, seed: int = 0) -> List[FlowSnapshot]:
    """
    Campos alternativos: decodifica `count` latentes normales estándar
    contra las medidas fijas y devuelve instantáneas desescaladas
    """
    if int(count) < 1:
        raise ErrorValidacion(f"count debe ser >= 1 (recibido {count})")
    muestras = dist.draw_lote(_ruido(dist.latent_dim, seed, int(count)))

    op = dist.model.operador_muestreo(dist.grid)
    norma = np.linalg.norm(dist.medidas)
    if norma > 0:
        reproduccion = np.mean(np.linalg.norm(apply_sampling(op, muestras) - dist.medidas, axis=1)) / norma
        logger.info(f"Reproducción de medidas en {count} muestras: ‖Cx - m‖/‖m‖ medio = {reproduccion:.4e}")

    return [unflatten_state(dist.grid, x, time_index=k) for k, x in enumerate(muestras)]


def montage_csv(samples: Sequence[FlowSnapshot], ruta: str) -> pd.DataFrame:
    """
    Escribe las muestras como montaje de 3 columnas en formato largo

    Columnas: panel_row, panel_col, j, i, u, v. La muestra k ocupa el panel
    (k // 3, k % 3); nueve muestras forman una cuadrícula 3×3.
    """
    if not samples:
        raise ErrorValidacion("No hay muestras para el montaje")
    partes = []
    for k, s in enumerate(samples):
        X, Y = np.meshgrid(np.arange(s.grid.nx), np.arange(s.grid.ny))
        partes.append(pd.DataFrame({
            'panel_row': k // COLUMNAS_PANEL,
            'panel_col': k % COLUMNAS_PANEL,
            'j': Y.ravel(),
            'i': X.ravel(),
            'u': s.u,
            'v': s.v,
        }))
    tabla = pd.concat(partes, ignore_index=True)[COLUMNAS_MONTAJE]
    tabla.to_csv(ruta, index=False, float_format='%.17g')
    return tabla
