"""
Disposición de sensores y operador de muestreo C.

C es la matriz 2M×2N de dos bloques que extrae u y v en los sensores:
las primeras M entradas de m = C x son u en cada sensor y las últimas M son v.
"""

from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple
import logging

import numpy as np

from .errores import ErrorValidacion
from .malla import Grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SensorLayout:
    """Lista ordenada de M coordenadas (i, j) distintas"""

    locations: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        locs = tuple((int(i), int(j)) for i, j in self.locations)
        if len(locs) < 1:
            raise ErrorValidacion("La disposición necesita al menos un sensor")
        if len(set(locs)) != len(locs):
            raise ErrorValidacion(f"Sensores duplicados en {list(locs)}")
        object.__setattr__(self, 'locations', locs)

    @property
    def M(self) -> int:
        return len(self.locations)

    def primeros(self, m: int) -> 'SensorLayout':
        """Subdisposición anidada con los m primeros sensores"""
        return SensorLayout(self.locations[:m])

    def a_lista(self) -> List[List[int]]:
        return [[i, j] for i, j in self.locations]


@dataclass(frozen=True)
class SamplingOperator:
    """Operador C asociado a una disposición sobre una malla"""

    layout: SensorLayout
    grid: Grid

    def __post_init__(self):
        fuera = [loc for loc in self.layout.locations if not self.grid.contiene(*loc)]
        if fuera:
            raise ErrorValidacion(
                f"Sensores fuera de la malla {self.grid.nx}x{self.grid.ny}: {fuera}"
            )

    @property
    def n_state(self) -> int:
        return self.grid.n_estado

    @property
    def n_medidas(self) -> int:
        return 2 * self.layout.M

    @property
    def indices(self) -> np.ndarray:
        """Posiciones de estado seleccionadas por cada fila de C"""
        p = np.array([self.grid.indice(i, j) for i, j in self.layout.locations], dtype=np.int64)
        return np.concatenate([p, p + self.grid.n_puntos])

    def matrix(self) -> np.ndarray:
        """C materializada (2M × 2N), solo para oráculos y sistemas pequeños"""
        C = np.zeros((self.n_medidas, self.n_state))
        C[np.arange(self.n_medidas), self.indices] = 1.0
        return C

    def adjoint(self, m: np.ndarray) -> np.ndarray:
        """Cᵀ m: coloca las medidas en sus posiciones del estado"""
        m = np.asarray(m, dtype=np.float64)
        salida = np.zeros(m.shape[:-1] + (self.n_state,))
        salida[..., self.indices] = m
        return salida


def apply_sampling(op: SamplingOperator, x: np.ndarray) -> np.ndarray:
    """
    Medidas m = C x

    Args:
        op: Operador de muestreo
        x: Estado (2N,) o estados apilados (B, 2N)

    Returns:
        Medidas (2M,) o (B, 2M)
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != op.n_state:
        raise ErrorValidacion(f"El estado debe tener longitud {op.n_state} (recibido {x.shape[-1]})")
    return x[..., op.indices]


def random_layout(grid: Grid, M: int, rng: np.random.Generator) -> SensorLayout:
    """Disposición de M sensores distintos elegidos uniformemente"""
    if not 1 <= M <= grid.n_puntos:
        raise ErrorValidacion(f"M={M} fuera de rango para N={grid.n_puntos}")
    p = rng.choice(grid.n_puntos, size=M, replace=False)
    return SensorLayout(tuple((int(k % grid.nx), int(k // grid.nx)) for k in p))


def nested_layouts(grid: Grid, tamanos: Iterable[int], rng: np.random.Generator) -> List[SensorLayout]:
    """
    Familia anidada de disposiciones (Q_mayor ⊃ ... ⊃ Q_menor)

    Args:
        grid: Malla
        tamanos: Números de sensores deseados
        rng: Generador aleatorio

    Returns:
        Disposiciones en el orden de `tamanos`, cada una prefijo de la mayor
    """
    tamanos = [int(m) for m in tamanos]
    mayor = random_layout(grid, max(tamanos), rng)
    return [mayor.primeros(m) for m in tamanos]


def measurement_columns(M: int) -> Sequence[str]:
    return [f"u_{k}" for k in range(M)] + [f"v_{k}" for k in range(M)]
