"""
Mallas rectangulares, instantáneas de velocidad y series temporales.

Convención de estado compartida por todo el paquete:
    x = (u(p_1), ..., u(p_N), v(p_1), ..., v(p_N))
con p recorrido en orden fila-mayor sobre (j, i): p = j * nx + i, donde
i es el índice horizontal y j el vertical.

Los tensores de las redes usan la forma (nx, ny, 2), es decir (i, j, canal).
"""

from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence, Tuple
import logging

import numpy as np

from .errores import ErrorValidacion

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Grid:
    """Malla rectangular uniforme de nx × ny puntos"""

    nx: int
    ny: int
    dx: float = 1.0
    dy: float = 1.0

    def __post_init__(self):
        if int(self.nx) < 3 or int(self.ny) < 3:
            raise ErrorValidacion(f"La malla necesita nx, ny >= 3 (recibido {self.nx}x{self.ny})")
        if not (self.dx > 0 and self.dy > 0):
            raise ErrorValidacion(f"Espaciados no positivos: dx={self.dx}, dy={self.dy}")
        object.__setattr__(self, 'nx', int(self.nx))
        object.__setattr__(self, 'ny', int(self.ny))
        object.__setattr__(self, 'dx', float(self.dx))
        object.__setattr__(self, 'dy', float(self.dy))

    @property
    def n_puntos(self) -> int:
        """N, número de puntos de la malla"""
        return self.nx * self.ny

    @property
    def n_estado(self) -> int:
        """2N, longitud del vector de estado"""
        return 2 * self.n_puntos

    def coordenadas(self) -> Tuple[np.ndarray, np.ndarray]:
        """
        Coordenadas físicas de los puntos

        Returns:
            (X, Y) aplanados en el orden de estado, cada uno de longitud N
        """
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        X, Y = np.meshgrid(x, y)  # forma (ny, nx): fila-mayor sobre (j, i)
        return X.ravel(), Y.ravel()

    def indice(self, i: int, j: int) -> int:
        return j * self.nx + i

    def contiene(self, i: int, j: int) -> bool:
        return 0 <= i < self.nx and 0 <= j < self.ny

    def refinada(self, factor: int = 2) -> 'Grid':
        """Malla sobre el mismo dominio con espaciado dividido por `factor`"""
        return Grid(
            nx=(self.nx - 1) * factor + 1,
            ny=(self.ny - 1) * factor + 1,
            dx=self.dx / factor,
            dy=self.dy / factor,
        )

    def a_dict(self) -> dict:
        return {'nx': self.nx, 'ny': self.ny, 'dx': self.dx, 'dy': self.dy}


@dataclass(frozen=True, eq=False)
class FlowSnapshot:
    """Un instante (u, v) sobre la malla"""

    grid: Grid
    u: np.ndarray
    v: np.ndarray
    time_index: int = 0

    def __post_init__(self):
        u = np.array(self.u, dtype=np.float64).ravel()
        v = np.array(self.v, dtype=np.float64).ravel()
        n = self.grid.n_puntos
        if u.size != n or v.size != n:
            raise ErrorValidacion(
                f"u y v deben tener longitud N={n} (recibido {u.size}, {v.size})"
            )
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(v))):
            raise ErrorValidacion("La instantánea contiene valores no finitos")
        u.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, 'u', u)
        object.__setattr__(self, 'v', v)
        object.__setattr__(self, 'time_index', int(self.time_index))


@dataclass(frozen=True, eq=False)
class FlowSeries:
    """Serie ordenada de K instantáneas sobre una misma malla"""

    grid: Grid
    snapshots: Tuple[FlowSnapshot, ...] = field(default_factory=tuple)
    particion: Optional[str] = None

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        if len(snaps) < 1:
            raise ErrorValidacion("Una serie necesita al menos una instantánea")
        for s in snaps:
            if s.grid != self.grid:
                raise ErrorValidacion("Todas las instantáneas deben compartir la malla")
        tiempos = [s.time_index for s in snaps]
        if any(b <= a for a, b in zip(tiempos, tiempos[1:])):
            raise ErrorValidacion("Los time_index deben ser estrictamente crecientes")
        object.__setattr__(self, 'snapshots', snaps)

    def __len__(self) -> int:
        return len(self.snapshots)

    def __iter__(self):
        return iter(self.snapshots)

    def __getitem__(self, k):
        return self.snapshots[k]

    @property
    def time_indices(self) -> List[int]:
        return [s.time_index for s in self.snapshots]

    def matriz(self) -> np.ndarray:
        """Estados apilados por filas, forma (K, 2N)"""
        return np.stack([flatten_state(s) for s in self.snapshots])

    def etiquetada(self, particion: str) -> 'FlowSeries':
        """Misma serie marcada como partición (train, validation, test...)"""
        return replace(self, particion=particion)

    def subserie(self, posiciones: Sequence[int]) -> 'FlowSeries':
        """Serie formada por las posiciones dadas (en el orden recibido)"""
        return FlowSeries(self.grid, tuple(self.snapshots[k] for k in posiciones))

    @classmethod
    def desde_matriz(cls, grid: Grid, X: np.ndarray,
                     time_indices: Optional[Sequence[int]] = None) -> 'FlowSeries':
        """
        Construye una serie a partir de estados apilados

        Args:
            grid: Malla común
            X: Matriz (K, 2N)
            time_indices: Índices temporales (por defecto 0..K-1)
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if time_indices is None:
            time_indices = range(X.shape[0])
        return cls(grid, tuple(
            unflatten_state(grid, fila, t) for fila, t in zip(X, time_indices)
        ))


def flatten_state(s: FlowSnapshot) -> np.ndarray:
    """Vector de estado (u-bloque, v-bloque) de longitud 2N"""
    return np.concatenate([s.u, s.v])


def unflatten_state(grid: Grid, x: np.ndarray, time_index: int = 0) -> FlowSnapshot:
    """Inversa exacta de `flatten_state`"""
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != grid.n_estado:
        raise ErrorValidacion(f"El estado debe tener longitud 2N={grid.n_estado} (recibido {x.size})")
    n = grid.n_puntos
    return FlowSnapshot(grid, x[:n].copy(), x[n:].copy(), time_index)


def estado_a_tensor(grid: Grid, X: np.ndarray) -> np.ndarray:
    """
    Convierte estados (B, 2N) en tensores de red (B, nx, ny, 2)
    """
    X = np.atleast_2d(X)
    campos = X.reshape(X.shape[0], 2, grid.ny, grid.nx)
    return np.ascontiguousarray(campos.transpose(0, 3, 2, 1))


def tensor_a_estado(grid: Grid, T: np.ndarray) -> np.ndarray:
    """Inversa de `estado_a_tensor`: (B, nx, ny, 2) -> (B, 2N)"""
    campos = np.asarray(T).transpose(0, 3, 2, 1)
    return np.ascontiguousarray(campos.reshape(T.shape[0], grid.n_estado))
