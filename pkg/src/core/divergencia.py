"""
Operador discreto de divergencia L_div: R^{2N} -> R^N.

Diferencias centradas de segundo orden en el interior y unilaterales de
segundo orden en la frontera (el esquema de `numpy.gradient` con
`edge_order=2`). Es exacto en campos afines y cuadráticos.
"""

from dataclasses import dataclass, field
from functools import cached_property
import logging

import numpy as np
from scipy import sparse

from .errores import ErrorValidacion
from .malla import Grid

logger = logging.getLogger(__name__)

ESTENCIL = {
    'interior': (-0.5, 0.0, 0.5),
    'frontera_inicial': (-1.5, 2.0, -0.5),
    'frontera_final': (0.5, -2.0, 1.5),
    'orden': 2,
}


def _derivada_1d(n: int, h: float) -> sparse.csr_matrix:
    """Matriz n×n de la primera derivada con el estencil de segundo orden"""
    filas, cols, vals = [], [], []
    for k, c in zip((0, 1, 2), ESTENCIL['frontera_inicial']):
        filas.append(0); cols.append(k); vals.append(c)
    for r in range(1, n - 1):
        for k, c in zip((r - 1, r, r + 1), ESTENCIL['interior']):
            if c != 0.0:
                filas.append(r); cols.append(k); vals.append(c)
    for k, c in zip((n - 3, n - 2, n - 1), ESTENCIL['frontera_final']):
        filas.append(n - 1); cols.append(k); vals.append(c)
    return sparse.csr_matrix((np.array(vals) / h, (filas, cols)), shape=(n, n))


@dataclass(frozen=True)
class DivergenceOperator:
    """
    L_div sobre una malla. `factores` escala los bloques u y v, lo que permite
    evaluar la divergencia física a partir de estados escalados.
    """

    grid: Grid
    factores: tuple = (1.0, 1.0)
    stencil: dict = field(default_factory=lambda: dict(ESTENCIL), compare=False)

    @cached_property
    def _matriz(self) -> sparse.csr_matrix:
        g = self.grid
        Dx = sparse.kron(sparse.identity(g.ny), _derivada_1d(g.nx, g.dx))
        Dy = sparse.kron(_derivada_1d(g.ny, g.dy), sparse.identity(g.nx))
        fu, fv = self.factores
        return sparse.hstack([fu * Dx, fv * Dy]).tocsr()

    def matrix(self) -> sparse.csr_matrix:
        """L_div como matriz dispersa N × 2N"""
        return self._matriz

    def scaled(self, params) -> 'DivergenceOperator':
        """
        Operador que actúa sobre estados escalados y devuelve la divergencia
        del campo físico: L(d ⊙ x̃ + c) = L(d ⊙ x̃), pues L anula constantes.
        """
        return DivergenceOperator(
            self.grid,
            (self.factores[0] * params.u_halfwidth, self.factores[1] * params.v_halfwidth),
        )

    def adjunto(self, d: np.ndarray) -> np.ndarray:
        """L_divᵀ d para d de forma (N,) o (B, N)"""
        d = np.asarray(d, dtype=np.float64)
        return np.asarray(self._matriz.T @ d.T).T


def apply_divergence(op: DivergenceOperator, x: np.ndarray) -> np.ndarray:
    """
    Divergencia discreta L_div x

    Args:
        op: Operador de divergencia
        x: Estado (2N,) o estados apilados (B, 2N)

    Returns:
        Divergencia (N,) o (B, N)
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != op.grid.n_estado:
        raise ErrorValidacion(
            f"El estado debe tener longitud {op.grid.n_estado} (recibido {x.shape[-1]})"
        )
    return np.asarray(op.matrix() @ x.T).T
