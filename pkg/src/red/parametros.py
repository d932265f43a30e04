"""Almacén de parámetros con acumuladores de gradiente"""

from typing import Dict, Iterator, List
import logging

import numpy as np

from ..core.errores import ErrorValidacion

logger = logging.getLogger(__name__)


class ParamStore:
    """
    Mapa nombre -> tensor de parámetros, con un gradiente de la misma forma
    por parámetro. `version` aumenta con cada actualización del optimizador;
    las cintas registradas con una versión anterior quedan obsoletas.
    """

    def __init__(self):
        self.valores: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}
        self.version = 0

    def crear(self, nombre: str, valor: np.ndarray) -> None:
        if nombre in self.valores:
            raise ErrorValidacion(f"Parámetro duplicado: {nombre}")
        valor = np.array(valor, dtype=np.float64)
        self.valores[nombre] = valor
        self.grads[nombre] = np.zeros_like(valor)

    def __getitem__(self, nombre: str) -> np.ndarray:
        return self.valores[nombre]

    def __contains__(self, nombre: str) -> bool:
        return nombre in self.valores

    def __iter__(self) -> Iterator[str]:
        return iter(self.valores)

    def nombres(self) -> List[str]:
        return list(self.valores)

    def acumular(self, nombre: str, g: np.ndarray) -> None:
        if g.shape != self.valores[nombre].shape:
            raise ErrorValidacion(
                f"Gradiente de {nombre} con forma {g.shape}, se esperaba {self.valores[nombre].shape}"
            )
        self.grads[nombre] += g

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def asignar(self, nombre: str, valor: np.ndarray) -> None:
        """Sustituye el valor de un parámetro (misma forma) e invalida las cintas"""
        valor = np.asarray(valor, dtype=np.float64)
        if valor.shape != self.valores[nombre].shape:
            raise ErrorValidacion(f"Forma incompatible para {nombre}: {valor.shape}")
        self.valores[nombre][...] = valor
        self.version += 1

    def clon_gradientes(self) -> 'ParamStore':
        """Vista que comparte los valores pero tiene gradientes propios (fragmentos)"""
        vista = ParamStore()
        vista.valores = self.valores
        vista.grads = {k: np.zeros_like(v) for k, v in self.valores.items()}
        vista.version = self.version
        return vista

    def copia(self) -> 'ParamStore':
        """Copia profunda de los valores (gradientes a cero)"""
        nuevo = ParamStore()
        for k, v in self.valores.items():
            nuevo.crear(k, v.copy())
        nuevo.version = self.version
        return nuevo

    def cargar_valores(self, otro: 'ParamStore') -> None:
        """Copia los valores de `otro` (mismos nombres y formas)"""
        for k in self.valores:
            self.valores[k][...] = otro.valores[k]
        self.version += 1

    def vector(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self.valores.values()]) if self.valores else np.zeros(0)

    def vector_gradientes(self) -> np.ndarray:
        return np.concatenate([g.ravel() for g in self.grads.values()]) if self.grads else np.zeros(0)
