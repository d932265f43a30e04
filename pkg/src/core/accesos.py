"""
Registro de lecturas de particiones.

Cada lectura de una serie pasa por `RegistroAccesos.leer`, que anota la
partición de la serie leída (no la que se esperaba leer) y el propósito.
El manifiesto de la ejecución reúne estas entradas.
"""

from typing import Any, Dict, Iterable, List, Optional
import logging

import numpy as np

from .malla import FlowSeries

logger = logging.getLogger(__name__)

SIN_PARTICION = 'sin_particion'
PROPOSITOS = ('entrenamiento', 'seleccion', 'evaluacion', 'error_absoluto')


class RegistroAccesos:
    """Lista ordenada de lecturas (conjunto, propósito, celda)"""

    def __init__(self, celda: Optional[str] = None):
        self.celda = celda
        self.entradas: List[Dict[str, Any]] = []

    def leer(self, serie: FlowSeries, proposito: str) -> np.ndarray:
        """
        Devuelve la matriz (K, 2N) de la serie y anota la lectura

        Args:
            serie: Serie leída; su etiqueta `particion` identifica el conjunto
            proposito: Uno de PROPOSITOS
        """
        self.registrar(serie.particion or SIN_PARTICION, proposito)
        return serie.matriz()

    def registrar(self, conjunto: str, proposito: str) -> None:
        if proposito not in PROPOSITOS:
            raise ValueError(f"Propósito de acceso desconocido: {proposito}")
        logger.debug(f"Lectura de {conjunto} para {proposito} (celda {self.celda})")
        self.entradas.append({'conjunto': conjunto, 'proposito': proposito, 'celda': self.celda})

    def extender(self, entradas: Iterable[Dict[str, Any]]) -> None:
        self.entradas.extend(dict(e) for e in entradas)

    def conjuntos(self, proposito: str) -> List[str]:
        """Conjuntos leídos con un propósito, en orden de lectura"""
        return [e['conjunto'] for e in self.entradas if e['proposito'] == proposito]
