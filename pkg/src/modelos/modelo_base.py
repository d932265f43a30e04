from abc import ABC, abstractmethod
from typing import Dict, Any, Optional
from datetime import datetime
import logging

import numpy as np

from ..core.accesos import RegistroAccesos
from ..core.errores import ErrorValidacion
from ..core.malla import FlowSeries
from ..core.muestreo import SensorLayout, SamplingOperator

logger = logging.getLogger(__name__)


class ModeloBase(ABC):
    """Clase base abstracta para los modelos de reconstrucción"""

    def __init__(self, nombre: str, tipo: str, config: Optional[Dict[str, Any]] = None):
        """
        Inicializa un modelo base

        Args:
            nombre: Nombre del modelo
            tipo: Tipo de modelo (gpod/scvae)
            config: Configuración del modelo
        """
        self.nombre = nombre
        self.tipo = tipo
        self.config = config or {}
        self.esta_entrenado = False
        self.metricas = {}
        self.layout: Optional[SensorLayout] = None
        self.fecha_creacion = datetime.now()
        self.fecha_ultimo_entrenamiento = None
        # Lecturas de particiones hechas por el modelo (entrenamiento, selección...)
        self.accesos = RegistroAccesos()

    @abstractmethod
    def entrenar(self, train: FlowSeries, validacion: FlowSeries, layout: SensorLayout) -> None:
        """
        Entrena el modelo

        Args:
            train: Serie de entrenamiento (sin escalar)
            validacion: Serie de validación (sin escalar)
            layout: Disposición de sensores
        """
        pass

    @abstractmethod
    def predecir(self, medidas: np.ndarray) -> np.ndarray:
        """
        Reconstruye estados completos a partir de medidas

        Args:
            medidas: Medidas (2M,) o (B, 2M) sin escalar

        Returns:
            Estados reconstruidos (B, 2N) sin escalar
        """
        pass

    @abstractmethod
    def evaluar(self, medidas: np.ndarray, verdad: FlowSeries) -> Dict[str, float]:
        """
        Evalúa el modelo frente a los estados reales

        Returns:
            Diccionario con error_relativo y error_divergencia
        """
        pass

    @abstractmethod
    def guardar(self, ruta: str) -> None:
        pass

    @abstractmethod
    def cargar(self, ruta: str) -> None:
        pass

    def operador_muestreo(self, grid) -> SamplingOperator:
        if self.layout is None:
            raise ErrorValidacion(f"El modelo {self.nombre} no tiene disposición de sensores")
        return SamplingOperator(self.layout, grid)

    def validar_medidas(self, medidas: np.ndarray) -> np.ndarray:
        """
        Valida las medidas de entrada

        Returns:
            Medidas como matriz (B, 2M)
        """
        if not self.esta_entrenado:
            raise ErrorValidacion(f"El modelo {self.nombre} no está entrenado")
        medidas = np.atleast_2d(np.asarray(medidas, dtype=np.float64))
        esperado = 2 * self.layout.M
        if medidas.shape[1] != esperado:
            raise ErrorValidacion(
                f"Las medidas deben tener longitud 2M={esperado} (recibido {medidas.shape[1]})"
            )
        if not np.all(np.isfinite(medidas)):
            raise ErrorValidacion("Las medidas contienen valores no finitos")
        return medidas

    def generar_metadata(self) -> Dict[str, Any]:
        """
        Genera metadata del modelo

        Returns:
            Diccionario con metadata
        """
        return {
            'nombre': self.nombre,
            'tipo': self.tipo,
            'config': self.config,
            'esta_entrenado': self.esta_entrenado,
            'metricas': self.metricas,
            'layout': self.layout.a_lista() if self.layout else None,
            'fecha_creacion': self.fecha_creacion.isoformat(),
            'fecha_ultimo_entrenamiento': self.fecha_ultimo_entrenamiento.isoformat() if self.fecha_ultimo_entrenamiento else None
        }
