import os
import json
import platform
from importlib import metadata as importlib_metadata
from typing import Dict, Any, Optional
from datetime import datetime
import logging

import numpy as np

from ..core.accesos import RegistroAccesos
from ..core.contenedor import read_frc1, write_frc1
from ..core.errores import ErrorValidacion
from ..core.malla import FlowSeries, Grid

logger = logging.getLogger(__name__)

PAQUETES_VERSIONADOS = ['numpy', 'scipy', 'scikit-learn', 'pandas', 'joblib', 'tqdm']
ARCHIVO_MANIFIESTO = 'run_manifest.json'


def versiones_librerias() -> Dict[str, Optional[str]]:
    """Versiones instaladas de las dependencias principales"""
    versiones = {'python': platform.python_version()}
    for paquete in PAQUETES_VERSIONADOS:
        try:
            versiones[paquete] = importlib_metadata.version(paquete)
        except importlib_metadata.PackageNotFoundError:
            versiones[paquete] = None
    return versiones


class MLOpsManager:
    """
    Gestor de artefactos de una ejecución: registro de modelos con
    metadata.json, predicciones persistidas y manifiesto de la ejecución
    (configuración, semillas, versiones, registro de accesos y fallos)
    """

    def __init__(self, ruta_base: str, config: Optional[Dict[str, Any]] = None):
        """
        Inicializa el gestor

        Args:
            ruta_base: Directorio de salida de la ejecución
            config: Configuración registrada en el manifiesto
        """
        self.config = config or {}
        self.ruta_base = os.path.abspath(ruta_base)
        self.ruta_modelos = os.path.join(self.ruta_base, 'modelos')
        self.ruta_metricas = os.path.join(self.ruta_base, 'metricas')
        self.ruta_predicciones = os.path.join(self.ruta_base, 'predicciones')

        self.manifiesto: Dict[str, Any] = {
            'comando': None,
            'config': self.config,
            'semillas': {},
            'versiones': versiones_librerias(),
            'inicio': datetime.now().isoformat(),
            'fin': None,
            'accesos': [],
            'fallos': [],
            'artefactos': [],
        }
        # Las lecturas de particiones se anotan donde se consumen los datos
        self.accesos = RegistroAccesos()

    # -- manifiesto ---------------------------------------------------------

    def iniciar_ejecucion(self, comando: str, semillas: Dict[str, Any]) -> None:
        self.manifiesto['comando'] = comando
        self.manifiesto['semillas'] = dict(semillas)

    def registrar_fallo(self, celda: str, error: str) -> None:
        logger.warning(f"Fallo en la celda {celda}: {error}")
        self.manifiesto['fallos'].append({'celda': celda, 'error': error})

    def registrar_artefacto(self, ruta: str) -> None:
        self.manifiesto['artefactos'].append(os.path.relpath(os.path.abspath(ruta), self.ruta_base))

    def guardar_manifiesto(self) -> str:
        """Escribe el manifiesto en la raíz de la ejecución"""
        try:
            self.manifiesto['fin'] = datetime.now().isoformat()
            self.manifiesto['accesos'] = list(self.accesos.entradas)
            os.makedirs(self.ruta_base, exist_ok=True)
            ruta = os.path.join(self.ruta_base, ARCHIVO_MANIFIESTO)
            with open(ruta, 'w', encoding='utf-8') as f:
                json.dump(self.manifiesto, f, indent=4, ensure_ascii=False, default=str)
            return ruta
        except Exception as e:
            logger.error(f"Error guardando el manifiesto: {str(e)}")
            raise

    # -- modelos ------------------------------------------------------------

    def registrar_modelo(self, modelo, modelo_id: str) -> str:
        """
        Registra un modelo entrenado

        Args:
            modelo: Modelo (ModeloBase) entrenado
            modelo_id: Identificador; también nombre del directorio

        Returns:
            Ruta del archivo del modelo
        """
        try:
            if not modelo.esta_entrenado:
                raise ErrorValidacion("El modelo debe estar entrenado antes de registrarlo")

            ruta_modelo = os.path.join(self.ruta_modelos, modelo_id)
            os.makedirs(ruta_modelo, exist_ok=True)
            archivo = os.path.join(ruta_modelo, 'modelo.frc')
            modelo.guardar(archivo)

            with open(os.path.join(ruta_modelo, 'metadata.json'), 'w', encoding='utf-8') as f:
                json.dump(modelo.generar_metadata(), f, indent=4, ensure_ascii=False, default=str)

            self._registrar_metricas(modelo_id, modelo.metricas)
            self.registrar_artefacto(archivo)
            logger.info(f"Modelo registrado con ID: {modelo_id}")
            return archivo

        except Exception as e:
            logger.error(f"Error registrando modelo: {str(e)}")
            raise

    def _registrar_metricas(self, modelo_id: str, metricas: Dict[str, Any]) -> None:
        try:
            os.makedirs(self.ruta_metricas, exist_ok=True)
            ruta_metricas = os.path.join(self.ruta_metricas, f"metricas_{modelo_id}.json")

            with open(ruta_metricas, 'w', encoding='utf-8') as f:
                json.dump(metricas, f, indent=4, ensure_ascii=False, default=str)

        except Exception as e:
            logger.error(f"Error registrando métricas: {str(e)}")
            raise

    # -- predicciones -------------------------------------------------------

    def guardar_predicciones(self, celda: str, grid: Grid, predicciones: np.ndarray,
                             verdades: FlowSeries) -> str:
        """
        Persiste predicciones y verdades (FRC1) para recalcular métricas
        """
        try:
            ruta = os.path.join(self.ruta_predicciones, celda)
            write_frc1(FlowSeries.desde_matriz(grid, predicciones, verdades.time_indices),
                       os.path.join(ruta, 'prediccion'))
            write_frc1(verdades, os.path.join(ruta, 'verdad'))
            self.registrar_artefacto(ruta)
            return ruta
        except Exception as e:
            logger.error(f"Error guardando predicciones de {celda}: {str(e)}")
            raise

    def cargar_predicciones(self, celda: str):
        """Devuelve (predicciones, verdades) como series"""
        ruta = os.path.join(self.ruta_predicciones, celda)
        return read_frc1(os.path.join(ruta, 'prediccion')), read_frc1(os.path.join(ruta, 'verdad'))


def cargar_modelo_archivo(ruta: str, tipo: Optional[str] = None):
    """
    Carga un modelo desde su archivo; sin `tipo`, lo deduce del formato

    Returns:
        ModeloGpod o ScvaeModel
    """
    from ..core.contenedor import leer_cabecera_bloque
    from ..modelos.pod_gpod import FORMATO_BASE, ModeloGpod
    from ..modelos.scvae import FORMATO_MODELO, ScvaeModel

    if tipo is None:
        cabecera, _ = leer_cabecera_bloque(ruta)
        tipo = {FORMATO_BASE: 'gpod', FORMATO_MODELO: 'scvae'}.get(cabecera.get('fmt'))
    if tipo == 'gpod':
        modelo = ModeloGpod()
    elif tipo == 'scvae':
        modelo = ScvaeModel()
    else:
        raise ErrorValidacion(f"Tipo de modelo no soportado: {tipo}")
    modelo.cargar(ruta)
    return modelo
