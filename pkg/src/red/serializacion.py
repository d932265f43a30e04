"""Persistencia de parámetros en archivos cabecera JSON + bloque f64"""

from typing import Any, Dict, Tuple
import logging

import numpy as np

from ..core.contenedor import escribir_cabecera_bloque, leer_cabecera_bloque
from ..core.errores import ErrorValidacion
from .parametros import ParamStore

logger = logging.getLogger(__name__)


def guardar_parametros(ruta: str, formato: str, cabecera: Dict[str, Any], params: ParamStore) -> None:
    """
    Guarda los parámetros con una cabecera descriptiva

    La cabecera final incluye `fmt` y la tabla `params` (nombre, forma,
    desplazamiento) en el orden en que aparecen en el bloque.
    """
    try:
        tabla = []
        desplazamiento = 0
        for nombre in params.nombres():
            valor = params.valores[nombre]
            tabla.append({'name': nombre, 'shape': list(valor.shape), 'offset': desplazamiento})
            desplazamiento += valor.size
        completa = dict(cabecera)
        completa['fmt'] = formato
        completa['params'] = tabla
        escribir_cabecera_bloque(ruta, completa, params.vector())
        logger.info(f"Parámetros guardados en {ruta} ({desplazamiento} valores)")
    except Exception as e:
        logger.error(f"Error guardando parámetros: {str(e)}")
        raise


def cargar_parametros(ruta: str, formato: str) -> Tuple[Dict[str, Any], ParamStore]:
    """Lee un archivo guardado con `guardar_parametros` y comprueba su formato"""
    cabecera, bloque = leer_cabecera_bloque(ruta)
    if cabecera.get('fmt') != formato:
        raise ErrorValidacion(f"Formato {cabecera.get('fmt')!r} no soportado, se esperaba {formato!r}")

    params = ParamStore()
    for entrada in cabecera['params']:
        forma = tuple(entrada['shape'])
        n = int(np.prod(forma)) if forma else 1
        inicio = entrada['offset']
        if inicio + n > bloque.size:
            raise ErrorValidacion(f"Bloque truncado al leer {entrada['name']}")
        params.crear(entrada['name'], bloque[inicio:inicio + n].reshape(forma))
    return cabecera, params
