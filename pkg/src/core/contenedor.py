"""
Formatos en disco.

FRC1: directorio con `meta.json` y `data.bin` (count·2N flotantes f64
little-endian, instantánea a instantánea, u-bloque y luego v-bloque).

Cabecera+bloque (modelos `frcmodel-1`, bases `frcpod-1`): magia `FRCB`,
uint64 little-endian con la longitud de la cabecera, cabecera JSON UTF-8 y
un bloque de f64 little-endian.
"""

import json
import os
import struct
from typing import Any, Dict, Optional, Tuple
import logging

import numpy as np
import pandas as pd

from .errores import ErrorValidacion
from .malla import FlowSeries, Grid
from .muestreo import SensorLayout, measurement_columns

logger = logging.getLogger(__name__)

MAGIA = b'FRCB'
META_FRC1 = {
    'dtype': 'f64',
    'layout': 'u-block,v-block,row-major',
    'endianness': 'little',
}


def write_frc1(serie: FlowSeries, ruta: str) -> None:
    """
    Escribe una serie en formato FRC1

    Args:
        serie: Serie a guardar
        ruta: Directorio destino (se crea si no existe)
    """
    try:
        os.makedirs(ruta, exist_ok=True)
        meta = {
            'nx': serie.grid.nx, 'ny': serie.grid.ny,
            'dx': serie.grid.dx, 'dy': serie.grid.dy,
            'count': len(serie),
            **META_FRC1,
            'time_indices': serie.time_indices,
        }
        with open(os.path.join(ruta, 'meta.json'), 'w', encoding='utf-8') as f:
            json.dump(meta, f, indent=4)
        serie.matriz().astype('<f8').tofile(os.path.join(ruta, 'data.bin'))
        logger.debug(f"Serie FRC1 guardada en {ruta} ({len(serie)} instantáneas)")
    except Exception as e:
        logger.error(f"Error guardando FRC1: {str(e)}")
        raise


def read_frc1(ruta: str) -> FlowSeries:
    """Lee una serie FRC1"""
    ruta_meta = os.path.join(ruta, 'meta.json')
    if not os.path.exists(ruta_meta):
        raise ErrorValidacion(f"No se encontró meta.json en: {ruta}")

    with open(ruta_meta, 'r', encoding='utf-8') as f:
        meta = json.load(f)

    for clave, valor in META_FRC1.items():
        if meta.get(clave) != valor:
            raise ErrorValidacion(f"FRC1 no soportado: {clave}={meta.get(clave)!r}")

    grid = Grid(meta['nx'], meta['ny'], meta['dx'], meta['dy'])
    datos = np.fromfile(os.path.join(ruta, 'data.bin'), dtype='<f8')
    esperado = meta['count'] * grid.n_estado
    if datos.size != esperado:
        raise ErrorValidacion(f"data.bin tiene {datos.size} valores, se esperaban {esperado}")

    X = datos.astype(np.float64).reshape(meta['count'], grid.n_estado)
    return FlowSeries.desde_matriz(grid, X, meta.get('time_indices'))


def escribir_cabecera_bloque(ruta: str, cabecera: Dict[str, Any], bloque: np.ndarray) -> None:
    """Escribe un archivo cabecera JSON + bloque f64"""
    texto = json.dumps(cabecera, sort_keys=True).encode('utf-8')
    directorio = os.path.dirname(os.path.abspath(ruta))
    os.makedirs(directorio, exist_ok=True)
    with open(ruta, 'wb') as f:
        f.write(MAGIA)
        f.write(struct.pack('<Q', len(texto)))
        f.write(texto)
        f.write(np.ascontiguousarray(bloque, dtype='<f8').tobytes())


def leer_cabecera_bloque(ruta: str) -> Tuple[Dict[str, Any], np.ndarray]:
    """Lee un archivo cabecera JSON + bloque f64"""
    with open(ruta, 'rb') as f:
        if f.read(4) != MAGIA:
            raise ErrorValidacion(f"Archivo sin cabecera FRCB: {ruta}")
        (longitud,) = struct.unpack('<Q', f.read(8))
        cabecera = json.loads(f.read(longitud).decode('utf-8'))
        bloque = np.frombuffer(f.read(), dtype='<f8').astype(np.float64)
    return cabecera, bloque


def write_layout(layout: SensorLayout, ruta: str) -> None:
    with open(ruta, 'w', encoding='utf-8') as f:
        json.dump({'locations': layout.a_lista()}, f, indent=4)


def read_layout(ruta: str) -> SensorLayout:
    """Lee una disposición de sensores `{"locations": [[i, j], ...]}`"""
    with open(ruta, 'r', encoding='utf-8') as f:
        datos = json.load(f)
    if 'locations' not in datos:
        raise ErrorValidacion(f"Falta la clave 'locations' en {ruta}")
    return SensorLayout(tuple(tuple(loc) for loc in datos['locations']))


def write_measurements(medidas: np.ndarray, ruta: str,
                       time_indices: Optional[list] = None) -> None:
    """Escribe medidas (K, 2M) como CSV con columnas u_k, v_k"""
    medidas = np.atleast_2d(medidas)
    df = pd.DataFrame(medidas, columns=measurement_columns(medidas.shape[1] // 2))
    if time_indices is not None:
        df.insert(0, 'time_index', time_indices)
    df.to_csv(ruta, index=False, float_format='%.17g')


def read_measurements(ruta: str) -> np.ndarray:
    """Lee medidas de un CSV (ignora la columna `time_index` si existe)"""
    df = pd.read_csv(ruta)
    columnas = [c for c in df.columns if c != 'time_index']
    M = len(columnas) // 2
    if list(columnas) != list(measurement_columns(M)):
        raise ErrorValidacion(f"Columnas de medidas inválidas en {ruta}: {columnas}")
    return df[columnas].to_numpy(dtype=np.float64)
