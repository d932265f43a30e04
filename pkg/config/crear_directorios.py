"""
Creación de la estructura de trabajo de flowrecon.

Alcances:
- Crea los directorios de datos, modelos, resultados, logs y temporales
- Mantiene directorios vacíos con .gitkeep
- Genera un README en datos/ con los formatos esperados

Limitaciones:
- Solo crea estructura local
- No gestiona permisos de directorios
"""

import json
import os
from pathlib import Path
from typing import Dict, List

RUTA_ESTRUCTURA = Path(__file__).with_name('estructura_proyecto.json')

README_DATOS = """# Datos

## Formatos
- Series FRC1: directorio con `meta.json` y `data.bin` (f64 little-endian,
  instantánea a instantánea, bloque u y luego bloque v, fila a fila)
- Sensores: JSON `{"locations": [[i, j], ...]}`
- Medidas: CSV con columnas `u_0, ..., u_{M-1}, v_0, ..., v_{M-1}` (y opcionalmente `time_index`)

## Generación
    flowrecon gen --recipe traveling_vortices --nx 64 --ny 32 --steps 2000 --out datos/sinteticos/vortices
"""


def cargar_estructura() -> Dict[str, Dict]:
    with open(RUTA_ESTRUCTURA, 'r', encoding='utf-8') as f:
        return json.load(f)


def directorios_base(estructura: Dict[str, Dict]) -> List[str]:
    """Directorios a crear, incluidos los subdirectorios declarados"""
    directorios = []
    for nombre, info in estructura.items():
        directorios.append(nombre)
        directorios.extend(f"{nombre}/{sub}" for sub in info.get('subdirs', []))
    return directorios


def crear_estructura_proyecto(base: str = '.') -> List[str]:
    """
    Crea la estructura de trabajo bajo `base`

    Returns:
        Directorios creados (relativos a `base`)
    """
    try:
        estructura = cargar_estructura()
        directorios = directorios_base(estructura)
        for dir in directorios:
            ruta = Path(base) / dir
            ruta.mkdir(parents=True, exist_ok=True)
            (ruta / '.gitkeep').touch(exist_ok=True)

        datos_readme = Path(base) / 'datos' / 'README.md'
        if not datos_readme.exists():
            datos_readme.write_text(README_DATOS, encoding='utf-8')

        print("\n✅ Estructura de directorios creada:")
        for dir in directorios:
            print(f"  └── {dir:<24} # {estructura.get(dir.split('/')[0], {}).get('desc', '')}")
        return directorios

    except Exception as e:
        print(f"\n❌ Error creando directorios: {str(e)}")
        raise


def limpiar_directorios_temp(base: str = '.') -> int:
    """Vacía temp/ (conserva .gitkeep); devuelve el número de archivos borrados"""
    borrados = 0
    try:
        temp_dir = Path(base) / 'temp'
        if temp_dir.exists():
            for archivo in temp_dir.glob('*'):
                if archivo.is_file() and archivo.name != '.gitkeep':
                    archivo.unlink()
                    borrados += 1
            print("✅ Directorio temporal limpiado")
        return borrados
    except Exception as e:
        print(f"❌ Error limpiando temporales: {str(e)}")
        raise


if __name__ == "__main__":
    crear_estructura_proyecto(os.getcwd())
