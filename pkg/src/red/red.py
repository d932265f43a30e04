"""
Redes secuenciales con cinta de evaluación.

`Red.forward` devuelve la salida y una cinta con lo necesario para la
retropropagación; `Red.backward` consume la cinta, acumula los gradientes
de los parámetros en el `ParamStore` y devuelve el gradiente de la entrada.
Una cinta solo es válida para la versión de los parámetros con la que se
registró y puede consumirse una única vez.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np

from ..core.errores import ErrorValidacion
from .capas import Capa, LayerSpec, crear_capa
from .parametros import ParamStore

logger = logging.getLogger(__name__)


@dataclass
class Tape:
    """Registro de una evaluación hacia delante"""

    red: 'Red'
    params: ParamStore
    version: int
    caches: List[Any]
    consumida: bool = False


class Red:
    """
    Red secuencial definida por una lista de `LayerSpec`

    Args:
        specs: Capas en orden
        forma_entrada: Forma de la entrada sin eje de lote
        prefijo: Prefijo de los nombres de parámetros
        formas_aux: Entradas auxiliares disponibles para capas `concat`
    """

    def __init__(self, specs: Sequence[LayerSpec], forma_entrada: Tuple[int, ...],
                 prefijo: str = 'red',
                 formas_aux: Optional[Dict[str, Tuple[int, ...]]] = None):
        self.specs = [s if isinstance(s, LayerSpec) else LayerSpec.desde_dict(s) for s in specs]
        self.prefijo = prefijo
        self.forma_entrada = tuple(int(d) for d in forma_entrada)
        self.formas_aux = {k: tuple(v) for k, v in (formas_aux or {}).items()}

        self.capas: List[Capa] = []
        forma = self.forma_entrada
        for i, spec in enumerate(self.specs):
            capa = crear_capa(spec, f"{prefijo}.{i}.{spec.kind}")
            forma = capa.construir(forma, self.formas_aux)
            self.capas.append(capa)
        self.forma_salida = forma

    def inicializar(self, params: ParamStore, rng: np.random.Generator) -> None:
        """Crea los parámetros de todas las capas (Glorot uniforme, sesgos a cero)"""
        for capa in self.capas:
            capa.inicializar(params, rng)

    def resumen(self) -> List[Dict[str, Any]]:
        return [
            {'nombre': c.nombre, 'entrada': list(c.forma_entrada), 'salida': list(c.forma_salida)}
            for c in self.capas
        ]

    def forward(self, params: ParamStore, x: np.ndarray,
                aux: Optional[Dict[str, np.ndarray]] = None) -> Tuple[np.ndarray, Tape]:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[1:] != self.forma_entrada:
            raise ErrorValidacion(
                f"Red {self.prefijo}: entrada con forma {x.shape[1:]}, se esperaba {self.forma_entrada}"
            )
        aux = aux or {}
        caches = []
        for capa in self.capas:
            x, cache = capa.forward(params, x, aux)
            caches.append(cache)
        return x, Tape(self, params, params.version, caches)

    def backward(self, tape: Tape, dy: np.ndarray) -> Tuple[np.ndarray, Dict[str, np.ndarray]]:
        if tape.red is not self:
            raise ErrorValidacion(f"La cinta no pertenece a la red {self.prefijo}")
        if tape.consumida:
            raise ErrorValidacion(f"Cinta de {self.prefijo} ya consumida")
        if tape.version != tape.params.version:
            raise ErrorValidacion(
                f"Cinta obsoleta en {self.prefijo}: versión {tape.version}, parámetros en versión {tape.params.version}"
            )
        dy = np.asarray(dy, dtype=np.float64)
        daux: Dict[str, np.ndarray] = {}
        for capa, cache in zip(reversed(self.capas), reversed(tape.caches)):
            dy, extra = capa.backward(tape.params, cache, dy)
            for nombre, g in extra.items():
                daux[nombre] = daux[nombre] + g if nombre in daux else g
        tape.consumida = True
        return dy, daux


def forward(red: Red, params: ParamStore, entrada: np.ndarray,
            aux: Optional[Dict[str, np.ndarray]] = None) -> Tuple[np.ndarray, Tape]:
    return red.forward(params, entrada, aux)


def backward(tape: Tape, grad_salida: np.ndarray) -> np.ndarray:
    """Gradiente respecto a la entrada; los de parámetros se acumulan en la cinta"""
    dx, _ = tape.red.backward(tape, grad_salida)
    return dx


@dataclass
class TapeRamificada:
    tronco: Tape
    ramas: Dict[str, Tape] = field(default_factory=dict)


class RedRamificada:
    """
    Tronco secuencial seguido de varias ramas paralelas que comparten su
    salida (p. ej. cabezas de media y log-varianza de un codificador)
    """

    def __init__(self, tronco: Red, ramas: Dict[str, Red]):
        for nombre, rama in ramas.items():
            if rama.forma_entrada != tronco.forma_salida:
                raise ErrorValidacion(
                    f"Rama {nombre}: entrada {rama.forma_entrada} no encaja con el tronco {tronco.forma_salida}"
                )
        self.tronco = tronco
        self.ramas = dict(ramas)
        self.forma_entrada = tronco.forma_entrada

    def inicializar(self, params: ParamStore, rng: np.random.Generator) -> None:
        self.tronco.inicializar(params, rng)
        for rama in self.ramas.values():
            rama.inicializar(params, rng)

    def forward(self, params: ParamStore, x: np.ndarray,
                aux: Optional[Dict[str, np.ndarray]] = None) -> Tuple[Dict[str, np.ndarray], TapeRamificada]:
        h, cinta = self.tronco.forward(params, x, aux)
        salidas = {}
        tapes = TapeRamificada(cinta)
        for nombre, rama in self.ramas.items():
            salidas[nombre], tapes.ramas[nombre] = rama.forward(params, h, aux)
        return salidas, tapes

    def backward(self, tape: TapeRamificada, grads: Dict[str, np.ndarray]) -> np.ndarray:
        dh = None
        for nombre, rama in self.ramas.items():
            g, _ = rama.backward(tape.ramas[nombre], grads[nombre])
            dh = g if dh is None else dh + g
        dx, _ = self.tronco.backward(tape.tronco, dh)
        return dx


def check_gradients(red: Red, params: ParamStore, entrada: np.ndarray,
                    aux: Optional[Dict[str, np.ndarray]] = None,
                    eps: float = 1e-6, max_entradas: int = 40,
                    rng: Optional[np.random.Generator] = None) -> Dict[str, float]:
    """
    Compara los gradientes analíticos con diferencias centrales

    Se usa la pérdida escalar ⟨red(x), g⟩ con g aleatorio. Para cada tensor
    de parámetros (y para la entrada) se comprueban hasta `max_entradas`
    componentes elegidas al azar y se devuelve el error relativo en norma
    ‖analítico - numérico‖ / ‖numérico‖.

    Returns:
        Diccionario nombre -> error relativo ('entrada' para la entrada)
    """
    rng = rng or np.random.default_rng(0)
    entrada = np.array(entrada, dtype=np.float64)
    salida, cinta = red.forward(params, entrada, aux)
    g = rng.standard_normal(salida.shape)

    params.zero_grad()
    dx, _ = red.backward(cinta, g)

    def perdida():
        y, _ = red.forward(params, entrada, aux)
        return float(np.sum(y * g))

    def comparar(tensor: np.ndarray, analitico: np.ndarray) -> float:
        plano = tensor.reshape(-1)
        n = min(max_entradas, plano.size)
        idx = rng.choice(plano.size, size=n, replace=False)
        numerico = np.empty(n)
        for k, i in enumerate(idx):
            original = plano[i]
            plano[i] = original + eps
            f_mas = perdida()
            plano[i] = original - eps
            f_menos = perdida()
            plano[i] = original
            numerico[k] = (f_mas - f_menos) / (2 * eps)
        referencia = analitico.reshape(-1)[idx]
        escala = max(np.linalg.norm(numerico), 1e-12)
        return float(np.linalg.norm(referencia - numerico) / escala)

    errores = {}
    for nombre in params.nombres():
        errores[nombre] = comparar(params.valores[nombre], params.grads[nombre].copy())
    errores['entrada'] = comparar(entrada, dx)
    params.zero_grad()

    logger.debug(f"Comprobación de gradientes: error máximo {max(errores.values()):.2e}")
    return errores
