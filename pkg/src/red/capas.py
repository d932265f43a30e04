"""
Capas con diferenciación en modo inverso.

Los tensores llevan un eje de lote delante: (B, H, W, C) para las capas
espaciales y (B, n) para las densas. Las formas que se documentan y se
validan excluyen el eje de lote.

Álgebra de formas (sin lote):
    dense(units)                 (n,)        -> (units,)
    conv2d(filters, k, s)        (H, W, C)   -> ((H-k)//s+1, (W-k)//s+1, filters)
    conv2d_transpose(f, k, s)    (H, W, C)   -> ((H-1)*s+k, (W-1)*s+k, f)
    zero_pad(ph, pw)             (H, W, C)   -> (H+2ph, W+2pw, C)
    crop(ch, cw)                 (H, W, C)   -> (H-2ch, W-2cw, C)
    flatten                      (...)       -> (prod,)
    reshape(shape)               (...)       -> shape
    concat(input)                (n,)        -> (n + len(aux),)
    relu, linear                 forma       -> forma

Las convoluciones usan semántica "valid"; el relleno es una capa propia.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple
import logging
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..core.errores import ErrorValidacion

logger = logging.getLogger(__name__)

TIPOS_CAPA = (
    'dense', 'conv2d', 'conv2d_transpose', 'relu', 'linear',
    'zero_pad', 'crop', 'flatten', 'reshape', 'concat',
)


@dataclass(frozen=True)
class LayerSpec:
    """Tipo de capa y sus parámetros específicos"""

    kind: str
    params: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in TIPOS_CAPA:
            raise ErrorValidacion(f"Tipo de capa desconocido: {self.kind}")

    @classmethod
    def desde_dict(cls, d: Dict[str, Any]) -> 'LayerSpec':
        d = dict(d)
        return cls(d.pop('kind'), d)

    def a_dict(self) -> Dict[str, Any]:
        return {'kind': self.kind, **self.params}


def _par(valor) -> Tuple[int, int]:
    if isinstance(valor, (list, tuple)):
        return int(valor[0]), int(valor[1])
    return int(valor), int(valor)


def _glorot(rng: np.random.Generator, forma, fan_in: int, fan_out: int) -> np.ndarray:
    limite = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limite, limite, size=forma)


# ---------------------------------------------------------------------------
# Núcleos de convolución
# ---------------------------------------------------------------------------

def _ventanas(x: np.ndarray, kernel: Tuple[int, int], stride: Tuple[int, int]) -> np.ndarray:
    """Vista (B, Ho, Wo, C, kh, kw) de las ventanas de x"""
    return sliding_window_view(x, kernel, axis=(1, 2))[:, ::stride[0], ::stride[1]]


def conv2d_forward(x: np.ndarray, W: np.ndarray, b: Optional[np.ndarray],
                   stride=(1, 1)) -> np.ndarray:
    """
    Convolución "valid" (correlación cruzada)

    Args:
        x: Entrada (B, H, W, C)
        W: Núcleo (kh, kw, C, O)
        b: Sesgo (O,) o None
        stride: Paso (sh, sw)

    Returns:
        Salida (B, Ho, Wo, O)
    """
    stride = _par(stride)
    y = np.tensordot(_ventanas(x, W.shape[:2], stride), W, axes=([3, 4, 5], [2, 0, 1]))
    if b is not None:
        y += b
    return y


def _conv2d_adjunta_entrada(dy: np.ndarray, W: np.ndarray, forma_x, stride) -> np.ndarray:
    """Adjunta de la convolución respecto a su entrada: reparte dy sobre x"""
    kh, kw = W.shape[:2]
    sh, sw = stride
    _, Ho, Wo, _ = dy.shape
    dx = np.zeros(forma_x)
    for i in range(kh):
        for j in range(kw):
            dx[:, i:i + sh * (Ho - 1) + 1:sh, j:j + sw * (Wo - 1) + 1:sw, :] += \
                np.tensordot(dy, W[i, j], axes=([3], [1]))
    return dx


def _conv2d_grad_nucleo(x: np.ndarray, dy: np.ndarray, kernel, stride) -> np.ndarray:
    """∂/∂W de ⟨conv(x; W), dy⟩, forma (kh, kw, C, O)"""
    dW = np.tensordot(_ventanas(x, kernel, stride), dy, axes=([0, 1, 2], [0, 1, 2]))
    return dW.transpose(1, 2, 0, 3)


def conv2d_transpose_forward(x: np.ndarray, W: np.ndarray, b: Optional[np.ndarray],
                             stride=(1, 1)) -> np.ndarray:
    """
    Convolución transpuesta: adjunta de `conv2d_forward` con el mismo núcleo.

    Args:
        x: Entrada (B, H, W, Cin)
        W: Núcleo (kh, kw, F, Cin), el mismo que usaría conv2d de F a Cin canales
        b: Sesgo (F,) o None
        stride: Paso (sh, sw)

    Returns:
        Salida (B, (H-1)*sh+kh, (W-1)*sw+kw, F)
    """
    stride = _par(stride)
    kh, kw, F, _ = W.shape
    B, H, Wd, _ = x.shape
    forma = (B, (H - 1) * stride[0] + kh, (Wd - 1) * stride[1] + kw, F)
    y = _conv2d_adjunta_entrada(x, W, forma, stride)
    if b is not None:
        y += b
    return y


# ---------------------------------------------------------------------------
# Capas
# ---------------------------------------------------------------------------

class Capa:
    """Capa base: construir, forward y backward"""

    def __init__(self, spec: LayerSpec, nombre: str):
        self.spec = spec
        self.nombre = nombre
        self.forma_entrada: Optional[Tuple[int, ...]] = None
        self.forma_salida: Optional[Tuple[int, ...]] = None

    def _error(self, mensaje: str) -> ErrorValidacion:
        return ErrorValidacion(f"Capa {self.nombre} ({self.spec.kind}): {mensaje}")

    def construir(self, forma, formas_aux: Dict[str, Tuple[int, ...]]) -> Tuple[int, ...]:
        self.forma_entrada = tuple(forma)
        self.forma_salida = tuple(self._forma_salida(self.forma_entrada, formas_aux))
        return self.forma_salida

    def _forma_salida(self, forma, formas_aux):
        return forma

    def inicializar(self, params, rng: np.random.Generator) -> None:
        pass

    def forward(self, params, x: np.ndarray, aux: Dict[str, np.ndarray]):
        raise NotImplementedError

    def backward(self, params, cache, dy: np.ndarray):
        """Devuelve (dx, {nombre_aux: daux}) y acumula gradientes de parámetros"""
        raise NotImplementedError


class Dense(Capa):
    def _forma_salida(self, forma, formas_aux):
        if len(forma) != 1:
            raise self._error(f"requiere entrada vectorial, recibió {forma}")
        return (int(self.spec.params['units']),)

    def inicializar(self, params, rng):
        n, m = self.forma_entrada[0], self.forma_salida[0]
        params.crear(f"{self.nombre}.W", _glorot(rng, (n, m), n, m))
        params.crear(f"{self.nombre}.b", np.zeros(m))

    def forward(self, params, x, aux):
        return x @ params[f"{self.nombre}.W"] + params[f"{self.nombre}.b"], x

    def backward(self, params, x, dy):
        params.acumular(f"{self.nombre}.W", x.T @ dy)
        params.acumular(f"{self.nombre}.b", dy.sum(axis=0))
        return dy @ params[f"{self.nombre}.W"].T, {}


class Conv2D(Capa):
    def _forma_salida(self, forma, formas_aux):
        if len(forma) != 3:
            raise self._error(f"requiere entrada (H, W, C), recibió {forma}")
        self.kernel = _par(self.spec.params.get('kernel', 2))
        self.stride = _par(self.spec.params.get('stride', 1))
        H, W, _ = forma
        if H < self.kernel[0] or W < self.kernel[1]:
            raise self._error(f"núcleo {self.kernel} mayor que la entrada {forma}")
        return ((H - self.kernel[0]) // self.stride[0] + 1,
                (W - self.kernel[1]) // self.stride[1] + 1,
                int(self.spec.params['filters']))

    def inicializar(self, params, rng):
        kh, kw = self.kernel
        C, O = self.forma_entrada[2], self.forma_salida[2]
        params.crear(f"{self.nombre}.W", _glorot(rng, (kh, kw, C, O), kh * kw * C, kh * kw * O))
        params.crear(f"{self.nombre}.b", np.zeros(O))

    def forward(self, params, x, aux):
        y = conv2d_forward(x, params[f"{self.nombre}.W"], params[f"{self.nombre}.b"], self.stride)
        return y, x

    def backward(self, params, x, dy):
        W = params[f"{self.nombre}.W"]
        params.acumular(f"{self.nombre}.W", _conv2d_grad_nucleo(x, dy, self.kernel, self.stride))
        params.acumular(f"{self.nombre}.b", dy.sum(axis=(0, 1, 2)))
        return _conv2d_adjunta_entrada(dy, W, x.shape, self.stride), {}


class Conv2DTranspose(Capa):
    def _forma_salida(self, forma, formas_aux):
        if len(forma) != 3:
            raise self._error(f"requiere entrada (H, W, C), recibió {forma}")
        self.kernel = _par(self.spec.params.get('kernel', 2))
        self.stride = _par(self.spec.params.get('stride', 1))
        H, W, _ = forma
        return ((H - 1) * self.stride[0] + self.kernel[0],
                (W - 1) * self.stride[1] + self.kernel[1],
                int(self.spec.params['filters']))

    def inicializar(self, params, rng):
        kh, kw = self.kernel
        C, F = self.forma_entrada[2], self.forma_salida[2]
        params.crear(f"{self.nombre}.W", _glorot(rng, (kh, kw, F, C), kh * kw * C, kh * kw * F))
        params.crear(f"{self.nombre}.b", np.zeros(F))

    def forward(self, params, x, aux):
        y = conv2d_transpose_forward(x, params[f"{self.nombre}.W"], params[f"{self.nombre}.b"], self.stride)
        return y, x

    def backward(self, params, x, dy):
        W = params[f"{self.nombre}.W"]
        params.acumular(f"{self.nombre}.W", _conv2d_grad_nucleo(dy, x, self.kernel, self.stride))
        params.acumular(f"{self.nombre}.b", dy.sum(axis=(0, 1, 2)))
        return conv2d_forward(dy, W, None, self.stride), {}


class ReLU(Capa):
    def forward(self, params, x, aux):
        activa = x > 0
        return np.where(activa, x, 0.0), activa

    def backward(self, params, activa, dy):
        return np.where(activa, dy, 0.0), {}


class Lineal(Capa):
    def forward(self, params, x, aux):
        return x, None

    def backward(self, params, cache, dy):
        return dy, {}


class ZeroPad(Capa):
    def _forma_salida(self, forma, formas_aux):
        if len(forma) != 3:
            raise self._error(f"requiere entrada (H, W, C), recibió {forma}")
        self.pad = _par(self.spec.params.get('pad', 1))
        return (forma[0] + 2 * self.pad[0], forma[1] + 2 * self.pad[1], forma[2])

    def forward(self, params, x, aux):
        ph, pw = self.pad
        return np.pad(x, ((0, 0), (ph, ph), (pw, pw), (0, 0))), None

    def backward(self, params, cache, dy):
        ph, pw = self.pad
        return dy[:, ph:dy.shape[1] - ph, pw:dy.shape[2] - pw, :], {}


class Crop(Capa):
    def _forma_salida(self, forma, formas_aux):
        if len(forma) != 3:
            raise self._error(f"requiere entrada (H, W, C), recibió {forma}")
        self.crop = _par(self.spec.params.get('crop', 1))
        H, W, C = forma
        if H <= 2 * self.crop[0] or W <= 2 * self.crop[1]:
            raise self._error(f"recorte {self.crop} demasiado grande para {forma}")
        return (H - 2 * self.crop[0], W - 2 * self.crop[1], C)

    def forward(self, params, x, aux):
        ch, cw = self.crop
        return x[:, ch:x.shape[1] - ch, cw:x.shape[2] - cw, :], x.shape

    def backward(self, params, forma_x, dy):
        ch, cw = self.crop
        dx = np.zeros(forma_x)
        dx[:, ch:forma_x[1] - ch, cw:forma_x[2] - cw, :] = dy
        return dx, {}


class Flatten(Capa):
    def _forma_salida(self, forma, formas_aux):
        return (int(np.prod(forma)),)

    def forward(self, params, x, aux):
        return x.reshape(x.shape[0], -1), x.shape

    def backward(self, params, forma_x, dy):
        return dy.reshape(forma_x), {}


class Reshape(Capa):
    def _forma_salida(self, forma, formas_aux):
        destino = tuple(int(d) for d in self.spec.params['shape'])
        if int(np.prod(destino)) != int(np.prod(forma)):
            raise self._error(f"no se puede redimensionar {forma} a {destino}")
        return destino

    def forward(self, params, x, aux):
        return x.reshape((x.shape[0],) + self.forma_salida), x.shape

    def backward(self, params, forma_x, dy):
        return dy.reshape(forma_x), {}


class Concat(Capa):
    def _forma_salida(self, forma, formas_aux):
        self.entrada_aux = self.spec.params.get('input', 'm')
        if self.entrada_aux not in formas_aux:
            raise self._error(f"entrada auxiliar desconocida '{self.entrada_aux}'")
        if len(forma) != 1 or len(formas_aux[self.entrada_aux]) != 1:
            raise self._error("solo concatena vectores")
        self.n_principal = forma[0]
        self.n_aux = formas_aux[self.entrada_aux][0]
        return (forma[0] + self.n_aux,)

    def forward(self, params, x, aux):
        if self.entrada_aux not in aux:
            raise self._error(f"falta la entrada auxiliar '{self.entrada_aux}'")
        extra = np.asarray(aux[self.entrada_aux], dtype=np.float64)
        if extra.shape != (x.shape[0], self.n_aux):
            raise self._error(f"entrada auxiliar con forma {extra.shape}")
        return np.concatenate([x, extra], axis=1), None

    def backward(self, params, cache, dy):
        return dy[:, :self.n_principal], {self.entrada_aux: dy[:, self.n_principal:]}


CLASES_CAPA = {
    'dense': Dense,
    'conv2d': Conv2D,
    'conv2d_transpose': Conv2DTranspose,
    'relu': ReLU,
    'linear': Lineal,
    'zero_pad': ZeroPad,
    'crop': Crop,
    'flatten': Flatten,
    'reshape': Reshape,
    'concat': Concat,
}


def crear_capa(spec: LayerSpec, nombre: str) -> Capa:
    return CLASES_CAPA[spec.kind](spec, nombre)
