"""
Arquitecturas del SCVAE.

El codificador es un tronco secuencial al que se añaden automáticamente dos
cabezas densas paralelas (media y log-varianza, `latent_dim` unidades). El
decodificador recibe z como entrada principal y las medidas como entrada
auxiliar `m`, que una capa `concat` une a z.
"""

from dataclasses import dataclass
from typing import Any, Dict, Sequence, Tuple
import logging

from ..core.errores import ErrorValidacion
from ..red.capas import LayerSpec
from ..red.red import Red, RedRamificada

logger = logging.getLogger(__name__)

ENTRADA_MEDIDAS = 'm'


@dataclass(frozen=True)
class ScvaeArchitecture:
    input_shape: Tuple[int, int, int]
    encoder: Tuple[LayerSpec, ...]
    decoder: Tuple[LayerSpec, ...]
    latent_dim: int = 2
    nombre: str = 'personalizada'

    def __post_init__(self):
        if int(self.latent_dim) < 1:
            raise ErrorValidacion(f"latent_dim debe ser >= 1 (recibido {self.latent_dim})")
        object.__setattr__(self, 'input_shape', tuple(int(d) for d in self.input_shape))
        object.__setattr__(self, 'encoder', tuple(_spec(s) for s in self.encoder))
        object.__setattr__(self, 'decoder', tuple(_spec(s) for s in self.decoder))
        if not any(s.kind == 'concat' for s in self.decoder):
            raise ErrorValidacion("El decodificador debe concatenar las medidas (capa concat)")

    def construir(self, n_medidas: int) -> Tuple[RedRamificada, Red]:
        """
        Construye las redes para 2M = n_medidas medidas

        Returns:
            (codificador con cabezas 'media' y 'logvar', decodificador)
        """
        tronco = Red(self.encoder, self.input_shape, prefijo='encoder')
        cabeza = [LayerSpec('dense', {'units': self.latent_dim})]
        codificador = RedRamificada(tronco, {
            'media': Red(cabeza, tronco.forma_salida, prefijo='encoder.media'),
            'logvar': Red(cabeza, tronco.forma_salida, prefijo='encoder.logvar'),
        })
        decodificador = Red(self.decoder, (self.latent_dim,), prefijo='decoder',
                            formas_aux={ENTRADA_MEDIDAS: (int(n_medidas),)})
        if decodificador.forma_salida != self.input_shape:
            raise ErrorValidacion(
                f"La salida del decodificador {decodificador.forma_salida} no coincide con la entrada {self.input_shape}"
            )
        return codificador, decodificador

    def a_dict(self) -> Dict[str, Any]:
        return {
            'nombre': self.nombre,
            'input_shape': list(self.input_shape),
            'latent_dim': self.latent_dim,
            'encoder': [s.a_dict() for s in self.encoder],
            'decoder': [s.a_dict() for s in self.decoder],
        }


def _spec(s) -> LayerSpec:
    return s if isinstance(s, LayerSpec) else LayerSpec.desde_dict(s)


def _capas(*capas) -> Tuple[LayerSpec, ...]:
    return tuple(LayerSpec(kind, params) for kind, params in capas)


def _relleno_multiplo(n: int, multiplo: int) -> int:
    """Menor p >= 0 con (n + 2p) divisible por `multiplo`"""
    for p in range(multiplo):
        if (n + 2 * p) % multiplo == 0:
            return p
    raise ErrorValidacion(
        f"No existe un relleno simétrico que haga {n} divisible por {multiplo}; indique una arquitectura explícita"
    )


def convolucional(input_shape: Sequence[int], filtros: Tuple[int, int], densa: int,
                  latent_dim: int = 2, relleno: Tuple[int, int] = None,
                  nombre: str = 'convolucional') -> ScvaeArchitecture:
    """
    Arquitectura de dos convoluciones de núcleo y paso 2

    Codificador: relleno -> conv f1 -> conv f2 -> aplanado -> densa.
    Decodificador: concat(z, m) -> densa al tamaño comprimido -> conv
    transpuestas f2 y f1 -> conv transpuesta lineal 1×1 a 2 canales -> recorte.
    """
    nx, ny, canales = (int(d) for d in input_shape)
    if relleno is None:
        relleno = (_relleno_multiplo(nx, 4), _relleno_multiplo(ny, 4))
    px, py = relleno
    if (nx + 2 * px) % 4 or (ny + 2 * py) % 4:
        raise ErrorValidacion(f"El relleno {relleno} no deja dimensiones divisibles por 4")
    hx, hy = (nx + 2 * px) // 4, (ny + 2 * py) // 4
    f1, f2 = filtros

    encoder = []
    if px or py:
        encoder.append(('zero_pad', {'pad': [px, py]}))
    encoder += [
        ('conv2d', {'filters': f1, 'kernel': 2, 'stride': 2}), ('relu', {}),
        ('conv2d', {'filters': f2, 'kernel': 2, 'stride': 2}), ('relu', {}),
        ('flatten', {}),
        ('dense', {'units': densa}), ('relu', {}),
    ]
    decoder = [
        ('concat', {'input': ENTRADA_MEDIDAS}),
        ('dense', {'units': hx * hy * f2}), ('relu', {}),
        ('reshape', {'shape': [hx, hy, f2]}),
        ('conv2d_transpose', {'filters': f2, 'kernel': 2, 'stride': 2}), ('relu', {}),
        ('conv2d_transpose', {'filters': f1, 'kernel': 2, 'stride': 2}), ('relu', {}),
        ('conv2d_transpose', {'filters': canales, 'kernel': 1, 'stride': 1}), ('linear', {}),
    ]
    if px or py:
        decoder.append(('crop', {'crop': [px, py]}))
    return ScvaeArchitecture((nx, ny, canales), _capas(*encoder), _capas(*decoder), latent_dim, nombre)


def diminuta(input_shape: Sequence[int] = (8, 8, 2), latent_dim: int = 2) -> ScvaeArchitecture:
    """Una convolución y una densa; pensada para comprobaciones de gradiente"""
    nx, ny, canales = (int(d) for d in input_shape)
    if nx % 2 or ny % 2:
        raise ErrorValidacion(f"La arquitectura diminuta necesita dimensiones pares: {input_shape}")
    encoder = _capas(
        ('conv2d', {'filters': 4, 'kernel': 2, 'stride': 2}), ('relu', {}),
        ('flatten', {}),
    )
    decoder = _capas(
        ('concat', {'input': ENTRADA_MEDIDAS}),
        ('dense', {'units': (nx // 2) * (ny // 2) * 4}), ('relu', {}),
        ('reshape', {'shape': [nx // 2, ny // 2, 4]}),
        ('conv2d_transpose', {'filters': canales, 'kernel': 2, 'stride': 2}), ('linear', {}),
    )
    return ScvaeArchitecture((nx, ny, canales), encoder, decoder, latent_dim, 'diminuta')


def preset(nombre: str, input_shape: Sequence[int] = None, latent_dim: int = 2) -> ScvaeArchitecture:
    """
    Arquitecturas predefinidas

    Args:
        nombre: cilindro (160×50), oceano (32×32), compacta (cualquier malla
            par, por defecto 64×32) o diminuta (8×8)
        input_shape: Forma (nx, ny, 2); solo compacta y diminuta la admiten distinta
        latent_dim: Dimensión latente
    """
    if nombre == 'cilindro':
        return convolucional((160, 50, 2), (160, 200), 64, latent_dim, (4, 3), 'cilindro')
    if nombre == 'oceano':
        return convolucional((32, 32, 2), (64, 128), 16, latent_dim, (0, 0), 'oceano')
    if nombre == 'compacta':
        return convolucional(input_shape or (64, 32, 2), (8, 16), 32, latent_dim, None, 'compacta')
    if nombre == 'diminuta':
        return diminuta(input_shape or (8, 8, 2), latent_dim)
    raise ErrorValidacion(f"Arquitectura predefinida desconocida: {nombre}")


def arquitectura_desde_dict(d: Dict[str, Any], input_shape: Sequence[int] = None) -> ScvaeArchitecture:
    """
    Crea una arquitectura desde JSON: `{"preset": "compacta", "latent_dim": 2}`
    o `{"input_shape": [...], "encoder": [...], "decoder": [...], "latent_dim": 2}`
    """
    latent_dim = int(d.get('latent_dim', 2))
    if 'preset' in d:
        return preset(d['preset'], d.get('input_shape', input_shape), latent_dim)
    for clave in ('encoder', 'decoder'):
        if clave not in d:
            raise ErrorValidacion(f"Falta '{clave}' en la arquitectura")
    forma = d.get('input_shape', input_shape)
    if forma is None:
        raise ErrorValidacion("La arquitectura necesita input_shape")
    return ScvaeArchitecture(tuple(forma), tuple(d['encoder']), tuple(d['decoder']),
                             latent_dim, d.get('nombre', 'personalizada'))
