"""
POD y Gappy-POD con regularización de divergencia.

La base POD son los r primeros vectores singulares izquierdos de la matriz
de instantáneas X_h (2N × K, una columna por instantánea). Sus coeficientes
A_h = Φᵀ X_h (igual a Φ⁺ X_h por ortonormalidad) no intervienen en la
reconstrucción; `PodBasis.coefficients` los expone para análisis.

La reconstrucción GPOD resuelve

    a* = argmin ‖C Φ a - m‖² + λ ‖L_div Φ a‖²

mediante las ecuaciones normales r × r. Si el sistema tiene rango
deficiente se devuelve la solución de norma mínima del problema apilado y
se emite `AdvertenciaRangoDeficiente`.
"""

from dataclasses import dataclass
from datetime import datetime
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple
import logging
import warnings

import numpy as np
from scipy import linalg
from sklearn.utils.extmath import randomized_svd

from ..core.accesos import RegistroAccesos
from ..core.contenedor import escribir_cabecera_bloque, leer_cabecera_bloque
from ..core.divergencia import DivergenceOperator
from ..core.errores import AdvertenciaRangoDeficiente, ErrorValidacion
from ..core.escalado import ScalingParams, compute_scaling, scale_state, unscale_state
from ..core.malla import FlowSeries, Grid
from ..core.muestreo import SamplingOperator, SensorLayout
from ..mlops.metricas import divergence_error, relative_error
from .modelo_base import ModeloBase

logger = logging.getLogger(__name__)

FORMATO_BASE = 'frcpod-1'


@dataclass(frozen=True, eq=False)
class PodBasis:
    """Base POD: columnas ortonormales de Φ y valores singulares"""

    phi: np.ndarray
    singular_values: np.ndarray
    mean_removed: bool = False
    media: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.phi.ndim != 2 or self.phi.shape[1] != self.singular_values.size:
            raise ErrorValidacion("Φ y los valores singulares no son coherentes")
        if self.mean_removed and self.media is None:
            raise ErrorValidacion("Falta la media de las instantáneas")

    @property
    def r(self) -> int:
        return self.phi.shape[1]

    @property
    def n_estado(self) -> int:
        return self.phi.shape[0]

    def truncada(self, r: int) -> 'PodBasis':
        """Primeros r modos"""
        if not 1 <= r <= self.r:
            raise ErrorValidacion(f"r={r} fuera de rango (base con {self.r} modos)")
        return PodBasis(self.phi[:, :r], self.singular_values[:r], self.mean_removed, self.media)

    def coefficients(self, X: np.ndarray) -> np.ndarray:
        """A_h = Φᵀ X_h para estados apilados por filas (K, 2N) -> (K, r)"""
        X = np.atleast_2d(X)
        if self.mean_removed:
            X = X - self.media
        return X @ self.phi


@dataclass(frozen=True)
class GpodConfig:
    """Número de modos r y peso de divergencia λ (`lam`)"""

    r: int
    lam: float = 0.0

    def __post_init__(self):
        if int(self.r) < 1:
            raise ErrorValidacion(f"r debe ser >= 1 (recibido {self.r})")
        if not self.lam >= 0:
            raise ErrorValidacion(f"λ debe ser >= 0 (recibido {self.lam})")

    def a_dict(self) -> Dict[str, Any]:
        return {'r': int(self.r), 'lambda': float(self.lam)}


@dataclass(frozen=True, eq=False)
class GpodSolution:
    coefficients: np.ndarray
    reconstruction: np.ndarray


def compute_pod(train: FlowSeries, r: int, mean_removed: bool = False,
                solver: str = 'svd', seed: int = 0) -> PodBasis:
    """
    Calcula la base POD de una serie

    Args:
        train: Serie (normalmente escalada)
        r: Número de modos, r <= min(2N, K)
        mean_removed: Restar la media temporal antes de la SVD
        solver: 'svd' (SVD fina de scipy) o 'randomized' (scikit-learn)
        seed: Semilla del solver aleatorizado

    Returns:
        Base POD
    """
    X = train.matriz()
    K, n = X.shape
    if not 1 <= r <= min(n, K):
        raise ErrorValidacion(f"r={r} debe cumplir 1 <= r <= min(2N, K) = {min(n, K)}")

    media = X.mean(axis=0) if mean_removed else None
    Xh = (X - media).T if mean_removed else X.T

    try:
        if solver == 'svd':
            U, s, _ = linalg.svd(Xh, full_matrices=False)
            U, s = U[:, :r], s[:r]
        elif solver == 'randomized':
            U, s, _ = randomized_svd(Xh, n_components=r, random_state=seed)
        else:
            raise ErrorValidacion(f"Solver POD desconocido: {solver}")
    except linalg.LinAlgError as e:
        logger.error(f"Error en la SVD de la matriz de instantáneas: {str(e)}")
        raise

    if s[-1] <= s[0] * 1e-14:
        logger.warning(f"La base POD incluye modos con valor singular casi nulo (r={r})")

    logger.debug(f"Base POD calculada: r={r}, K={K}, 2N={n}")
    return PodBasis(np.ascontiguousarray(U), np.asarray(s, dtype=np.float64), mean_removed, media)


def project(basis: PodBasis, x: np.ndarray) -> np.ndarray:
    """Proyección Φ Φᵀ x sobre el espacio de la base (x de forma (2N,) o (B, 2N))"""
    x = np.asarray(x, dtype=np.float64)
    if basis.mean_removed:
        return basis.media + ((x - basis.media) @ basis.phi) @ basis.phi.T
    return (x @ basis.phi) @ basis.phi.T


def projection_error(basis: PodBasis, series: FlowSeries) -> float:
    """Error relativo de proyección ‖X - P X‖_F / ‖X‖_F"""
    X = series.matriz()
    return float(np.linalg.norm(X - project(basis, X)) / np.linalg.norm(X))


class _SistemaGpod:
    """Ecuaciones normales de GPOD para una base, muestreo y λ fijos"""

    def __init__(self, basis: PodBasis, op: SamplingOperator, div: DivergenceOperator, lam: float):
        if op.n_state != basis.n_estado:
            raise ErrorValidacion("El operador de muestreo no corresponde al estado de la base")
        self.basis = basis
        self.op = op
        self.lam = lam
        self.CPhi = basis.phi[op.indices]
        self.LPhi = np.asarray(div.matrix() @ basis.phi)
        self.A = self.CPhi.T @ self.CPhi + lam * (self.LPhi.T @ self.LPhi)
        self.L_media = np.asarray(div.matrix() @ basis.media) if basis.mean_removed else None

        apilada = np.vstack([self.CPhi, np.sqrt(lam) * self.LPhi]) if lam > 0 else self.CPhi
        self.rango = int(np.linalg.matrix_rank(apilada))
        self.apilada = apilada
        if self.rango < basis.r:
            mensaje = (f"GPOD con rango deficiente ({self.rango} < r={basis.r}, 2M={op.n_medidas}, "
                       f"λ={lam}); se usa la solución de norma mínima")
            logger.warning(mensaje)
            warnings.warn(mensaje, AdvertenciaRangoDeficiente, stacklevel=3)

    def resolver(self, Mmat: np.ndarray) -> np.ndarray:
        """Coeficientes (B, r) para medidas (B, 2M)"""
        objetivo = Mmat
        if self.basis.mean_removed:
            objetivo = Mmat - self.basis.media[self.op.indices]

        if self.rango == self.basis.r:
            b = objetivo @ self.CPhi
            if self.L_media is not None and self.lam > 0:
                b = b - self.lam * (self.L_media @ self.LPhi)
            return linalg.solve(self.A, b.T, assume_a='pos').T

        derecha = objetivo.T
        if self.lam > 0:
            ceros = np.zeros((self.LPhi.shape[0], objetivo.shape[0]))
            if self.L_media is not None:
                ceros = ceros - np.sqrt(self.lam) * self.L_media[:, None]
            derecha = np.vstack([derecha, ceros])
        a, *_ = linalg.lstsq(self.apilada, derecha)
        return a.T

    def reconstruir(self, coeficientes: np.ndarray) -> np.ndarray:
        X = coeficientes @ self.basis.phi.T
        if self.basis.mean_removed:
            X = X + self.basis.media
        return X


def gpod_reconstruct(basis: PodBasis, op: SamplingOperator, div: DivergenceOperator,
                     m: np.ndarray, cfg: GpodConfig) -> GpodSolution:
    """
    Reconstrucción Gappy-POD regularizada de un estado

    Args:
        basis: Base POD (se usan sus cfg.r primeros modos)
        op: Operador de muestreo
        div: Operador de divergencia en el espacio de la base
        m: Medidas (2M,)
        cfg: Configuración (r, λ)

    Returns:
        Coeficientes a* y reconstrucción Φ a*
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (op.n_medidas,):
        raise ErrorValidacion(f"Las medidas deben tener longitud 2M={op.n_medidas} (recibido {m.shape})")
    sistema = _SistemaGpod(basis.truncada(cfg.r), op, div, cfg.lam)
    a = sistema.resolver(m[None, :])
    return GpodSolution(a[0], sistema.reconstruir(a)[0])


def gpod_reconstruct_lote(basis: PodBasis, op: SamplingOperator, div: DivergenceOperator,
                          Mmat: np.ndarray, cfg: GpodConfig) -> np.ndarray:
    """Reconstruye varias instantáneas (B, 2M) -> (B, 2N) con un único sistema"""
    Mmat = np.atleast_2d(np.asarray(Mmat, dtype=np.float64))
    if Mmat.shape[1] != op.n_medidas:
        raise ErrorValidacion(f"Las medidas deben tener longitud 2M={op.n_medidas}")
    sistema = _SistemaGpod(basis.truncada(cfg.r), op, div, cfg.lam)
    return sistema.reconstruir(sistema.resolver(Mmat))


def select_gpod_hyperparams(basis_family: PodBasis, validation: FlowSeries,
                            op: SamplingOperator, div: DivergenceOperator,
                            r_grid: Iterable[int], lambda_grid: Iterable[float],
                            escalado: Optional[ScalingParams] = None,
                            tolerancia_empate: float = 1e-12,
                            accesos: Optional[RegistroAccesos] = None) -> GpodConfig:
    """
    Selecciona (r, λ) minimizando el error relativo medio sobre validación

    Los candidatos se recorren por r creciente y luego λ creciente; uno nuevo
    solo sustituye al mejor si lo mejora en más de la tolerancia de empate,
    de modo que los empates favorecen r y λ menores.

    Args:
        basis_family: Base con al menos max(r_grid) modos
        validation: Serie de validación sin escalar
        op: Operador de muestreo
        div: Operador de divergencia en el espacio de la base
        escalado: Si se indica, la base vive en el espacio escalado; las
            medidas se escalan y el error se calcula tras desescalar
        accesos: Registro donde se anota la lectura de la serie de validación

    Returns:
        Configuración seleccionada
    """
    r_grid = sorted(set(int(r) for r in r_grid))
    lambda_grid = sorted(set(float(l) for l in lambda_grid))
    if not r_grid or not lambda_grid:
        raise ErrorValidacion("Las rejillas de r y λ no pueden estar vacías")

    verdad = accesos.leer(validation, 'seleccion') if accesos is not None else validation.matriz()
    grid = validation.grid
    espacio = scale_state(escalado, grid, verdad) if escalado is not None else verdad
    medidas = espacio[:, op.indices]

    mejor, mejor_error = None, np.inf
    for r in r_grid:
        for lam in lambda_grid:
            cfg = GpodConfig(r, lam)
            with warnings.catch_warnings():
                warnings.simplefilter('ignore', AdvertenciaRangoDeficiente)
                X = gpod_reconstruct_lote(basis_family, op, div, medidas, cfg)
            if escalado is not None:
                X = unscale_state(escalado, grid, X)
            error = relative_error(X, verdad)
            logger.debug(f"GPOD validación r={r} λ={lam}: error {error:.6e}")
            if error < mejor_error - max(tolerancia_empate, tolerancia_empate * abs(mejor_error)):
                mejor, mejor_error = cfg, error

    if mejor is None:
        raise ErrorValidacion("Ninguna combinación de hiperparámetros produjo un error finito")
    logger.info(f"Hiperparámetros GPOD seleccionados: r={mejor.r}, λ={mejor.lam} (error validación {mejor_error:.4e})")
    return mejor


def guardar_base(basis: PodBasis, ruta: str, extra: Optional[Dict[str, Any]] = None) -> None:
    """Guarda una base en formato frcpod-1 (Φ por filas, valores singulares, media)"""
    cabecera = dict(extra or {})
    cabecera.update({
        'fmt': FORMATO_BASE,
        'n_estado': basis.n_estado,
        'r': basis.r,
        'mean_removed': basis.mean_removed,
    })
    partes = [basis.phi.ravel(), basis.singular_values]
    if basis.mean_removed:
        partes.append(basis.media)
    escribir_cabecera_bloque(ruta, cabecera, np.concatenate(partes))


def cargar_base(ruta: str) -> Tuple[PodBasis, Dict[str, Any]]:
    """Lee una base frcpod-1; devuelve la base y la cabecera"""
    cabecera, bloque = leer_cabecera_bloque(ruta)
    if cabecera.get('fmt') != FORMATO_BASE:
        raise ErrorValidacion(f"Formato {cabecera.get('fmt')!r} no soportado, se esperaba {FORMATO_BASE!r}")
    n, r = cabecera['n_estado'], cabecera['r']
    esperado = n * r + r + (n if cabecera['mean_removed'] else 0)
    if bloque.size != esperado:
        raise ErrorValidacion(f"Bloque con {bloque.size} valores, se esperaban {esperado}")
    phi = bloque[:n * r].reshape(n, r)
    s = bloque[n * r:n * r + r]
    media = bloque[n * r + r:] if cabecera['mean_removed'] else None
    return PodBasis(phi, s, cabecera['mean_removed'], media), cabecera


class ModeloGpod(ModeloBase):
    """
    Reconstrucción GPOD completa: escalado, base POD sobre los datos de
    entrenamiento escalados y selección de (r, λ) sobre validación
    """

    def __init__(self, nombre: str = 'gpod', config: Optional[Dict[str, Any]] = None):
        configuracion_default = {
            'r_max': 20,
            'r_grid': None,
            'lambda_grid': [0.0],
            'limitar_r_a_medidas': True,
            'mean_removed': False,
            'solver': 'svd',
            'seed': 0,
        }
        super().__init__(nombre, 'gpod', {**configuracion_default, **(config or {})})
        self.basis: Optional[PodBasis] = None
        self.escalado: Optional[ScalingParams] = None
        self.grid: Optional[Grid] = None
        self.gpod_config: Optional[GpodConfig] = None

    def rejilla_r(self, K: int, n_estado: int, M: int) -> Sequence[int]:
        """Valores de r explorados: `r_grid` explícito o 1..r_max (r <= 2M con `limitar_r_a_medidas`)"""
        if self.config['r_grid']:
            validos = [int(r) for r in self.config['r_grid'] if 1 <= int(r) <= min(K, n_estado)]
            if not validos:
                raise ErrorValidacion(f"Ningún r de {self.config['r_grid']} es válido para K={K}")
            return validos
        r_max = min(int(self.config['r_max']), K, n_estado)
        if self.config['limitar_r_a_medidas']:
            r_max = min(r_max, 2 * M)
        return list(range(1, r_max + 1))

    def entrenar(self, train: FlowSeries, validacion: FlowSeries, layout: SensorLayout) -> None:
        try:
            self.grid = train.grid
            self.layout = layout
            X_train = self.accesos.leer(train, 'entrenamiento')
            self.escalado = compute_scaling(train)
            escalada = FlowSeries.desde_matriz(
                train.grid, scale_state(self.escalado, train.grid, X_train), train.time_indices
            )
            r_grid = self.rejilla_r(len(train), train.grid.n_estado, layout.M)
            self.basis = compute_pod(escalada, max(r_grid), self.config['mean_removed'],
                                     self.config['solver'], self.config['seed'])
            op = self.operador_muestreo(self.grid)
            div = DivergenceOperator(self.grid).scaled(self.escalado)
            self.gpod_config = select_gpod_hyperparams(
                self.basis, validacion, op, div, r_grid, self.config['lambda_grid'], self.escalado,
                accesos=self.accesos
            )
            self.esta_entrenado = True
            self.fecha_ultimo_entrenamiento = datetime.now()
            medidas_val = self.accesos.leer(validacion, 'seleccion')[:, op.indices]
            self.metricas['validacion'] = self.evaluar(medidas_val, validacion)
        except Exception as e:
            logger.error(f"Error entrenando modelo GPOD: {str(e)}")
            raise

    def predecir(self, medidas: np.ndarray) -> np.ndarray:
        medidas = self.validar_medidas(medidas)
        op = self.operador_muestreo(self.grid)
        centro, semiancho = self.escalado.vectores(self.grid)
        escaladas = (medidas - centro[op.indices]) / semiancho[op.indices]
        div = DivergenceOperator(self.grid).scaled(self.escalado)
        X = gpod_reconstruct_lote(self.basis, op, div, escaladas, self.gpod_config)
        return unscale_state(self.escalado, self.grid, X)

    def evaluar(self, medidas: np.ndarray, verdad: FlowSeries) -> Dict[str, float]:
        X = self.predecir(medidas)
        return {
            'mean_relative_error': relative_error(X, verdad.matriz()),
            'divergence_error': divergence_error(X, DivergenceOperator(self.grid)),
        }

    def guardar(self, ruta: str) -> None:
        if not self.esta_entrenado:
            raise ErrorValidacion("No se puede guardar un modelo sin entrenar")
        guardar_base(self.basis, ruta, {
            'modelo': self.generar_metadata(),
            'grid': self.grid.a_dict(),
            'escalado': self.escalado.a_dict(),
            'gpod': self.gpod_config.a_dict(),
        })
        logger.info(f"Modelo GPOD guardado en {ruta}")

    def cargar(self, ruta: str) -> None:
        basis, cabecera = cargar_base(ruta)
        for clave in ('modelo', 'grid', 'escalado', 'gpod'):
            if clave not in cabecera:
                raise ErrorValidacion(f"El archivo {ruta} no contiene un modelo GPOD ('{clave}')")
        self.nombre = cabecera['modelo'].get('nombre', self.nombre)
        self.basis = basis
        self.grid = Grid(**cabecera['grid'])
        self.escalado = ScalingParams(**cabecera['escalado'])
        self.gpod_config = GpodConfig(cabecera['gpod']['r'], cabecera['gpod']['lambda'])
        self.layout = SensorLayout(tuple(tuple(l) for l in cabecera['modelo']['layout']))
        self.config.update(cabecera['modelo'].get('config', {}))
        self.metricas = cabecera['modelo'].get('metricas', {})
        self.esta_entrenado = True
