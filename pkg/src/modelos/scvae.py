"""
Autoencoder variacional semicondicional (SCVAE).

El codificador solo ve el estado x; el decodificador recibe el latente z y
las medidas m = C x. Con verosimilitudes gaussianas de varianza unidad, el
objetivo por muestra (forma de maximización) es

    total = recon + λ·div - β·KL
    recon = -‖x - x̂‖² / (4N)          (media sobre L extracciones)
    div   = -‖L_div x̂‖² / N            (objetivo d = 0)
    KL    = ½ Σ (μ² + σ² - log σ² - 1)

y la pérdida que minimiza Adam es -total promediado sobre el minilote. El
factor K/R del estimador por minilotes no cambia el paso de Adam, que es
invariante a la escala del gradiente.

Todas las operaciones de red trabajan sobre estados escalados; `predict`
devuelve extracciones ya desescaladas.
"""

from dataclasses import asdict, dataclass
from datetime import datetime
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from ..core.accesos import RegistroAccesos
from ..core.divergencia import DivergenceOperator, apply_divergence
from ..core.errores import ErrorNumerico, ErrorValidacion
from ..core.escalado import ScalingParams, compute_scaling, scale_state, unscale_state
from ..core.malla import FlowSeries, Grid, estado_a_tensor, tensor_a_estado
from ..core.muestreo import SensorLayout
from ..mlops.metricas import divergence_error, relative_error
from ..red.optimizador import AdamState, adam_step
from ..red.parametros import ParamStore
from ..red.serializacion import cargar_parametros, guardar_parametros
from .arquitecturas import ENTRADA_MEDIDAS, ScvaeArchitecture, arquitectura_desde_dict
from .modelo_base import ModeloBase

logger = logging.getLogger(__name__)

FORMATO_MODELO = 'frcmodel-1'
COLUMNAS_REGISTRO = ['epoch', 'recon', 'kl', 'div', 'beta', 'lambda', 'val_objective']
TAMANO_BLOQUE_EVALUACION = 256


@dataclass(frozen=True, eq=False)
class LatentGaussian:
    """Media y log-varianza del latente, (d,) o (B, d)"""

    mean: np.ndarray
    log_variance: np.ndarray

    def __post_init__(self):
        if self.mean.shape != self.log_variance.shape:
            raise ErrorValidacion("Media y log-varianza con formas distintas")
        if not (np.all(np.isfinite(self.mean)) and np.all(np.isfinite(self.log_variance))):
            raise ErrorNumerico("Gaussiana latente con valores no finitos")

    @property
    def variance(self) -> np.ndarray:
        return np.exp(self.log_variance)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 50
    mc_samples_L: int = 1
    lambda_mode: str = 'off'
    beta_mode: str = 'adaptive'
    beta: float = 1.0
    lambda_inicial: float = 1.0
    beta_min: float = 1e-4
    beta_max: float = 10.0
    lambda_min: float = 1e-6
    lambda_max: float = 1e3
    seed: int = 0
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    fragmentos: int = 1
    log_cada: int = 10
    barra_progreso: bool = False

    def __post_init__(self):
        if self.batch_size < 1 or self.patience < 1 or self.mc_samples_L < 1:
            raise ErrorValidacion("batch_size, patience y mc_samples_L deben ser >= 1")
        if self.max_epochs < 1 or self.fragmentos < 1:
            raise ErrorValidacion("max_epochs y fragmentos deben ser >= 1")
        if self.lambda_mode not in ('off', 'adaptive'):
            raise ErrorValidacion(f"lambda_mode desconocido: {self.lambda_mode}")
        if self.beta_mode not in ('fixed', 'adaptive'):
            raise ErrorValidacion(f"beta_mode desconocido: {self.beta_mode}")
        if not 0 < self.beta_min <= self.beta_max:
            raise ErrorValidacion("Se requiere 0 < beta_min <= beta_max")

    @property
    def lambda_activo(self) -> bool:
        return self.lambda_mode == 'adaptive'

    def pesos_iniciales(self) -> Tuple[float, float]:
        return self.beta, (self.lambda_inicial if self.lambda_activo else 0.0)

    def a_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class LossBreakdown:
    """Términos del objetivo (medias sobre el lote), forma de maximización"""

    reconstruction_term: float
    divergence_term: float
    kl_term: float
    beta: float
    lam: float
    total: float

    def a_dict(self) -> Dict[str, float]:
        return {
            'reconstruction_term': self.reconstruction_term, 'divergence_term': self.divergence_term,
            'kl_term': self.kl_term, 'beta': self.beta, 'lambda': self.lam, 'total': self.total,
        }


# ---------------------------------------------------------------------------
# Operaciones elementales
# ---------------------------------------------------------------------------

def _estados(model: 'ScvaeModel', x: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    if X.shape[1] != model.grid.n_estado:
        raise ErrorValidacion(f"El estado debe tener longitud 2N={model.grid.n_estado} (recibido {X.shape[1]})")
    return X


def _medidas(model: 'ScvaeModel', m: np.ndarray, filas: int) -> np.ndarray:
    Mm = np.atleast_2d(np.asarray(m, dtype=np.float64))
    if Mm.shape[1] != model.n_medidas:
        raise ErrorValidacion(f"Las medidas deben tener longitud 2M={model.n_medidas} (recibido {Mm.shape[1]})")
    if Mm.shape[0] == 1 and filas > 1:
        Mm = np.repeat(Mm, filas, axis=0)
    if Mm.shape[0] != filas:
        raise ErrorValidacion(f"{Mm.shape[0]} vectores de medidas para {filas} latentes")
    return Mm


def encode(model: 'ScvaeModel', x: np.ndarray) -> LatentGaussian:
    """
    Codifica estados escalados (2N,) o (B, 2N); no depende de las medidas
    """
    X = _estados(model, x)
    salidas, _ = model.encoder.forward(model.params, estado_a_tensor(model.grid, X))
    if np.ndim(x) == 1:
        return LatentGaussian(salidas['media'][0], salidas['logvar'][0])
    return LatentGaussian(salidas['media'], salidas['logvar'])


def reparameterize(g: LatentGaussian, eps: np.ndarray) -> np.ndarray:
    """z = μ + exp(½ log σ²) ⊙ ε"""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape[-1] != g.mean.shape[-1]:
        raise ErrorValidacion(f"ε debe tener dimensión {g.mean.shape[-1]}")
    return g.mean + np.exp(0.5 * g.log_variance) * eps


def decode(model: 'ScvaeModel', z: np.ndarray, m: np.ndarray) -> np.ndarray:
    """
    Decodifica latentes con medidas escaladas

    Args:
        z: Latente (d,) o (B, d)
        m: Medidas escaladas (2M,) o (B, 2M); un único vector se replica

    Returns:
        Estados escalados (2N,) o (B, 2N)
    """
    Z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if Z.shape[1] != model.arquitectura.latent_dim:
        raise ErrorValidacion(f"z debe tener dimensión {model.arquitectura.latent_dim}")
    Mm = _medidas(model, m, Z.shape[0])
    T, _ = model.decoder.forward(model.params, Z, {ENTRADA_MEDIDAS: Mm})
    X = tensor_a_estado(model.grid, T)
    return X[0] if np.ndim(z) == 1 else X


def kl_closed_form(g: LatentGaussian):
    """KL(q ‖ N(0, I)) = ½ Σ_d (μ² + σ² - log σ² - 1); escalar o (B,)"""
    valor = 0.5 * np.sum(g.mean ** 2 + np.exp(g.log_variance) - g.log_variance - 1.0, axis=-1)
    return float(valor) if np.ndim(valor) == 0 else valor


def desglose_objetivo(X: np.ndarray, Xhat: np.ndarray, g: LatentGaussian,
                      div: DivergenceOperator, beta: float, lam: float) -> LossBreakdown:
    """
    Términos del objetivo a partir de las reconstrucciones

    Args:
        X: Estados escalados (B, 2N)
        Xhat: Reconstrucciones escaladas (L, B, 2N)
        g: Gaussianas latentes del lote
        div: Operador que da la divergencia física a partir de estados escalados
    """
    n_puntos = X.shape[1] // 2
    recon = -np.mean(np.sum((Xhat - X[None]) ** 2, axis=2), axis=0) / (4 * n_puntos)
    d = apply_divergence(div, Xhat.reshape(-1, X.shape[1]))
    divergencia = -np.mean(np.sum(d ** 2, axis=1).reshape(Xhat.shape[:2]), axis=0) / n_puntos
    kl = np.atleast_1d(kl_closed_form(g))
    total = recon + lam * divergencia - beta * kl
    return LossBreakdown(float(np.mean(recon)), float(np.mean(divergencia)), float(np.mean(kl)),
                         float(beta), float(lam), float(np.mean(total)))


def evaluar_objetivo(model: 'ScvaeModel', X: np.ndarray, Mm: np.ndarray, ruido: np.ndarray,
                     beta: float, lam: float, params: Optional[ParamStore] = None,
                     escala_lote: Optional[int] = None, gradiente: bool = True) -> LossBreakdown:
    """
    Evalúa el objetivo y acumula en `params` el gradiente de la pérdida
    -total / escala_lote (por defecto el tamaño del lote)

    Args:
        X: Estados escalados (B, 2N)
        Mm: Medidas escaladas (B, 2M)
        ruido: ε de forma (L, B, d)
        params: Almacén donde acumular (por defecto el del modelo)
    """
    params = params or model.params
    B, n_estado = X.shape
    L = ruido.shape[0]
    escala_lote = escala_lote or B
    n_puntos = n_estado // 2

    salidas, cinta_enc = model.encoder.forward(params, estado_a_tensor(model.grid, X))
    g = LatentGaussian(salidas['media'], salidas['logvar'])
    sigma = np.exp(0.5 * g.log_variance)
    Z = (g.mean[None] + sigma[None] * ruido).reshape(L * B, -1)
    M_rep = np.tile(Mm, (L, 1))
    T, cinta_dec = model.decoder.forward(params, Z, {ENTRADA_MEDIDAS: M_rep})
    Xhat = tensor_a_estado(model.grid, T).reshape(L, B, n_estado)

    desglose = desglose_objetivo(X, Xhat, g, model.div_escalada, beta, lam)
    if not gradiente:
        return desglose

    # ∂(-total)/∂x̂
    dXhat = -(X[None] - Xhat) / (2 * n_puntos)
    if lam > 0:
        d = apply_divergence(model.div_escalada, Xhat.reshape(L * B, n_estado))
        dXhat = dXhat + (2 * lam / n_puntos) * model.div_escalada.adjunto(d).reshape(L, B, n_estado)
    dXhat /= (L * escala_lote)

    dT = estado_a_tensor(model.grid, dXhat.reshape(L * B, n_estado))
    dZ, _ = model.decoder.backward(cinta_dec, dT)
    dZ = dZ.reshape(L, B, -1)

    dmu = dZ.sum(axis=0) + (beta / escala_lote) * g.mean
    dlogvar = (dZ * ruido).sum(axis=0) * 0.5 * sigma \
        + (beta / escala_lote) * 0.5 * (np.exp(g.log_variance) - 1.0)
    model.encoder.backward(cinta_enc, {'media': dmu, 'logvar': dlogvar})
    return desglose


def elbo(model: 'ScvaeModel', x: np.ndarray, m: np.ndarray, cfg: TrainConfig,
         ruido: Optional[np.ndarray] = None, beta: Optional[float] = None,
         lam: Optional[float] = None) -> LossBreakdown:
    """
    Desglose del objetivo para estados y medidas escalados (sin gradiente)

    Args:
        ruido: ε (L, B, d); si falta se extrae con la semilla de `cfg`
        beta, lam: Pesos; por defecto los iniciales de `cfg`. Con
            lambda_mode='off' λ es siempre 0
    """
    X = _estados(model, x)
    Mm = _medidas(model, m, X.shape[0])
    beta_ini, lam_ini = cfg.pesos_iniciales()
    beta = beta_ini if beta is None else beta
    lam = 0.0 if not cfg.lambda_activo else (lam_ini if lam is None else lam)
    if ruido is None:
        ruido = np.random.default_rng(cfg.seed).standard_normal(
            (cfg.mc_samples_L, X.shape[0], model.arquitectura.latent_dim))
    return evaluar_objetivo(model, X, Mm, ruido, beta, lam, gradiente=False)


def adaptive_weights(historial: Sequence[Dict[str, float]], cfg: TrainConfig) -> Tuple[float, float]:
    """
    Pesos (β, λ) a partir de las magnitudes de los términos en la última época

    Cada término t recibe el peso |recon| / |t|: el peso es inversamente
    proporcional a su fracción |t| / Σ|términos|, normalizado para que la
    reconstrucción conserve peso 1. Con magnitudes iguales todos los pesos
    valen 1. β se acota a [beta_min, beta_max] y λ a [lambda_min, lambda_max].

    Args:
        historial: Magnitudes por época con claves 'recon', 'kl' y 'div'
        cfg: Configuración (modos y cotas)
    """
    if not historial:
        raise ErrorValidacion("Se necesita al menos una época registrada")
    ultima = historial[-1]
    rec = abs(ultima['recon'])
    tiny = np.finfo(np.float64).tiny

    if cfg.beta_mode == 'adaptive':
        beta = float(np.clip(rec / max(abs(ultima['kl']), tiny), cfg.beta_min, cfg.beta_max))
    else:
        beta = cfg.beta
    if cfg.lambda_activo:
        lam = float(np.clip(rec / max(abs(ultima['div']), tiny), cfg.lambda_min, cfg.lambda_max))
    else:
        lam = 0.0
    return beta, lam


# ---------------------------------------------------------------------------
# Modelo
# ---------------------------------------------------------------------------

class ScvaeModel(ModeloBase):
    """
    SCVAE entrenable: arquitectura, parámetros, escalado y disposición

    Args:
        nombre: Nombre del modelo
        arquitectura: Arquitectura (se adapta la forma de entrada a la malla)
        train_config: Configuración de entrenamiento
        config: Opciones de predicción (`n_mc_prediccion`, `semilla_prediccion`)
    """

    def __init__(self, nombre: str = 'scvae', arquitectura: Optional[ScvaeArchitecture] = None,
                 train_config: Optional[TrainConfig] = None, config: Optional[Dict[str, Any]] = None):
        configuracion_default = {
            'n_mc_prediccion': 100,
            'semilla_prediccion': 0,
        }
        super().__init__(nombre, 'scvae', {**configuracion_default, **(config or {})})
        self.arquitectura = arquitectura
        self.train_config = train_config or TrainConfig()
        self.params: Optional[ParamStore] = None
        self.grid: Optional[Grid] = None
        self.escalado: Optional[ScalingParams] = None
        self.registro = pd.DataFrame(columns=COLUMNAS_REGISTRO)
        self.epoca_mejor: Optional[int] = None
        self.pesos: Tuple[float, float] = self.train_config.pesos_iniciales()

    @property
    def n_medidas(self) -> int:
        return 2 * self.layout.M

    @property
    def div_escalada(self) -> DivergenceOperator:
        return self._div_escalada

    def preparar(self, grid: Grid, layout: SensorLayout, escalado: Optional[ScalingParams] = None,
                 params: Optional[ParamStore] = None) -> None:
        """
        Construye las redes para una malla y disposición e inicializa (o
        carga) los parámetros
        """
        if self.arquitectura is None:
            raise ErrorValidacion("El modelo no tiene arquitectura")
        if tuple(self.arquitectura.input_shape) != (grid.nx, grid.ny, 2):
            raise ErrorValidacion(
                f"La arquitectura espera {self.arquitectura.input_shape}, la malla es ({grid.nx}, {grid.ny}, 2)"
            )
        self.grid = grid
        self.layout = layout
        self.operador_muestreo(grid)
        self.escalado = escalado or ScalingParams(0.0, 0.0, 1.0, 1.0)
        self._div_escalada = DivergenceOperator(grid).scaled(self.escalado)
        self.encoder, self.decoder = self.arquitectura.construir(self.n_medidas)

        if params is None:
            params = ParamStore()
            rng = np.random.default_rng(np.random.SeedSequence(self.train_config.seed).spawn(1)[0])
            self.encoder.inicializar(params, rng)
            self.decoder.inicializar(params, rng)
        else:
            esperado = ParamStore()
            self.encoder.inicializar(esperado, np.random.default_rng(0))
            self.decoder.inicializar(esperado, np.random.default_rng(0))
            for nombre in esperado:
                if nombre not in params or params[nombre].shape != esperado[nombre].shape:
                    raise ErrorValidacion(f"Parámetro ausente o con forma distinta: {nombre}")
        self.params = params

    # -- entrenamiento ------------------------------------------------------

    def entrenar(self, train: FlowSeries, validacion: FlowSeries, layout: SensorLayout) -> None:
        """Entrena con Adam por minilotes y parada temprana sobre validación"""
        cfg = self.train_config
        try:
            if len(train) == 0 or len(validacion) == 0:
                raise ErrorValidacion("Entrenamiento y validación no pueden estar vacíos")
            escalado = compute_scaling(train)
            self.preparar(train.grid, layout, escalado)
            op = self.operador_muestreo(self.grid)

            X_tr = scale_state(escalado, self.grid, self.accesos.leer(train, 'entrenamiento'))
            V_val = self.accesos.leer(validacion, 'seleccion')
            X_val = scale_state(escalado, self.grid, V_val)
            M_tr, M_val = X_tr[:, op.indices], X_val[:, op.indices]

            semillas = np.random.SeedSequence(cfg.seed).spawn(4)
            rng_orden = np.random.default_rng(semillas[1])
            rng_ruido = np.random.default_rng(semillas[2])
            ruido_val = np.random.default_rng(semillas[3]).standard_normal(
                (cfg.mc_samples_L, len(validacion), self.arquitectura.latent_dim))
            # Pesos de referencia del criterio de validación, fijos entre épocas
            pesos_val = cfg.pesos_iniciales()

            adam = AdamState(cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
            beta, lam = cfg.pesos_iniciales()
            historial: List[Dict[str, float]] = []
            filas = []
            mejor_valor, mejor_params, self.epoca_mejor = -np.inf, None, None
            sin_mejora = 0
            K = X_tr.shape[0]

            epocas = range(1, cfg.max_epochs + 1)
            if cfg.barra_progreso:
                epocas = tqdm(epocas, desc=f"Entrenando {self.nombre}")

            for epoca in epocas:
                orden = rng_orden.permutation(K)
                sumas = np.zeros(3)
                for inicio in range(0, K, cfg.batch_size):
                    idx = orden[inicio:inicio + cfg.batch_size]
                    ruido = rng_ruido.standard_normal((cfg.mc_samples_L, idx.size, self.arquitectura.latent_dim))
                    desglose = self._paso(X_tr[idx], M_tr[idx], ruido, beta, lam)
                    if not np.isfinite(desglose.total):
                        mensaje = f"Pérdida no finita en la época {epoca} (β={beta:.3g}, λ={lam:.3g})"
                        logger.error(mensaje)
                        raise ErrorNumerico(mensaje)
                    adam_step(adam, self.params)
                    sumas += idx.size * np.array([desglose.reconstruction_term, desglose.kl_term,
                                                  desglose.divergence_term])

                recon, kl, div = sumas / K
                valor_val = self._objetivo_por_bloques(X_val, M_val, ruido_val, *pesos_val).total
                if not np.isfinite(valor_val):
                    mensaje = f"Objetivo de validación no finito en la época {epoca}"
                    logger.error(mensaje)
                    raise ErrorNumerico(mensaje)
                filas.append({'epoch': epoca, 'recon': recon, 'kl': kl, 'div': div,
                              'beta': beta, 'lambda': lam, 'val_objective': valor_val})

                if valor_val > mejor_valor:
                    mejor_valor, mejor_params, self.epoca_mejor = valor_val, self.params.copia(), epoca
                    sin_mejora = 0
                else:
                    sin_mejora += 1

                if epoca % cfg.log_cada == 0 or epoca == 1:
                    logger.info(f"Época {epoca}: recon={recon:.4e} kl={kl:.4e} div={div:.4e} "
                                f"β={beta:.3g} λ={lam:.3g} val={valor_val:.4e}")

                historial.append({'recon': recon, 'kl': kl, 'div': div})
                beta, lam = adaptive_weights(historial, cfg)

                if sin_mejora >= cfg.patience:
                    logger.info(f"Parada temprana en la época {epoca} (mejor época {self.epoca_mejor})")
                    break

            self.params.cargar_valores(mejor_params)
            self.pesos = (beta, lam)
            self.registro = pd.DataFrame(filas, columns=COLUMNAS_REGISTRO)
            self.esta_entrenado = True
            self.fecha_ultimo_entrenamiento = datetime.now()
            self.metricas['validacion'] = self.evaluar(V_val[:, op.indices], validacion)
            self.metricas['epochs_trained'] = int(len(filas))
            self.metricas['best_epoch'] = int(self.epoca_mejor)
        except Exception as e:
            logger.error(f"Error entrenando SCVAE: {str(e)}")
            raise

    def _paso(self, X: np.ndarray, Mm: np.ndarray, ruido: np.ndarray,
              beta: float, lam: float) -> LossBreakdown:
        """Gradiente del minilote, repartido en fragmentos y reducido en orden"""
        n_frag = min(self.train_config.fragmentos, X.shape[0])
        if n_frag == 1:
            return evaluar_objetivo(self, X, Mm, ruido, beta, lam)

        trozos = np.array_split(np.arange(X.shape[0]), n_frag)
        vistas = [self.params.clon_gradientes() for _ in trozos]
        desgloses = Parallel(n_jobs=n_frag, prefer='threads')(
            delayed(evaluar_objetivo)(self, X[t], Mm[t], ruido[:, t], beta, lam, vista, X.shape[0])
            for t, vista in zip(trozos, vistas)
        )
        for vista in vistas:
            for nombre in self.params:
                self.params.acumular(nombre, vista.grads[nombre])
        pesos = np.array([t.size for t in trozos], dtype=np.float64) / X.shape[0]
        return _combinar(desgloses, pesos)

    def _objetivo_por_bloques(self, X: np.ndarray, Mm: np.ndarray, ruido: np.ndarray,
                              beta: float, lam: float) -> LossBreakdown:
        desgloses, pesos = [], []
        for inicio in range(0, X.shape[0], TAMANO_BLOQUE_EVALUACION):
            s = slice(inicio, inicio + TAMANO_BLOQUE_EVALUACION)
            desgloses.append(evaluar_objetivo(self, X[s], Mm[s], ruido[:, s], beta, lam, gradiente=False))
            pesos.append(X[s].shape[0])
        return _combinar(desgloses, np.array(pesos, dtype=np.float64) / X.shape[0])

    # -- predicción ---------------------------------------------------------

    def escalar_medidas(self, medidas: np.ndarray) -> np.ndarray:
        op = self.operador_muestreo(self.grid)
        centro, semiancho = self.escalado.vectores(self.grid)
        return (medidas - centro[op.indices]) / semiancho[op.indices]

    def predecir(self, medidas: np.ndarray) -> np.ndarray:
        """Media Monte Carlo de la predictiva para cada vector de medidas"""
        medidas = self.validar_medidas(medidas)
        n_mc = int(self.config['n_mc_prediccion'])
        eps = np.random.default_rng(self.config['semilla_prediccion']).standard_normal(
            (n_mc, self.arquitectura.latent_dim))
        return np.vstack([predict(self, m).draw_lote(eps).mean(axis=0) for m in medidas])

    def evaluar(self, medidas: np.ndarray, verdad: FlowSeries) -> Dict[str, float]:
        X = self.predecir(medidas)
        return {
            'mean_relative_error': relative_error(X, verdad.matriz()),
            'divergence_error': divergence_error(X, DivergenceOperator(self.grid)),
        }

    # -- persistencia -------------------------------------------------------

    def guardar(self, ruta: str) -> None:
        if not self.esta_entrenado:
            raise ErrorValidacion("No se puede guardar un modelo sin entrenar")
        cabecera = {
            'modelo': self.generar_metadata(),
            'arquitectura': self.arquitectura.a_dict(),
            'entrenamiento': self.train_config.a_dict(),
            'grid': self.grid.a_dict(),
            'escalado': self.escalado.a_dict(),
            'pesos': list(self.pesos),
            'epoca_mejor': self.epoca_mejor,
        }
        guardar_parametros(ruta, FORMATO_MODELO, cabecera, self.params)

    def cargar(self, ruta: str) -> None:
        cabecera, params = cargar_parametros(ruta, FORMATO_MODELO)
        for clave in ('modelo', 'arquitectura', 'grid', 'escalado'):
            if clave not in cabecera:
                raise ErrorValidacion(f"El archivo {ruta} no contiene un modelo SCVAE ('{clave}')")
        self.nombre = cabecera['modelo'].get('nombre', self.nombre)
        self.arquitectura = arquitectura_desde_dict(cabecera['arquitectura'])
        self.train_config = TrainConfig(**cabecera.get('entrenamiento', {}))
        self.config.update(cabecera['modelo'].get('config', {}))
        self.metricas = cabecera['modelo'].get('metricas', {})
        self.pesos = tuple(cabecera.get('pesos', self.train_config.pesos_iniciales()))
        self.epoca_mejor = cabecera.get('epoca_mejor')
        layout = SensorLayout(tuple(tuple(l) for l in cabecera['modelo']['layout']))
        self.preparar(Grid(**cabecera['grid']), layout, ScalingParams(**cabecera['escalado']), params)
        self.esta_entrenado = True
        logger.info(f"Modelo SCVAE cargado desde {ruta}")

    def generar_metadata(self) -> Dict[str, Any]:
        metadata = super().generar_metadata()
        metadata['epoca_mejor'] = self.epoca_mejor
        metadata['epochs_trained'] = int(len(self.registro))
        return metadata


def _combinar(desgloses: Sequence[LossBreakdown], pesos: np.ndarray) -> LossBreakdown:
    campos = np.array([[d.reconstruction_term, d.divergence_term, d.kl_term, d.total] for d in desgloses])
    recon, div, kl, total = pesos @ campos
    return LossBreakdown(float(recon), float(div), float(kl), desgloses[0].beta, desgloses[0].lam, float(total))


def train(splits: Tuple[FlowSeries, FlowSeries], layout: SensorLayout,
          arquitectura: ScvaeArchitecture, cfg: TrainConfig,
          nombre: str = 'scvae',
          accesos: Optional[RegistroAccesos] = None) -> Tuple[ScvaeModel, pd.DataFrame]:
    """
    Entrena un SCVAE

    Args:
        splits: (entrenamiento, validación), sin escalar
        layout: Disposición de sensores
        arquitectura: Arquitectura
        cfg: Configuración de entrenamiento
        accesos: Registro compartido para las lecturas de particiones

    Returns:
        (modelo con los parámetros de la mejor época, registro por época)
    """
    train_serie, validacion = splits[0], splits[1]
    modelo = ScvaeModel(nombre, arquitectura, cfg)
    if accesos is not None:
        modelo.accesos = accesos
    modelo.entrenar(train_serie, validacion, layout)
    return modelo, modelo.registro


class PredictiveDistribution:
    """
    Predictiva p(x | m) de un modelo entrenado para unas medidas fijas.
    Solo usa el decodificador.
    """

    def __init__(self, model: ScvaeModel, medidas: np.ndarray):
        self.model = model
        self.medidas = np.asarray(medidas, dtype=np.float64)
        self._escaladas = model.escalar_medidas(self.medidas)

    @property
    def latent_dim(self) -> int:
        return self.model.arquitectura.latent_dim

    @property
    def grid(self) -> Grid:
        return self.model.grid

    def draw(self, eps: np.ndarray) -> np.ndarray:
        """Estado desescalado (2N,) para un ε"""
        return self.draw_lote(np.asarray(eps, dtype=np.float64)[None, :])[0]

    def draw_lote(self, eps: np.ndarray) -> np.ndarray:
        """Estados desescalados (S, 2N) para ε de forma (S, d)"""
        eps = np.atleast_2d(np.asarray(eps, dtype=np.float64))
        salida = []
        for inicio in range(0, eps.shape[0], TAMANO_BLOQUE_EVALUACION):
            Z = eps[inicio:inicio + TAMANO_BLOQUE_EVALUACION]
            salida.append(decode(self.model, Z, self._escaladas))
        return unscale_state(self.model.escalado, self.model.grid, np.vstack(salida))


def predict(model: ScvaeModel, m: np.ndarray) -> PredictiveDistribution:
    """Distribución predictiva para medidas sin escalar (2M,)"""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (model.n_medidas,):
        raise ErrorValidacion(f"Las medidas deben tener longitud 2M={model.n_medidas} (recibido {m.shape})")
    return PredictiveDistribution(model, m)
