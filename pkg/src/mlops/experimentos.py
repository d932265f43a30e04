"""
Experimentos comparativos GPOD / SCVAE sobre familias de sensores anidadas.

Cada celda (método, familia de disposiciones, M, repetición) entrena un
modelo con las particiones de entrenamiento y validación y se evalúa sobre
la partición de prueba. La selección entre repeticiones solo consulta el
error de validación.
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import json
import os
import warnings

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from ..core.accesos import RegistroAccesos
from ..core.contenedor import read_frc1, write_layout
from ..core.divergencia import DivergenceOperator
from ..core.errores import AdvertenciaRangoDeficiente, ErrorValidacion
from ..core.logger import Logger
from ..core.malla import FlowSeries
from ..core.muestreo import SamplingOperator, SensorLayout, nested_layouts
from ..core.particion import SplitSpec, split
from ..sinteticos.generadores import FlowRecipe, default_grid, default_times, generate
from .metricas import MetricasManager, divergence_error, relative_error
from .mlops_manager import MLOpsManager

METODOS = ('scvae_l0', 'scvae_lpos', 'gpod_l0', 'gpod_lpos')
MODO_LAMBDA = {'scvae_l0': 'off', 'scvae_lpos': 'adaptive', 'gpod_l0': 'off', 'gpod_lpos': 'grid'}
AGREGACIONES = ('mejor_validacion', 'media_repeticiones')
METRICAS = ('mean_relative_error', 'divergence_error')
COLUMNAS_FILAS = [
    'method', 'lambda_mode', 'layout', 'M', 'repeat',
    'mean_relative_error', 'divergence_error', 'validation_error',
    'epochs_trained', 'best_epoch', 'cell',
]
FORMATO_CSV = '%.17g'

ARCHIVO_FILAS = 'metricas.csv'
ARCHIVO_AGREGADOS = 'agregados.csv'
ARCHIVO_BOXPLOT = 'boxplot_long.csv'
ARCHIVO_RESUMEN = 'resumen.csv'
ARCHIVO_COMPARACION = 'comparacion_regularizacion.json'


@dataclass(frozen=True)
class ExperimentPlan:
    """
    Plan de experimento

    Los datos se leen de `datos` (FRC1) o se generan con `recipe` sobre una
    malla nx × ny con `steps` instantáneas. Se dibujan `n_layouts` familias
    anidadas con los tamaños de `tamanos`, o se usan `layouts` explícitas
    (lista de listas de coordenadas, la primera la mayor).
    """

    recipe: FlowRecipe = field(default_factory=FlowRecipe)
    datos: Optional[str] = None
    nx: int = 64
    ny: int = 32
    steps: int = 2000
    split: SplitSpec = field(default_factory=SplitSpec)
    tamanos: Tuple[int, ...] = (5, 3, 2)
    n_layouts: int = 1
    layouts: Optional[Tuple[Tuple[Tuple[int, int], ...], ...]] = None
    methods: Tuple[str, ...] = METODOS
    repeats: int = 3
    seed: int = 0
    arquitectura: Dict[str, Any] = field(default_factory=lambda: {'preset': 'compacta'})
    entrenamiento: Dict[str, Any] = field(default_factory=dict)
    gpod: Dict[str, Any] = field(default_factory=lambda: {
        'r_max': 20, 'lambda_grid': [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0],
    })
    n_mc: int = 100

    def __post_init__(self):
        if self.repeats < 1:
            raise ErrorValidacion(f"repeats debe ser >= 1 (recibido {self.repeats})")
        if not self.methods or any(m not in METODOS for m in self.methods):
            raise ErrorValidacion(f"Métodos inválidos: {self.methods}; disponibles {METODOS}")
        if self.layouts is not None:
            if not self.layouts:
                raise ErrorValidacion("La lista de disposiciones no puede estar vacía")
        elif not self.tamanos or self.n_layouts < 1:
            raise ErrorValidacion("Se necesita al menos un tamaño y una familia de disposiciones")
        object.__setattr__(self, 'tamanos', tuple(int(t) for t in self.tamanos))
        object.__setattr__(self, 'methods', tuple(self.methods))

    @classmethod
    def desde_dict(cls, d: Dict[str, Any]) -> 'ExperimentPlan':
        d = dict(d)
        if 'recipe' in d:
            receta = dict(d['recipe'])
            if 'wavenumbers' in receta:
                receta['wavenumbers'] = tuple(receta['wavenumbers'])
            d['recipe'] = FlowRecipe(**receta)
        if 'split' in d:
            d['split'] = SplitSpec(**d['split'])
        if d.get('layouts') is not None:
            d['layouts'] = tuple(tuple(tuple(loc) for loc in capa) for capa in d['layouts'])
        for clave in ('tamanos', 'methods'):
            if clave in d:
                d[clave] = tuple(d[clave])
        return cls(**d)

    @classmethod
    def desde_json(cls, ruta: str) -> 'ExperimentPlan':
        with open(ruta, 'r', encoding='utf-8') as f:
            return cls.desde_dict(json.load(f))

    def a_dict(self) -> Dict[str, Any]:
        return json.loads(json.dumps(asdict(self), default=list))


@dataclass
class ResultadoExperimento:
    filas: pd.DataFrame
    agregados: pd.DataFrame
    resumen: pd.DataFrame
    comparacion: Optional[Dict[str, Any]]
    fallos: List[Dict[str, str]]


def _semilla_celda(raiz: int, *claves: int) -> int:
    return int(np.random.SeedSequence([int(raiz), *[int(c) for c in claves]]).generate_state(1)[0])


def _ejecutar_celda(celda: Dict[str, Any], train: FlowSeries, validacion: FlowSeries,
                    test: FlowSeries, plan: ExperimentPlan) -> Dict[str, Any]:
    """
    Entrena y evalúa una celda; los errores se devuelven en lugar de propagarse
    """
    from ..modelos.arquitecturas import arquitectura_desde_dict
    from ..modelos.pod_gpod import ModeloGpod
    from ..modelos.scvae import ScvaeModel, TrainConfig

    metodo, layout = celda['method'], celda['layout_obj']
    accesos = RegistroAccesos(celda['cell'])
    try:
        grid = train.grid
        if metodo.startswith('gpod'):
            config = {'r_max': plan.gpod.get('r_max', 20), 'seed': celda['seed']}
            if metodo == 'gpod_l0':
                config.update({'lambda_grid': [0.0], 'limitar_r_a_medidas': True})
            else:
                config.update({'lambda_grid': list(plan.gpod['lambda_grid']), 'limitar_r_a_medidas': False})
            modelo = ModeloGpod(celda['cell'], config)
            modelo.accesos = accesos
            with warnings.catch_warnings():
                warnings.simplefilter('ignore', AdvertenciaRangoDeficiente)
                modelo.entrenar(train, validacion, layout)
        else:
            cfg = TrainConfig(**{
                **plan.entrenamiento,
                'lambda_mode': MODO_LAMBDA[metodo],
                'seed': celda['seed'],
            })
            arquitectura = arquitectura_desde_dict(plan.arquitectura, (grid.nx, grid.ny, 2))
            modelo = ScvaeModel(celda['cell'], arquitectura, cfg,
                                {'n_mc_prediccion': plan.n_mc, 'semilla_prediccion': celda['seed']})
            modelo.accesos = accesos
            modelo.entrenar(train, validacion, layout)

        op = SamplingOperator(layout, grid)
        X_test = accesos.leer(test, 'evaluacion')
        predicciones = modelo.predecir(X_test[:, op.indices])
        fila = {
            'method': metodo,
            'lambda_mode': MODO_LAMBDA[metodo],
            'layout': celda['layout_id'],
            'M': layout.M,
            'repeat': celda['repeat'],
            'mean_relative_error': relative_error(predicciones, X_test),
            'divergence_error': divergence_error(predicciones, DivergenceOperator(grid)),
            'validation_error': modelo.metricas['validacion']['mean_relative_error'],
            'epochs_trained': modelo.metricas.get('epochs_trained', 0),
            'best_epoch': modelo.metricas.get('best_epoch', 0),
            'cell': celda['cell'],
        }
        return {'fila': fila, 'predicciones': predicciones, 'modelo': modelo, 'error': None,
                'accesos': accesos.entradas}
    except Exception as e:
        return {'fila': None, 'predicciones': None, 'modelo': None, 'error': f"{type(e).__name__}: {e}",
                'accesos': accesos.entradas}


def agregar_repeticiones(filas: pd.DataFrame) -> pd.DataFrame:
    """
    Dos agregaciones por (método, disposición, M): el modelo con menor error
    de validación entre repeticiones (empates: repetición menor) y la media
    de las repeticiones
    """
    if filas.empty:
        return pd.DataFrame(columns=['aggregation', 'method', 'lambda_mode', 'layout', 'M', *METRICAS])
    claves = ['method', 'lambda_mode', 'layout', 'M']
    ordenadas = filas.sort_values(claves + ['validation_error', 'repeat'], kind='mergesort')
    mejor = ordenadas.groupby(claves, sort=True).head(1)[claves + list(METRICAS)]
    mejor.insert(0, 'aggregation', 'mejor_validacion')
    media = filas.groupby(claves, sort=True)[list(METRICAS)].mean().reset_index()
    media.insert(0, 'aggregation', 'media_repeticiones')
    return pd.concat([mejor, media], ignore_index=True).sort_values(
        ['aggregation'] + claves, kind='mergesort').reset_index(drop=True)


def formato_largo(agregados: pd.DataFrame) -> pd.DataFrame:
    """Tabla larga para diagramas de caja: una fila por valor y métrica"""
    if agregados.empty:
        return pd.DataFrame(columns=['aggregation', 'method', 'lambda_mode', 'M', 'layout', 'metric', 'value'])
    largo = agregados.melt(
        id_vars=['aggregation', 'method', 'lambda_mode', 'M', 'layout'],
        value_vars=list(METRICAS), var_name='metric', value_name='value',
    )
    return largo.sort_values(['aggregation', 'metric', 'method', 'M', 'layout'], kind='mergesort').reset_index(drop=True)


def comparar_regularizacion(agregados: pd.DataFrame) -> Optional[Dict[str, Any]]:
    """
    Compara la dispersión de errores SCVAE con y sin regularización de
    divergencia (mejor modelo en validación), por número de sensores
    """
    mejor = agregados[agregados['aggregation'] == 'mejor_validacion']
    metodos = set(mejor['method'])
    if not {'scvae_l0', 'scvae_lpos'} <= metodos:
        return None

    comparacion = {'por_M': [], 'metrica': 'mean_relative_error'}
    for M in sorted(set(mejor['M'])):
        l0 = mejor[(mejor['method'] == 'scvae_l0') & (mejor['M'] == M)]['mean_relative_error'].to_numpy()
        lpos = mejor[(mejor['method'] == 'scvae_lpos') & (mejor['M'] == M)]['mean_relative_error'].to_numpy()
        if min(l0.size, lpos.size) < 2:
            continue
        std_l0, std_lpos = float(np.std(l0, ddof=1)), float(np.std(lpos, ddof=1))
        cumple = std_lpos <= std_l0
        comparacion['por_M'].append({
            'M': int(M),
            'n_disposiciones': int(min(l0.size, lpos.size)),
            'std_l0': std_l0,
            'std_lpos': std_lpos,
            'media_l0': float(np.mean(l0)),
            'media_lpos': float(np.mean(lpos)),
            'menor_variacion_con_regularizacion': cumple,
            'desviacion_documentada': None if cumple else
                'La regularización de divergencia no redujo la dispersión de errores en esta ejecución',
        })
    return comparacion if comparacion['por_M'] else None


class GestorExperimentos:
    """Ejecuta planes de experimento y persiste sus artefactos"""

    def __init__(self, ruta_salida: str, hilos: int = 1):
        self.logger = Logger('experimentos')
        self.ruta_salida = ruta_salida
        self.hilos = int(hilos)
        self.metricas = MetricasManager()

    def preparar_datos(self, plan: ExperimentPlan) -> FlowSeries:
        if plan.datos:
            return read_frc1(plan.datos)
        grid = default_grid(plan.nx, plan.ny)
        return generate(plan.recipe, grid, default_times(plan.steps, plan.recipe))

    def disposiciones(self, plan: ExperimentPlan, grid) -> List[List[SensorLayout]]:
        """Familias anidadas, cada una ordenada de mayor a menor"""
        if plan.layouts is not None:
            mayor = SensorLayout(plan.layouts[0])
            familia = [SensorLayout(l) for l in plan.layouts]
            for capa in familia:
                if capa.locations != mayor.locations[:capa.M]:
                    raise ErrorValidacion("Las disposiciones explícitas deben ser prefijos de la primera")
            return [familia]
        rng = np.random.default_rng(np.random.SeedSequence(plan.seed).spawn(1)[0])
        tamanos = sorted(set(plan.tamanos), reverse=True)
        return [nested_layouts(grid, tamanos, rng) for _ in range(plan.n_layouts)]

    def celdas(self, plan: ExperimentPlan, familias: List[List[SensorLayout]]) -> List[Dict[str, Any]]:
        celdas = []
        for f, familia in enumerate(familias):
            for layout in familia:
                for k, metodo in enumerate(plan.methods):
                    repeticiones = plan.repeats if metodo.startswith('scvae') else 1
                    for r in range(repeticiones):
                        celdas.append({
                            'method': metodo,
                            'layout_id': f,
                            'layout_obj': layout,
                            'repeat': r,
                            'seed': _semilla_celda(plan.seed, f, layout.M, k, r),
                            'cell': f"{metodo}_L{f:02d}_M{layout.M}_r{r}",
                        })
        return celdas

    def run_experiment(self, plan: ExperimentPlan) -> ResultadoExperimento:
        """
        Ejecuta todas las celdas del plan y escribe tablas, predicciones y manifiesto
        """
        mlops = MLOpsManager(self.ruta_salida, plan.a_dict())
        mlops.iniciar_ejecucion('experiment', {'plan': plan.seed, 'split': plan.split.seed})
        try:
            serie = self.preparar_datos(plan)
            train, validacion, test = split(serie, plan.split)
            familias = self.disposiciones(plan, serie.grid)
            for f, familia in enumerate(familias):
                write_layout(familia[0], os.path.join(self.ruta_salida, f"layout_{f:02d}.json"))
            celdas = self.celdas(plan, familias)
            self.logger.info(f"Experimento con {len(celdas)} celdas en {self.hilos} hilos",
                             extra={'K': len(serie), 'train': len(train), 'val': len(validacion), 'test': len(test)})

            resultados = Parallel(n_jobs=self.hilos)(
                delayed(_ejecutar_celda)(c, train, validacion, test, plan) for c in celdas
            )

            filas = []
            for celda, resultado in zip(celdas, resultados):
                mlops.accesos.extender(resultado['accesos'])
                if resultado['error'] is not None:
                    with self.logger.contexto(celda=celda['cell'], metodo=celda['method'], M=celda['layout_obj'].M):
                        self.logger.warning(f"Celda fallida: {resultado['error']}")
                    mlops.registrar_fallo(celda['cell'], resultado['error'])
                    continue
                filas.append(resultado['fila'])
                mlops.registrar_modelo(resultado['modelo'], celda['cell'])
                mlops.guardar_predicciones(celda['cell'], serie.grid, resultado['predicciones'], test)

            tabla = pd.DataFrame(filas, columns=COLUMNAS_FILAS)
            agregados = agregar_repeticiones(tabla)
            resumen = self.metricas.resumir(agregados, ['aggregation', 'method', 'M'])
            comparacion = comparar_regularizacion(agregados)

            self._escribir_csv(tabla, ARCHIVO_FILAS, mlops)
            self._escribir_csv(agregados, ARCHIVO_AGREGADOS, mlops)
            self._escribir_csv(formato_largo(agregados), ARCHIVO_BOXPLOT, mlops)
            self._escribir_csv(resumen, ARCHIVO_RESUMEN, mlops)
            if comparacion is not None:
                ruta = os.path.join(self.ruta_salida, ARCHIVO_COMPARACION)
                with open(ruta, 'w', encoding='utf-8') as f:
                    json.dump(comparacion, f, indent=4, ensure_ascii=False)
                mlops.registrar_artefacto(ruta)

            self.logger.info(f"Experimento terminado: {len(filas)} filas, {len(mlops.manifiesto['fallos'])} fallos")
            return ResultadoExperimento(tabla, agregados, resumen, comparacion, list(mlops.manifiesto['fallos']))
        except Exception as e:
            self.logger.error(f"Error ejecutando experimento: {str(e)}")
            raise
        finally:
            mlops.guardar_manifiesto()

    def _escribir_csv(self, tabla: pd.DataFrame, nombre: str, mlops: MLOpsManager) -> None:
        ruta = os.path.join(self.ruta_salida, nombre)
        tabla.to_csv(ruta, index=False, float_format=FORMATO_CSV)
        mlops.registrar_artefacto(ruta)


def run_experiment(plan: ExperimentPlan, ruta_salida: str, hilos: int = 1) -> ResultadoExperimento:
    return GestorExperimentos(ruta_salida, hilos).run_experiment(plan)


def verify(ruta_salida: str, tolerancia: float = 1e-10) -> Dict[str, Any]:
    """
    Recalcula las métricas de `metricas.csv` a partir de las predicciones
    persistidas

    Returns:
        Diccionario con filas verificadas, diferencia máxima, discrepancias y ok
    """
    ruta_tabla = os.path.join(ruta_salida, ARCHIVO_FILAS)
    if not os.path.exists(ruta_tabla):
        raise ErrorValidacion(f"No existe {ruta_tabla}")
    tabla = pd.read_csv(ruta_tabla)
    mlops = MLOpsManager(ruta_salida)

    maxima, discrepancias = 0.0, []
    for fila in tabla.itertuples(index=False):
        prediccion, verdad = mlops.cargar_predicciones(fila.cell)
        P, T = prediccion.matriz(), verdad.matriz()
        recalculado = {
            'mean_relative_error': relative_error(P, T),
            'divergence_error': divergence_error(P, DivergenceOperator(verdad.grid)),
        }
        for metrica, valor in recalculado.items():
            diferencia = abs(valor - getattr(fila, metrica))
            maxima = max(maxima, diferencia)
            if diferencia > tolerancia:
                discrepancias.append({'cell': fila.cell, 'metrica': metrica, 'diferencia': diferencia})

    resultado = {
        'filas_verificadas': int(len(tabla)),
        'diferencia_maxima': maxima,
        'discrepancias': discrepancias,
        'ok': not discrepancias,
    }
    Logger('experimentos').info(f"Verificación de {len(tabla)} filas: diferencia máxima {maxima:.3e}", extra={'ok': resultado['ok']})
    return resultado
