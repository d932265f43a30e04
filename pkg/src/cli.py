"""
Línea de comandos de flowrecon.

Subcomandos: gen, split, pod, gpod, train, predict, uq, eval, experiment y
verify. Todos leen y escriben series FRC1; cada ejecución deja un
`run_manifest.json` en `--out`.

Códigos de salida: 0 éxito, 2 error de validación, 3 fallo numérico.
"""

import argparse
import dataclasses
import json
import os
import sys
from typing import Any, Dict, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from .core.contenedor import (read_frc1, read_layout, read_measurements, write_frc1,
                              write_layout, write_measurements)
from .core.divergencia import DivergenceOperator
from .core.errores import ErrorNumerico, ErrorValidacion
from .core.escalado import compute_scaling, scale_state
from .core.logger import configurar_logging
from .core.malla import FlowSeries
from .core.muestreo import SamplingOperator, apply_sampling, random_layout
from .core.particion import MODOS, SplitSpec, split
from .sinteticos.generadores import TIPOS, FlowRecipe, default_grid, default_times, generate

logger = logging.getLogger(__name__)

PARTICIONES = ('train', 'validation', 'test')
PLAN_DEFAULT = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                            'config', 'experimento_default.json')
TOLERANCIA_GRADIENTES = 1e-4
CODIGO_VALIDACION = 2
CODIGO_NUMERICO = 3


# ---------------------------------------------------------------------------
# Utilidades
# ---------------------------------------------------------------------------

def _semilla(args) -> int:
    return 0 if args.seed is None else int(args.seed)


def _gestor(args, comando: str, config: Dict[str, Any]):
    from .mlops.mlops_manager import MLOpsManager

    mlops = MLOpsManager(args.out, config)
    mlops.iniciar_ejecucion(comando, {'seed': _semilla(args)})
    return mlops


def _leer_json(valor: str) -> Dict[str, Any]:
    """JSON en línea o ruta a un archivo JSON"""
    if os.path.exists(valor):
        with open(valor, 'r', encoding='utf-8') as f:
            return json.load(f)
    try:
        return json.loads(valor)
    except json.JSONDecodeError as e:
        raise ErrorValidacion(f"No es un archivo ni un JSON válido: {valor!r} ({e})")


def _es_division(ruta: str) -> bool:
    return all(os.path.exists(os.path.join(ruta, p, 'meta.json')) for p in PARTICIONES)


def _spec_division(args) -> SplitSpec:
    return SplitSpec(args.split_mode, args.test_fraction, args.val_fraction, _semilla(args))


def _particiones(args) -> Tuple[FlowSeries, FlowSeries, FlowSeries]:
    """
    Lee (train, validation, test) de un directorio creado por `split` o
    divide una serie FRC1 única con las opciones de división
    """
    if _es_division(args.data):
        return tuple(read_frc1(os.path.join(args.data, p)).etiquetada(p) for p in PARTICIONES)
    return split(read_frc1(args.data), _spec_division(args))


def _disposicion(args, grid):
    if args.sensors:
        return read_layout(args.sensors)
    if args.M is None:
        raise ErrorValidacion("Indique --sensors o --M")
    rng = np.random.default_rng(np.random.SeedSequence(_semilla(args)).spawn(1)[0])
    return random_layout(grid, args.M, rng)


def _medidas(layout, serie: FlowSeries) -> np.ndarray:
    return apply_sampling(SamplingOperator(layout, serie.grid), serie.matriz())


def _escribir_json(datos: Dict[str, Any], ruta: str, mlops=None) -> None:
    with open(ruta, 'w', encoding='utf-8') as f:
        json.dump(datos, f, indent=4, ensure_ascii=False, default=str)
    if mlops is not None:
        mlops.registrar_artefacto(ruta)


# ---------------------------------------------------------------------------
# Subcomandos
# ---------------------------------------------------------------------------

def comando_gen(args) -> None:
    receta = FlowRecipe(args.recipe, args.amplitude, tuple(args.wavenumbers),
                        args.phase_speed, _semilla(args), args.n_modes)
    serie = generate(receta, default_grid(args.nx, args.ny), default_times(args.steps, receta))
    mlops = _gestor(args, 'gen', {'recipe': dataclasses.asdict(receta), 'nx': args.nx,
                                  'ny': args.ny, 'steps': args.steps})
    write_frc1(serie, args.out)
    mlops.registrar_artefacto(args.out)
    mlops.guardar_manifiesto()


def comando_split(args) -> None:
    spec = _spec_division(args)
    mlops = _gestor(args, 'split', dataclasses.asdict(spec))
    serie = read_frc1(args.data)
    layout = read_layout(args.sensors) if args.sensors else None
    for nombre, parte in zip(PARTICIONES, split(serie, spec)):
        ruta = os.path.join(args.out, nombre)
        write_frc1(parte, ruta)
        mlops.registrar_artefacto(ruta)
        if layout is not None:
            ruta_medidas = os.path.join(args.out, f"{nombre}_medidas.csv")
            write_measurements(_medidas(layout, parte), ruta_medidas, parte.time_indices)
            mlops.registrar_artefacto(ruta_medidas)
    mlops.guardar_manifiesto()


def comando_pod(args) -> None:
    from .modelos.pod_gpod import compute_pod, guardar_base, projection_error

    mlops = _gestor(args, 'pod', {'r': args.r, 'mean_removed': args.mean_removed, 'solver': args.solver})
    if _es_division(args.data):
        train = read_frc1(os.path.join(args.data, 'train')).etiquetada('train')
    else:
        train = read_frc1(args.data)
    X_train = mlops.accesos.leer(train, 'entrenamiento')
    escalado = compute_scaling(train)
    escalada = FlowSeries.desde_matriz(train.grid, scale_state(escalado, train.grid, X_train),
                                       train.time_indices)
    base = compute_pod(escalada, args.r, args.mean_removed, args.solver, _semilla(args))

    os.makedirs(args.out, exist_ok=True)
    ruta = os.path.join(args.out, 'base.frcpod')
    guardar_base(base, ruta, {'grid': train.grid.a_dict(), 'escalado': escalado.a_dict()})
    mlops.registrar_artefacto(ruta)
    _escribir_json({
        'r': base.r,
        'singular_values': base.singular_values.tolist(),
        'projection_error_train': projection_error(base, escalada),
    }, os.path.join(args.out, 'pod_resumen.json'), mlops)
    mlops.guardar_manifiesto()


def comando_gpod(args) -> None:
    from .mlops.metricas import MetricasManager
    from .modelos.pod_gpod import ModeloGpod

    config = {'r_grid': args.r, 'r_max': args.r_max, 'lambda_grid': args.lam,
              'mean_removed': args.mean_removed, 'solver': args.solver, 'seed': _semilla(args)}
    mlops = _gestor(args, 'gpod', config)
    train, validacion, test = _particiones(args)
    layout = _disposicion(args, train.grid)

    modelo = ModeloGpod('gpod', config)
    modelo.accesos = mlops.accesos
    modelo.entrenar(train, validacion, layout)
    X_test = mlops.accesos.leer(test, 'evaluacion')
    medidas_test = apply_sampling(SamplingOperator(layout, test.grid), X_test)
    predicciones = modelo.predecir(medidas_test)

    os.makedirs(args.out, exist_ok=True)
    errores = MetricasManager().errores_por_instantanea(
        predicciones, X_test, DivergenceOperator(test.grid), test.time_indices)
    ruta_csv = os.path.join(args.out, 'gpod_errores.csv')
    errores.to_csv(ruta_csv, index=False, float_format='%.17g')
    mlops.registrar_artefacto(ruta_csv)
    modelo.metricas['test'] = modelo.evaluar(medidas_test, test)
    mlops.registrar_modelo(modelo, 'gpod')
    write_layout(layout, os.path.join(args.out, 'layout.json'))
    logger.info(f"GPOD: r={modelo.gpod_config.r}, λ={modelo.gpod_config.lam}, "
                f"error de prueba {modelo.metricas['test']['mean_relative_error']:.4e}")
    mlops.guardar_manifiesto()


def comando_train(args) -> None:
    from .modelos.arquitecturas import arquitectura_desde_dict
    from .modelos.scvae import TrainConfig, train

    cfg = TrainConfig(
        batch_size=args.batch_size, max_epochs=args.epochs, patience=args.patience,
        mc_samples_L=args.mc_samples, lambda_mode=args.lambda_mode, beta_mode=args.beta_mode,
        beta=args.beta, seed=_semilla(args), learning_rate=args.learning_rate,
        fragmentos=max(1, args.threads), barra_progreso=args.progress,
    )
    arquitectura_json = _leer_json(args.arch)
    mlops = _gestor(args, 'train', {'entrenamiento': cfg.a_dict(), 'arquitectura': arquitectura_json})
    train_serie, validacion, test = _particiones(args)
    layout = _disposicion(args, train_serie.grid)
    grid = train_serie.grid
    arquitectura = arquitectura_desde_dict(arquitectura_json, (grid.nx, grid.ny, 2))

    modelo, registro = train((train_serie, validacion), layout, arquitectura, cfg, accesos=mlops.accesos)
    modelo.config['n_mc_prediccion'] = args.nmc
    X_test = mlops.accesos.leer(test, 'evaluacion')
    modelo.metricas['test'] = modelo.evaluar(apply_sampling(SamplingOperator(layout, grid), X_test), test)

    os.makedirs(args.out, exist_ok=True)
    ruta_modelo = os.path.join(args.out, 'modelo.frc')
    modelo.guardar(ruta_modelo)
    mlops.registrar_artefacto(ruta_modelo)
    ruta_registro = os.path.join(args.out, 'registro_entrenamiento.csv')
    registro.to_csv(ruta_registro, index=False, float_format='%.17g')
    mlops.registrar_artefacto(ruta_registro)
    write_layout(layout, os.path.join(args.out, 'layout.json'))
    _escribir_json(modelo.metricas, os.path.join(args.out, 'metricas.json'), mlops)
    mlops.guardar_manifiesto()


def comando_predict(args) -> None:
    from .mlops.mlops_manager import cargar_modelo_archivo

    mlops = _gestor(args, 'predict', {'model': args.model, 'measurements': args.measurements})
    modelo = cargar_modelo_archivo(args.model)
    if args.nmc is not None and modelo.tipo == 'scvae':
        modelo.config['n_mc_prediccion'] = args.nmc
        modelo.config['semilla_prediccion'] = _semilla(args)
    medidas = read_measurements(args.measurements)
    serie = FlowSeries.desde_matriz(modelo.grid, modelo.predecir(medidas))
    write_frc1(serie, args.out)
    mlops.registrar_artefacto(args.out)
    mlops.guardar_manifiesto()


def comando_uq(args) -> None:
    from .incertidumbre.posterior import montage_csv, sample_fields, summarize, tabla_intervalos
    from .mlops.mlops_manager import cargar_modelo_archivo
    from .modelos.scvae import predict

    mlops = _gestor(args, 'uq', {'model': args.model, 'nmc': args.nmc, 'p': args.p,
                                 'samples': args.samples, 'row': args.row})
    modelo = cargar_modelo_archivo(args.model)
    if modelo.tipo != 'scvae':
        raise ErrorValidacion("La cuantificación de incertidumbre requiere un modelo SCVAE")
    medidas = read_measurements(args.measurements)
    if not 0 <= args.row < len(medidas):
        raise ErrorValidacion(f"--row fuera de rango: {args.row} (hay {len(medidas)} filas)")

    dist = predict(modelo, medidas[args.row])
    resumen = summarize(dist, args.nmc, _semilla(args))
    os.makedirs(args.out, exist_ok=True)

    ruta_media = os.path.join(args.out, 'media')
    write_frc1(FlowSeries.desde_matriz(modelo.grid, resumen.mean, [args.row]), ruta_media)
    mlops.registrar_artefacto(ruta_media)
    ruta_intervalos = os.path.join(args.out, 'intervalos.csv')
    tabla_intervalos(resumen, modelo.grid, args.p).to_csv(ruta_intervalos, index=False, float_format='%.17g')
    mlops.registrar_artefacto(ruta_intervalos)
    ruta_montaje = os.path.join(args.out, 'montaje.csv')
    montage_csv(sample_fields(dist, args.samples, _semilla(args)), ruta_montaje)
    mlops.registrar_artefacto(ruta_montaje)

    if args.truth:
        verdad = read_frc1(args.truth)
        if verdad.grid != modelo.grid or args.row >= len(verdad):
            raise ErrorValidacion("La verdad no es compatible con el modelo o con --row")
        X_verdad = mlops.accesos.leer(verdad.etiquetada('truth'), 'error_absoluto')
        error = np.abs(resumen.mean - X_verdad[args.row])
        n = modelo.grid.n_puntos
        X, Y = np.meshgrid(np.arange(modelo.grid.nx), np.arange(modelo.grid.ny))
        ruta_error = os.path.join(args.out, 'error_absoluto.csv')
        pd.DataFrame({'j': Y.ravel(), 'i': X.ravel(), 'u': error[:n], 'v': error[n:]}).to_csv(
            ruta_error, index=False, float_format='%.17g')
        mlops.registrar_artefacto(ruta_error)
    mlops.guardar_manifiesto()


def comando_eval(args) -> None:
    from .mlops.metricas import MetricasManager

    mlops = _gestor(args, 'eval', {'pred': args.pred, 'truth': args.truth})
    prediccion, verdad = read_frc1(args.pred), read_frc1(args.truth)
    if prediccion.grid != verdad.grid or len(prediccion) != len(verdad):
        raise ErrorValidacion("Predicción y verdad deben compartir malla y número de instantáneas")
    metricas = MetricasManager()
    div = DivergenceOperator(verdad.grid)
    resultado = metricas.calcular_metricas_reconstruccion(prediccion.matriz(), verdad.matriz(), div)
    os.makedirs(args.out, exist_ok=True)
    _escribir_json(resultado, os.path.join(args.out, 'evaluacion.json'), mlops)
    ruta_csv = os.path.join(args.out, 'errores_por_instantanea.csv')
    metricas.errores_por_instantanea(prediccion.matriz(), verdad.matriz(), div, verdad.time_indices).to_csv(
        ruta_csv, index=False, float_format='%.17g')
    mlops.registrar_artefacto(ruta_csv)
    print(json.dumps(resultado, indent=4))
    mlops.guardar_manifiesto()


def comando_experiment(args) -> None:
    from .mlops.experimentos import ExperimentPlan, run_experiment

    with open(args.plan, 'r', encoding='utf-8') as f:
        plan_dict = json.load(f)
    if args.seed is not None:
        plan_dict['seed'] = int(args.seed)
    resultado = run_experiment(ExperimentPlan.desde_dict(plan_dict), args.out, args.threads)
    if resultado.fallos:
        logger.warning(f"{len(resultado.fallos)} celdas fallaron; ver run_manifest.json")


def comprobar_gradientes_diminuta(semilla: int = 0) -> Dict[str, float]:
    """
    Diferencias centrales sobre la arquitectura diminuta (codificador y
    decodificador con medidas concatenadas)

    Returns:
        Error relativo máximo por red
    """
    from .modelos.arquitecturas import ENTRADA_MEDIDAS, diminuta
    from .red.parametros import ParamStore
    from .red.red import check_gradients

    arquitectura = diminuta()
    n_medidas = 6
    codificador, decodificador = arquitectura.construir(n_medidas)
    params = ParamStore()
    rng = np.random.default_rng(semilla)
    codificador.inicializar(params, rng)
    decodificador.inicializar(params, rng)

    x = rng.standard_normal((2, *arquitectura.input_shape))
    h, _ = codificador.tronco.forward(params, x)
    m = {ENTRADA_MEDIDAS: rng.standard_normal((2, n_medidas))}
    z = rng.standard_normal((2, arquitectura.latent_dim))

    redes = {'encoder': (codificador.tronco, x, None), 'decoder': (decodificador, z, m)}
    for nombre, rama in codificador.ramas.items():
        redes[f"encoder.{nombre}"] = (rama, h, None)

    errores = {}
    for nombre, (red, entrada, aux) in redes.items():
        por_tensor = check_gradients(red, params, entrada, aux, rng=np.random.default_rng(semilla))
        errores[nombre] = max(por_tensor.values())
    return errores


def comando_verify(args) -> None:
    from .mlops.experimentos import verify

    ruta = args.run or args.out
    informe: Dict[str, Any] = {}
    if args.gradients:
        errores = comprobar_gradientes_diminuta(_semilla(args))
        informe['gradientes'] = errores
        for nombre, error in errores.items():
            logger.info(f"Gradientes {nombre}: error relativo {error:.3e}")
        if max(errores.values()) > TOLERANCIA_GRADIENTES:
            raise ErrorNumerico(f"Gradientes fuera de tolerancia: {errores}")
    if not args.gradients or args.run:
        resultado = verify(ruta, args.tolerance)
        informe['metricas'] = resultado
        if not resultado['ok']:
            raise ErrorNumerico(f"Métricas no reproducibles: {resultado['discrepancias'][:5]}")
    print(json.dumps(informe, indent=4, default=str))


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def _opciones_division(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--split-mode', choices=MODOS, default='sequential')
    parser.add_argument('--test-fraction', type=float, default=0.15)
    parser.add_argument('--val-fraction', type=float, default=0.30)


def _opciones_sensores(parser: argparse.ArgumentParser) -> None:
    parser.add_argument('--sensors', help="JSON {\"locations\": [[i, j], ...]}")
    parser.add_argument('--M', type=int, help="Sensores aleatorios si no se da --sensors")


def crear_parser() -> argparse.ArgumentParser:
    global_ = argparse.ArgumentParser(add_help=False)
    global_.add_argument('--seed', type=int, default=None, help="Semilla raíz (0 por defecto)")
    global_.add_argument('--threads', type=int, default=1, help="Hilos de trabajo")
    global_.add_argument('--out', default='salida', help="Directorio de salida")
    global_.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'])

    parser = argparse.ArgumentParser(
        prog='flowrecon',
        description="Reconstrucción de campos de velocidad desde sensores dispersos (SCVAE y GPOD)",
    )
    sub = parser.add_subparsers(dest='comando', required=True)

    p = sub.add_parser('gen', parents=[global_], help="Genera datos sintéticos FRC1")
    p.add_argument('--recipe', choices=TIPOS, default='traveling_vortices')
    p.add_argument('--nx', type=int, default=64)
    p.add_argument('--ny', type=int, default=32)
    p.add_argument('--steps', type=int, default=2000)
    p.add_argument('--amplitude', type=float, default=1.0)
    p.add_argument('--wavenumbers', type=int, nargs=2, default=[1, 1])
    p.add_argument('--phase-speed', type=float, default=1.0)
    p.add_argument('--n-modes', type=int, default=8)
    p.set_defaults(func=comando_gen)

    p = sub.add_parser('split', parents=[global_], help="Divide una serie en train/validation/test")
    p.add_argument('--data', required=True)
    p.add_argument('--sensors', help="Escribe también las medidas de cada partición")
    _opciones_division(p)
    p.set_defaults(func=comando_split)

    p = sub.add_parser('pod', parents=[global_], help="Calcula una base POD")
    p.add_argument('--data', required=True)
    p.add_argument('--r', type=int, required=True)
    p.add_argument('--mean-removed', action='store_true')
    p.add_argument('--solver', choices=['svd', 'randomized'], default='svd')
    p.set_defaults(func=comando_pod)

    p = sub.add_parser('gpod', parents=[global_], help="Reconstrucción GPOD con selección de (r, λ)")
    p.add_argument('--data', required=True)
    _opciones_sensores(p)
    p.add_argument('--r', type=int, nargs='+', help="Valores de r; por defecto 1..r-max")
    p.add_argument('--r-max', type=int, default=20)
    p.add_argument('--lambda', dest='lam', type=float, nargs='+', default=[0.0])
    p.add_argument('--mean-removed', action='store_true')
    p.add_argument('--solver', choices=['svd', 'randomized'], default='svd')
    _opciones_division(p)
    p.set_defaults(func=comando_gpod)

    p = sub.add_parser('train', parents=[global_], help="Entrena un SCVAE")
    p.add_argument('--data', required=True)
    _opciones_sensores(p)
    p.add_argument('--arch', default='{"preset": "compacta"}', help="JSON o archivo JSON")
    p.add_argument('--lambda-mode', choices=['off', 'adaptive'], default='off')
    p.add_argument('--beta-mode', choices=['fixed', 'adaptive'], default='adaptive')
    p.add_argument('--beta', type=float, default=1.0)
    p.add_argument('--epochs', type=int, default=500)
    p.add_argument('--batch-size', type=int, default=32)
    p.add_argument('--patience', type=int, default=50)
    p.add_argument('--mc-samples', type=int, default=1)
    p.add_argument('--learning-rate', type=float, default=1e-3)
    p.add_argument('--nmc', type=int, default=100, help="Muestras de la media predictiva")
    p.add_argument('--progress', action='store_true', help="Barra de progreso por épocas")
    _opciones_division(p)
    p.set_defaults(func=comando_train)

    p = sub.add_parser('predict', parents=[global_], help="Reconstruye campos desde medidas")
    p.add_argument('--model', required=True)
    p.add_argument('--measurements', required=True)
    p.add_argument('--nmc', type=int, default=None)
    p.set_defaults(func=comando_predict)

    p = sub.add_parser('uq', parents=[global_], help="Media, intervalos y muestras de la predictiva")
    p.add_argument('--model', required=True)
    p.add_argument('--measurements', required=True)
    p.add_argument('--row', type=int, default=0, help="Fila del CSV de medidas")
    p.add_argument('--nmc', type=int, default=100)
    p.add_argument('--p', type=float, default=0.95)
    p.add_argument('--samples', type=int, default=9)
    p.add_argument('--truth', help="Serie FRC1 para exportar |media - verdad|")
    p.set_defaults(func=comando_uq)

    p = sub.add_parser('eval', parents=[global_], help="Errores relativo y de divergencia")
    p.add_argument('--pred', required=True)
    p.add_argument('--truth', required=True)
    p.set_defaults(func=comando_eval)

    p = sub.add_parser('experiment', parents=[global_], help="Ejecuta un plan de experimento")
    p.add_argument('--plan', default=PLAN_DEFAULT)
    p.set_defaults(func=comando_experiment)

    p = sub.add_parser('verify', parents=[global_], help="Recalcula métricas y comprueba gradientes")
    p.add_argument('--run', help="Directorio del experimento (por defecto --out)")
    p.add_argument('--tolerance', type=float, default=1e-10)
    p.add_argument('--gradients', action='store_true')
    p.set_defaults(func=comando_verify)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = crear_parser().parse_args(argv)
    configurar_logging(args.log_level)
    try:
        args.func(args)
        return 0
    except ErrorValidacion as e:
        logger.error(f"Error de validación: {str(e)}")
        return CODIGO_VALIDACION
    except ErrorNumerico as e:
        logger.error(f"Fallo numérico: {str(e)}")
        return CODIGO_NUMERICO


if __name__ == '__main__':
    sys.exit(main())
