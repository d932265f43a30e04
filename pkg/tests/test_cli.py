import unittest
import os
import json
import shutil
import tempfile
from contextlib import redirect_stdout
from io import StringIO

import numpy as np
import pandas as pd

from config.crear_directorios import crear_estructura_proyecto, limpiar_directorios_temp
from src.cli import main
from src.core.contenedor import read_frc1, read_measurements, write_layout
from src.core.muestreo import SensorLayout


def ejecutar(*argv):
    """Ejecuta la CLI capturando la salida estándar"""
    salida = StringIO()
    with redirect_stdout(salida):
        codigo = main([str(a) for a in argv])
    return codigo, salida.getvalue()


class TestCli(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.temp = tempfile.mkdtemp()
        cls.serie = os.path.join(cls.temp, 'serie')
        cls.division = os.path.join(cls.temp, 'division')
        cls.sensores = os.path.join(cls.temp, 'sensores.json')
        write_layout(SensorLayout(((1, 1), (4, 5), (6, 2))), cls.sensores)
        codigo, _ = ejecutar('gen', '--nx', 8, '--ny', 8, '--steps', 60, '--seed', 3, '--out', cls.serie)
        assert codigo == 0
        codigo, _ = ejecutar('split', '--data', cls.serie, '--sensors', cls.sensores, '--out', cls.division)
        assert codigo == 0

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.temp, ignore_errors=True)

    def ruta(self, nombre):
        return os.path.join(self.temp, nombre)

    def test_gen_y_split(self):
        serie = read_frc1(self.serie)
        self.assertEqual((serie.grid.nx, serie.grid.ny, len(serie)), (8, 8, 60))
        partes = [read_frc1(os.path.join(self.division, p)) for p in ('train', 'validation', 'test')]
        self.assertEqual([len(p) for p in partes], [36, 15, 9])
        self.assertEqual(partes[2].time_indices, list(range(51, 60)))
        medidas = read_measurements(os.path.join(self.division, 'test_medidas.csv'))
        self.assertEqual(medidas.shape, (9, 6))
        self.assertTrue(os.path.exists(os.path.join(self.serie, 'run_manifest.json')))

    def test_pod(self):
        salida = self.ruta('pod')
        codigo, _ = ejecutar('pod', '--data', self.division, '--r', 4, '--out', salida)
        self.assertEqual(codigo, 0)
        with open(os.path.join(salida, 'pod_resumen.json'), encoding='utf-8') as f:
            resumen = json.load(f)
        self.assertEqual(resumen['r'], 4)
        self.assertTrue(np.all(np.diff(resumen['singular_values']) <= 0))

    def test_gpod_predict_eval(self):
        salida = self.ruta('gpod')
        codigo, _ = ejecutar('gpod', '--data', self.division, '--sensors', self.sensores,
                             '--r-max', 5, '--lambda', 0, 0.01, '--out', salida)
        self.assertEqual(codigo, 0)
        errores = pd.read_csv(os.path.join(salida, 'gpod_errores.csv'))
        self.assertEqual(list(errores['time_index']), list(range(51, 60)))
        modelo = os.path.join(salida, 'modelos', 'gpod', 'modelo.frc')
        self.assertTrue(os.path.exists(modelo))
        with open(os.path.join(salida, 'run_manifest.json'), encoding='utf-8') as f:
            lecturas = [(a['conjunto'], a['proposito']) for a in json.load(f)['accesos']]
        self.assertIn(('train', 'entrenamiento'), lecturas)
        self.assertIn(('test', 'evaluacion'), lecturas)
        self.assertEqual({c for c, p in lecturas if p == 'seleccion'}, {'validation'})

        prediccion = self.ruta('prediccion')
        codigo, _ = ejecutar('predict', '--model', modelo,
                             '--measurements', os.path.join(self.division, 'test_medidas.csv'), '--out', prediccion)
        self.assertEqual(codigo, 0)
        self.assertEqual(len(read_frc1(prediccion)), 9)

        codigo, texto = ejecutar('eval', '--pred', prediccion, '--truth', os.path.join(self.division, 'test'),
                                 '--out', self.ruta('eval'))
        self.assertEqual(codigo, 0)
        resultado = json.loads(texto)
        self.assertAlmostEqual(resultado['mean_relative_error'], errores['relative_error'].mean(), places=10)

    def test_train_y_uq(self):
        salida = self.ruta('train')
        codigo, _ = ejecutar('train', '--data', self.division, '--sensors', self.sensores,
                             '--arch', '{"preset": "diminuta"}', '--epochs', 2, '--batch-size', 8,
                             '--nmc', 5, '--lambda-mode', 'adaptive', '--out', salida)
        self.assertEqual(codigo, 0)
        registro = pd.read_csv(os.path.join(salida, 'registro_entrenamiento.csv'))
        self.assertEqual(len(registro), 2)

        uq = self.ruta('uq')
        codigo, _ = ejecutar('uq', '--model', os.path.join(salida, 'modelo.frc'),
                             '--measurements', os.path.join(self.division, 'test_medidas.csv'),
                             '--row', 2, '--nmc', 20, '--truth', os.path.join(self.division, 'test'),
                             '--out', uq)
        self.assertEqual(codigo, 0)
        intervalos = pd.read_csv(os.path.join(uq, 'intervalos.csv'))
        self.assertEqual(len(intervalos), 128)
        self.assertTrue(np.all(intervalos['low'] <= intervalos['high']))
        self.assertEqual(len(pd.read_csv(os.path.join(uq, 'montaje.csv'))), 9 * 64)
        self.assertEqual(len(pd.read_csv(os.path.join(uq, 'error_absoluto.csv'))), 64)

    def test_uq_requiere_scvae(self):
        salida = self.ruta('gpod_uq')
        ejecutar('gpod', '--data', self.division, '--sensors', self.sensores, '--r-max', 3, '--out', salida)
        codigo, _ = ejecutar('uq', '--model', os.path.join(salida, 'modelos', 'gpod', 'modelo.frc'),
                             '--measurements', os.path.join(self.division, 'test_medidas.csv'),
                             '--out', self.ruta('uq_gpod'))
        self.assertEqual(codigo, 2)

    def test_errores_de_validacion(self):
        codigo, _ = ejecutar('gen', '--nx', 2, '--ny', 8, '--steps', 5, '--out', self.ruta('malla'))
        self.assertEqual(codigo, 2)
        codigo, _ = ejecutar('gpod', '--data', self.division, '--out', self.ruta('sin_sensores'))
        self.assertEqual(codigo, 2)
        codigo, _ = ejecutar('verify', '--run', self.ruta('no_existe'))
        self.assertEqual(codigo, 2)

    def test_verificar_gradientes(self):
        codigo, texto = ejecutar('verify', '--gradients')
        self.assertEqual(codigo, 0)
        informe = json.loads(texto)
        self.assertLessEqual(max(informe['gradientes'].values()), 1e-4)


class TestCrearDirectorios(unittest.TestCase):
    def setUp(self):
        self.temp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp, ignore_errors=True)

    def test_estructura(self):
        with redirect_stdout(StringIO()):
            directorios = crear_estructura_proyecto(self.temp)
        for d in ('datos/sinteticos', 'modelos', 'resultados/experimentos', 'logs', 'temp'):
            self.assertIn(d, directorios)
            self.assertTrue(os.path.exists(os.path.join(self.temp, d, '.gitkeep')))
        self.assertTrue(os.path.exists(os.path.join(self.temp, 'datos', 'README.md')))

    def test_limpiar_temp(self):
        with redirect_stdout(StringIO()):
            crear_estructura_proyecto(self.temp)
            for nombre in ('a.tmp', 'b.tmp'):
                open(os.path.join(self.temp, 'temp', nombre), 'w').close()
            self.assertEqual(limpiar_directorios_temp(self.temp), 2)
        self.assertEqual(os.listdir(os.path.join(self.temp, 'temp')), ['.gitkeep'])


if __name__ == '__main__':
    unittest.main()
