import unittest

import numpy as np
import pandas as pd

from src.core.divergencia import DivergenceOperator
from src.core.errores import ErrorValidacion
from src.core.malla import Grid
from src.mlops.metricas import MetricasManager, divergence_error, relative_error


class TestMetricas(unittest.TestCase):
    def test_error_relativo(self):
        """x = (3,4,0,0), x̂ = (0,4,0,0): 3/5"""
        self.assertAlmostEqual(relative_error([np.array([0.0, 4, 0, 0])], [np.array([3.0, 4, 0, 0])]), 0.6)

    def test_error_relativo_medio(self):
        verdades = np.array([[3.0, 4, 0, 0], [1.0, 0, 0, 0]])
        predicciones = np.array([[0.0, 4, 0, 0], [1.0, 0, 0, 0]])
        self.assertAlmostEqual(relative_error(predicciones, verdades), 0.3)
        self.assertEqual(relative_error(verdades, verdades), 0.0)

    def test_error_relativo_invalido(self):
        with self.assertRaises(ErrorValidacion):
            relative_error(np.zeros((2, 4)), np.zeros((3, 4)))
        with self.assertRaises(ErrorValidacion):
            relative_error(np.ones((1, 4)), np.zeros((1, 4)))

    def test_divergencia_constante(self):
        """u = x, v = 0: divergencia 1 en los N puntos, norma √N"""
        grid = Grid(6, 5, dx=0.5, dy=0.25)
        X, _ = grid.coordenadas()
        x = np.concatenate([X, np.zeros(grid.n_puntos)])
        self.assertAlmostEqual(divergence_error(x[None], DivergenceOperator(grid)), np.sqrt(grid.n_puntos),
                               places=10)
        self.assertAlmostEqual(divergence_error(np.zeros((3, grid.n_estado)), DivergenceOperator(grid)), 0.0)


class TestMetricasManager(unittest.TestCase):
    def setUp(self):
        self.manager = MetricasManager()
        self.grid = Grid(4, 3)
        self.div = DivergenceOperator(self.grid)
        rng = np.random.default_rng(0)
        self.verdades = rng.standard_normal((5, self.grid.n_estado))
        self.predicciones = self.verdades + 0.1 * rng.standard_normal((5, self.grid.n_estado))

    def test_calcular(self):
        metricas = self.manager.calcular_metricas_reconstruccion(self.predicciones, self.verdades, self.div)
        self.assertAlmostEqual(metricas['mean_relative_error'], relative_error(self.predicciones, self.verdades))
        self.assertAlmostEqual(metricas['divergence_error'], divergence_error(self.predicciones, self.div))

    def test_por_instantanea(self):
        tabla = self.manager.errores_por_instantanea(self.predicciones, self.verdades, self.div,
                                                     [10, 11, 12, 13, 14])
        self.assertEqual(list(tabla.columns), ['time_index', 'relative_error', 'divergence_norm'])
        self.assertEqual(list(tabla['time_index']), [10, 11, 12, 13, 14])
        self.assertAlmostEqual(tabla['relative_error'].mean(), relative_error(self.predicciones, self.verdades))
        self.assertAlmostEqual(tabla['divergence_norm'].mean(), divergence_error(self.predicciones, self.div))

    def test_resumir(self):
        filas = pd.DataFrame({
            'method': ['a', 'a', 'b'],
            'M': [2, 2, 2],
            'mean_relative_error': [0.1, 0.3, 0.5],
            'divergence_error': [1.0, 1.0, 2.0],
        })
        resumen = self.manager.resumir(filas, ['method', 'M'])
        fila = resumen[resumen['method'] == 'a'].iloc[0]
        self.assertAlmostEqual(fila['mean_relative_error_mean'], 0.2)
        self.assertAlmostEqual(fila['mean_relative_error_min'], 0.1)
        self.assertAlmostEqual(fila['mean_relative_error_max'], 0.3)
        self.assertEqual(fila['mean_relative_error_count'], 2)
        self.assertTrue(self.manager.resumir(filas.iloc[:0], ['method']).empty)


if __name__ == '__main__':
    unittest.main()
