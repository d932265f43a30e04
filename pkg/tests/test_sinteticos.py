import unittest

import numpy as np

from src.core.divergencia import DivergenceOperator, apply_divergence
from src.core.errores import ErrorValidacion
from src.sinteticos.generadores import TIPOS, FlowRecipe, default_grid, default_times, generate


class TestGeneradores(unittest.TestCase):
    def setUp(self):
        self.grid = default_grid(24, 16)

    def test_taylor_green_inicial(self):
        """En t=0: u = cos x sin y, v = -sin x cos y"""
        serie = generate(FlowRecipe('taylor_green'), self.grid, [0.0])
        X, Y = self.grid.coordenadas()
        np.testing.assert_allclose(serie[0].u, np.cos(X) * np.sin(Y), atol=1e-14)
        np.testing.assert_allclose(serie[0].v, -np.sin(X) * np.cos(Y), atol=1e-14)

    def test_divergencia_orden_dos(self):
        """La divergencia discreta decae al menos 3.5 veces al refinar la malla"""
        for tipo in TIPOS:
            receta = FlowRecipe(tipo, seed=3)
            maximos = []
            for grid in (default_grid(128, 128), default_grid(128, 128).refinada(2)):
                X = generate(receta, grid, [0.0, 0.7]).matriz()
                maximos.append(np.max(np.abs(apply_divergence(DivergenceOperator(grid), X))))
            self.assertGreaterEqual(maximos[0] / maximos[1], 3.5, tipo)

    def test_determinismo(self):
        receta = FlowRecipe('random_fourier_solenoidal', wavenumbers=(3, 3), seed=9)
        tiempos = default_times(10, receta)
        a = generate(receta, self.grid, tiempos).matriz()
        b = generate(receta, self.grid, tiempos).matriz()
        self.assertEqual(a.tobytes(), b.tobytes())

    def test_semillas_distintas(self):
        a = generate(FlowRecipe('traveling_vortices', seed=1), self.grid, [0.0]).matriz()
        b = generate(FlowRecipe('traveling_vortices', seed=2), self.grid, [0.0]).matriz()
        self.assertFalse(np.allclose(a, b))

    def test_periodicidad(self):
        """Instantáneas separadas por un periodo coinciden"""
        for tipo in TIPOS:
            receta = FlowRecipe(tipo, phase_speed=0.8, seed=4)
            t = 0.37
            serie = generate(receta, self.grid, [t, t + receta.periodo()])
            np.testing.assert_allclose(serie[0].u, serie[1].u, atol=1e-10)
            np.testing.assert_allclose(serie[0].v, serie[1].v, atol=1e-10)

    def test_instantes_por_defecto(self):
        receta = FlowRecipe('traveling_vortices')
        tiempos = default_times(2000, receta)
        self.assertEqual(len(tiempos), 2000)
        self.assertTrue(np.all(np.diff(tiempos) > 0))
        self.assertGreater(tiempos[-1], 10 * receta.periodo())

    def test_receta_invalida(self):
        with self.assertRaises(ErrorValidacion):
            FlowRecipe('taylor_green', amplitude=0.0)
        with self.assertRaises(ErrorValidacion):
            FlowRecipe('taylor_green', wavenumbers=(0, 1))
        with self.assertRaises(ErrorValidacion):
            generate(FlowRecipe('remolino'), self.grid, [0.0])
        with self.assertRaises(ErrorValidacion):
            generate(FlowRecipe('taylor_green'), self.grid, [])


if __name__ == '__main__':
    unittest.main()
