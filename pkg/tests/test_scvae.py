import unittest
import os
import shutil
import tempfile

import numpy as np

from src.core.divergencia import DivergenceOperator
from src.core.errores import ErrorValidacion
from src.core.escalado import ScalingParams, scale_state
from src.core.malla import Grid
from src.core.muestreo import SamplingOperator, random_layout
from src.core.particion import SplitSpec, split
from src.modelos.arquitecturas import diminuta
from src.modelos.scvae import (COLUMNAS_REGISTRO, LatentGaussian, ScvaeModel, TrainConfig,
                               adaptive_weights, decode, desglose_objetivo, elbo, encode,
                               evaluar_objetivo, kl_closed_form, predict, reparameterize, train)
from src.sinteticos.generadores import FlowRecipe, default_grid, default_times, generate

TOLERANCIA_GRADIENTE = 1e-4


def modelo_preparado(semilla=1, M=3):
    grid = Grid(8, 8)
    layout = random_layout(grid, M, np.random.default_rng(semilla))
    modelo = ScvaeModel('prueba', diminuta((8, 8, 2)), TrainConfig(seed=semilla))
    modelo.preparar(grid, layout)
    return modelo


def lote(modelo, B=3, L=2, semilla=0):
    rng = np.random.default_rng(semilla)
    X = rng.uniform(-1, 1, (B, modelo.grid.n_estado))
    Mm = X[:, SamplingOperator(modelo.layout, modelo.grid).indices]
    ruido = rng.standard_normal((L, B, modelo.arquitectura.latent_dim))
    return X, Mm, ruido


def error_gradiente(modelo, X, Mm, ruido, beta, lam, eps=1e-6, por_tensor=12):
    """Error relativo entre el gradiente analítico de -total y diferencias centrales"""
    params = modelo.params
    params.zero_grad()
    evaluar_objetivo(modelo, X, Mm, ruido, beta, lam)
    analiticos = {k: params.grads[k].copy() for k in params}
    params.zero_grad()

    def perdida():
        return -evaluar_objetivo(modelo, X, Mm, ruido, beta, lam, gradiente=False).total

    rng = np.random.default_rng(7)
    errores = {}
    for nombre in params:
        plano = params.valores[nombre].reshape(-1)
        idx = rng.choice(plano.size, size=min(por_tensor, plano.size), replace=False)
        numerico = np.empty(idx.size)
        for k, i in enumerate(idx):
            original = plano[i]
            plano[i] = original + eps
            f_mas = perdida()
            plano[i] = original - eps
            f_menos = perdida()
            plano[i] = original
            numerico[k] = (f_mas - f_menos) / (2 * eps)
        referencia = analiticos[nombre].reshape(-1)[idx]
        errores[nombre] = float(np.linalg.norm(referencia - numerico) / max(np.linalg.norm(numerico), 1e-12))
    return errores


def particiones(K=48, semilla=0):
    grid = default_grid(8, 8)
    receta = FlowRecipe('traveling_vortices', seed=semilla)
    serie = generate(receta, grid, default_times(K, receta))
    return grid, split(serie, SplitSpec())


class TestObjetivo(unittest.TestCase):
    def test_kl_ejemplos(self):
        self.assertEqual(kl_closed_form(LatentGaussian(np.zeros(2), np.zeros(2))), 0.0)
        self.assertAlmostEqual(kl_closed_form(LatentGaussian(np.array([1.0, 0.0]), np.zeros(2))), 0.5)
        self.assertAlmostEqual(kl_closed_form(LatentGaussian(np.zeros(1), np.array([np.log(2.0)]))),
                               0.5 * (1 - np.log(2.0)))
        lote_kl = kl_closed_form(LatentGaussian(np.zeros((3, 2)), np.zeros((3, 2))))
        self.assertEqual(lote_kl.shape, (3,))

    def test_reparametrizacion(self):
        g = LatentGaussian(np.array([1.0, -2.0]), np.array([np.log(4.0), 0.0]))
        np.testing.assert_allclose(reparameterize(g, np.zeros(2)), g.mean)
        np.testing.assert_allclose(reparameterize(g, np.ones(2)), [3.0, -1.0])
        with self.assertRaises(ErrorValidacion):
            reparameterize(g, np.zeros(3))

    def test_desglose(self):
        """x = 0, x̂ = 1 constante: recon = -1/2, sin divergencia ni KL"""
        grid = Grid(4, 4)
        X = np.zeros((1, grid.n_estado))
        Xhat = np.ones((1, 1, grid.n_estado))
        g = LatentGaussian(np.zeros((1, 2)), np.zeros((1, 2)))
        d = desglose_objetivo(X, Xhat, g, DivergenceOperator(grid), beta=2.0, lam=3.0)
        self.assertAlmostEqual(d.reconstruction_term, -0.5)
        self.assertAlmostEqual(d.divergence_term, 0.0)
        self.assertAlmostEqual(d.kl_term, 0.0)
        self.assertAlmostEqual(d.total, -0.5)
        self.assertEqual(d.a_dict()['lambda'], 3.0)

    def test_total_combina_terminos(self):
        modelo = modelo_preparado()
        X, Mm, ruido = lote(modelo)
        d = evaluar_objetivo(modelo, X, Mm, ruido, 0.7, 0.2, gradiente=False)
        self.assertAlmostEqual(d.total, d.reconstruction_term + 0.2 * d.divergence_term - 0.7 * d.kl_term,
                               places=12)
        self.assertLessEqual(d.reconstruction_term, 0.0)
        self.assertLessEqual(d.divergence_term, 0.0)
        self.assertGreaterEqual(d.kl_term, 0.0)

    def test_gradiente_del_objetivo(self):
        modelo = modelo_preparado()
        X, Mm, ruido = lote(modelo)
        for beta, lam in ((1.0, 0.0), (0.5, 0.3)):
            errores = error_gradiente(modelo, X, Mm, ruido, beta, lam)
            self.assertLessEqual(max(errores.values()), TOLERANCIA_GRADIENTE, errores)

    def test_lambda_apagado_ignora_divergencia(self):
        """Con λ = 0 el gradiente no depende del operador de divergencia"""
        modelo = modelo_preparado()
        X, Mm, ruido = lote(modelo)
        modelo.params.zero_grad()
        evaluar_objetivo(modelo, X, Mm, ruido, 1.0, 0.0)
        base = modelo.params.vector_gradientes()
        modelo.params.zero_grad()
        modelo._div_escalada = DivergenceOperator(modelo.grid).scaled(ScalingParams(0.0, 0.0, 3.0, 0.5))
        evaluar_objetivo(modelo, X, Mm, ruido, 1.0, 0.0)
        np.testing.assert_array_equal(modelo.params.vector_gradientes(), base)

    def test_fragmentos_suman_el_mismo_gradiente(self):
        modelo = modelo_preparado()
        X, Mm, ruido = lote(modelo, B=5)
        modelo.params.zero_grad()
        a = modelo._paso(X, Mm, ruido, 1.0, 0.4)
        secuencial = modelo.params.vector_gradientes()
        modelo.params.zero_grad()
        modelo.train_config = TrainConfig(fragmentos=3)
        b = modelo._paso(X, Mm, ruido, 1.0, 0.4)
        np.testing.assert_allclose(modelo.params.vector_gradientes(), secuencial, rtol=1e-10, atol=1e-14)
        self.assertAlmostEqual(a.total, b.total, places=12)

    def test_elbo_sin_lambda(self):
        modelo = modelo_preparado()
        X, Mm, _ = lote(modelo)
        d = elbo(modelo, X, Mm, TrainConfig(lambda_mode='off'), lam=5.0)
        self.assertEqual(d.lam, 0.0)
        d = elbo(modelo, X, Mm, TrainConfig(lambda_mode='adaptive'))
        self.assertEqual(d.lam, 1.0)

    def test_codificador_no_ve_medidas(self):
        modelo = modelo_preparado()
        X, _, _ = lote(modelo, B=1)
        g = encode(modelo, X[0])
        self.assertEqual(g.mean.shape, (2,))
        x = decode(modelo, g.mean, np.zeros(modelo.n_medidas))
        self.assertEqual(x.shape, (modelo.grid.n_estado,))
        with self.assertRaises(ErrorValidacion):
            decode(modelo, g.mean, np.zeros(modelo.n_medidas + 1))


class TestPesosAdaptativos(unittest.TestCase):
    def test_magnitudes_iguales(self):
        cfg = TrainConfig(lambda_mode='adaptive')
        self.assertEqual(adaptive_weights([{'recon': -1.0, 'kl': 1.0, 'div': -1.0}], cfg), (1.0, 1.0))

    def test_proporcion_inversa(self):
        cfg = TrainConfig(lambda_mode='adaptive')
        beta, lam = adaptive_weights([{'recon': -2.0, 'kl': 4.0, 'div': -0.5}], cfg)
        self.assertAlmostEqual(beta, 0.5)
        self.assertAlmostEqual(lam, 4.0)

    def test_cotas(self):
        cfg = TrainConfig(lambda_mode='adaptive')
        beta, lam = adaptive_weights([{'recon': -1.0, 'kl': 0.0, 'div': -1e9}], cfg)
        self.assertEqual(beta, cfg.beta_max)
        self.assertEqual(lam, cfg.lambda_min)

    def test_modos_fijos(self):
        cfg = TrainConfig(beta_mode='fixed', beta=0.3)
        self.assertEqual(adaptive_weights([{'recon': -1.0, 'kl': 9.0, 'div': -9.0}], cfg), (0.3, 0.0))
        with self.assertRaises(ErrorValidacion):
            adaptive_weights([], cfg)

    def test_configuracion_invalida(self):
        with self.assertRaises(ErrorValidacion):
            TrainConfig(lambda_mode='grid')
        with self.assertRaises(ErrorValidacion):
            TrainConfig(batch_size=0)


class TestEntrenamiento(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.grid, (cls.train, cls.validacion, cls.test) = particiones()
        cls.layout = random_layout(cls.grid, 3, np.random.default_rng(0))
        cls.op = SamplingOperator(cls.layout, cls.grid)
        cls.cfg = TrainConfig(batch_size=8, max_epochs=6, patience=3, lambda_mode='adaptive', seed=2)
        cls.modelo, cls.registro = train((cls.train, cls.validacion), cls.layout, diminuta((8, 8, 2)), cls.cfg)

    def test_registro(self):
        self.assertEqual(list(self.registro.columns), COLUMNAS_REGISTRO)
        self.assertLessEqual(len(self.registro), self.cfg.max_epochs)
        self.assertEqual(list(self.registro['epoch']), list(range(1, len(self.registro) + 1)))
        self.assertTrue(np.all(np.isfinite(self.registro[['recon', 'kl', 'div']].values)))
        self.assertEqual(self.registro['lambda'].iloc[0], 1.0)

    def test_lecturas_de_particiones(self):
        """El entrenamiento solo lee entrenamiento y validación, una vez cada una"""
        self.assertEqual([(a['conjunto'], a['proposito']) for a in self.modelo.accesos.entradas],
                         [('train', 'entrenamiento'), ('validation', 'seleccion')])

    def test_restaura_la_mejor_epoca(self):
        mejor = int(np.argmax(self.registro['val_objective'].values)) + 1
        self.assertEqual(self.modelo.epoca_mejor, mejor)

        escalado = self.modelo.escalado
        X_val = scale_state(escalado, self.grid, self.validacion.matriz())
        ruido_val = np.random.default_rng(np.random.SeedSequence(self.cfg.seed).spawn(4)[3]).standard_normal(
            (self.cfg.mc_samples_L, len(self.validacion), 2))
        valor = self.modelo._objetivo_por_bloques(X_val, X_val[:, self.op.indices], ruido_val,
                                                  *self.cfg.pesos_iniciales()).total
        self.assertAlmostEqual(valor, self.registro['val_objective'].iloc[mejor - 1], places=10)

    def test_determinista(self):
        otro, registro = train((self.train, self.validacion), self.layout, diminuta((8, 8, 2)), self.cfg)
        self.assertEqual(otro.params.vector().tobytes(), self.modelo.params.vector().tobytes())
        self.assertTrue(registro.equals(self.registro))

    def test_prediccion(self):
        medidas = self.test.matriz()[:, self.op.indices]
        dist = predict(self.modelo, medidas[0])
        x0 = dist.draw(np.zeros(2))
        self.assertEqual(x0.shape, (self.grid.n_estado,))
        np.testing.assert_array_equal(dist.draw(np.zeros(2)), x0)

        eps = np.random.default_rng(0).standard_normal((100, 2))
        esperado = dist.draw_lote(eps).mean(axis=0)
        np.testing.assert_allclose(self.modelo.predecir(medidas[:1])[0], esperado, atol=1e-12)
        with self.assertRaises(ErrorValidacion):
            predict(self.modelo, medidas[0][:-1])

    def test_guardar_y_cargar(self):
        medidas = self.test.matriz()[:3, self.op.indices]
        temp = tempfile.mkdtemp()
        try:
            ruta = os.path.join(temp, 'modelo.frc')
            self.modelo.guardar(ruta)
            cargado = ScvaeModel()
            cargado.cargar(ruta)
            self.assertEqual(cargado.epoca_mejor, self.modelo.epoca_mejor)
            self.assertEqual(cargado.train_config, self.cfg)
            np.testing.assert_array_equal(cargado.predecir(medidas), self.modelo.predecir(medidas))
        finally:
            shutil.rmtree(temp, ignore_errors=True)

    def test_arquitectura_incompatible(self):
        modelo = ScvaeModel('prueba', diminuta((8, 4, 2)))
        with self.assertRaises(ErrorValidacion):
            modelo.preparar(self.grid, self.layout)

    def test_memoriza_conjunto_pequeno(self):
        """La reconstrucción de entrenamiento mejora claramente en pocas épocas"""
        cfg = TrainConfig(batch_size=4, max_epochs=40, patience=40, learning_rate=1e-2,
                          beta_mode='fixed', beta=1e-3, seed=0)
        pequeno = self.train.subserie(range(12))
        _, registro = train((pequeno, pequeno), self.layout, diminuta((8, 8, 2)), cfg)
        self.assertGreater(registro['recon'].iloc[-5:].mean(), registro['recon'].iloc[:3].mean())


if __name__ == '__main__':
    unittest.main()
