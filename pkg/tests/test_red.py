import unittest
import os
import shutil
import tempfile

import numpy as np

from src.cli import comprobar_gradientes_diminuta
from src.core.errores import ErrorValidacion
from src.modelos.arquitecturas import preset
from src.red import (AdamState, LayerSpec, ParamStore, Red, adam_step, cargar_parametros,
                     check_gradients, conv2d_forward, conv2d_transpose_forward, guardar_parametros)

TOLERANCIA = 1e-5


def conv_directa(x, W, b, stride):
    """Convolución 'valid' con bucles explícitos"""
    B, H, Wd, C = x.shape
    kh, kw, _, O = W.shape
    Ho, Wo = (H - kh) // stride + 1, (Wd - kw) // stride + 1
    y = np.zeros((B, Ho, Wo, O))
    for n in range(B):
        for a in range(Ho):
            for c in range(Wo):
                for o in range(O):
                    total = b[o]
                    for i in range(kh):
                        for j in range(kw):
                            for k in range(C):
                                total += x[n, a * stride + i, c * stride + j, k] * W[i, j, k, o]
                    y[n, a, c, o] = total
    return y


def red_inicializada(specs, forma, formas_aux=None, semilla=0):
    red = Red([LayerSpec.desde_dict(s) for s in specs], forma, formas_aux=formas_aux)
    params = ParamStore()
    red.inicializar(params, np.random.default_rng(semilla))
    for nombre in params:
        if nombre.endswith('.b'):
            params.valores[nombre][...] = np.random.default_rng(semilla + 1).standard_normal(params[nombre].shape)
    return red, params


class TestFormas(unittest.TestCase):
    def _salidas(self, red):
        return [tuple(c['salida']) for c in red.resumen()]

    def test_codificador_cilindro(self):
        arq = preset('cilindro')
        salidas = self._salidas(Red(arq.encoder, arq.input_shape))
        self.assertEqual(salidas[0], (168, 56, 2))
        self.assertEqual(salidas[1], (84, 28, 160))
        self.assertEqual(salidas[3], (42, 14, 200))

    def test_codificador_oceano(self):
        arq = preset('oceano')
        salidas = self._salidas(Red(arq.encoder, arq.input_shape))
        self.assertEqual(salidas[0], (16, 16, 64))
        self.assertEqual(salidas[2], (8, 8, 128))

    def test_decodificadores_reconstruyen_la_forma(self):
        for nombre in ('cilindro', 'oceano', 'compacta', 'diminuta'):
            arq = preset(nombre)
            _, decodificador = arq.construir(6)
            self.assertEqual(decodificador.forma_salida, arq.input_shape, nombre)

    def test_error_nombra_la_capa(self):
        with self.assertRaisesRegex(ErrorValidacion, 'dense'):
            Red([LayerSpec('dense', {'units': 3})], (4, 4, 2))

    def test_entrada_incompatible(self):
        red, params = red_inicializada([{'kind': 'dense', 'units': 2}], (3,))
        with self.assertRaises(ErrorValidacion):
            red.forward(params, np.zeros((1, 4)))

    def test_tipo_desconocido(self):
        with self.assertRaises(ErrorValidacion):
            LayerSpec('maxpool')


class TestConvolucion(unittest.TestCase):
    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_oraculo_directo(self):
        for stride in (1, 2):
            x = self.rng.standard_normal((2, 7, 6, 3))
            W = self.rng.standard_normal((2, 3, 3, 4))
            b = self.rng.standard_normal(4)
            np.testing.assert_allclose(conv2d_forward(x, W, b, stride), conv_directa(x, W, b, stride),
                                       atol=1e-12, rtol=0)

    def test_nucleo_identidad(self):
        x = self.rng.standard_normal((2, 5, 4, 3))
        W = np.eye(3).reshape(1, 1, 3, 3)
        np.testing.assert_array_equal(conv2d_forward(x, W, np.zeros(3), 1), x)

    def test_transpuesta_es_adjunta(self):
        for stride in (1, 2):
            x = self.rng.standard_normal((2, 8, 6, 3))
            W = self.rng.standard_normal((2, 2, 3, 5))
            y = self.rng.standard_normal(conv2d_forward(x, W, None, stride).shape)
            izquierda = np.sum(conv2d_forward(x, W, None, stride) * y)
            derecha = np.sum(x * conv2d_transpose_forward(y, W, None, stride))
            self.assertLess(abs(izquierda - derecha), 1e-10 * max(1.0, abs(izquierda)))

    def test_transpuesta_duplica(self):
        x = self.rng.standard_normal((1, 8, 8, 4))
        W = self.rng.standard_normal((2, 2, 3, 4))
        self.assertEqual(conv2d_transpose_forward(x, W, None, 2).shape, (1, 16, 16, 3))

    def test_transpuesta_cuenta_solapes(self):
        """Núcleo y entrada de unos: cada salida es el número de ventanas que la cubren"""
        x = np.ones((1, 3, 3, 1))
        W = np.ones((3, 3, 1, 1))
        y = conv2d_transpose_forward(x, W, None, 2)[0, :, :, 0]
        cobertura = np.zeros(7)
        for i in range(3):
            cobertura[2 * i:2 * i + 3] += 1
        np.testing.assert_array_equal(y, np.outer(cobertura, cobertura))


class TestGradientes(unittest.TestCase):
    CASOS = {
        'dense': ([{'kind': 'dense', 'units': 3}], (5,)),
        'conv2d': ([{'kind': 'conv2d', 'filters': 3, 'kernel': 2, 'stride': 2}], (6, 5, 2)),
        'conv2d_stride1': ([{'kind': 'conv2d', 'filters': 2, 'kernel': [3, 2], 'stride': 1}], (5, 4, 2)),
        'conv2d_transpose': ([{'kind': 'conv2d_transpose', 'filters': 3, 'kernel': 2, 'stride': 2}], (3, 2, 2)),
        'relu': ([{'kind': 'dense', 'units': 6}, {'kind': 'relu'}], (4,)),
        'linear': ([{'kind': 'dense', 'units': 2}, {'kind': 'linear'}], (3,)),
        'zero_pad': ([{'kind': 'zero_pad', 'pad': [1, 2]}, {'kind': 'conv2d', 'filters': 2, 'kernel': 2}], (3, 3, 2)),
        'crop': ([{'kind': 'crop', 'crop': [1, 1]}, {'kind': 'conv2d', 'filters': 2, 'kernel': 2}], (5, 5, 2)),
        'flatten': ([{'kind': 'flatten'}, {'kind': 'dense', 'units': 2}], (3, 2, 2)),
        'reshape': ([{'kind': 'reshape', 'shape': [2, 3, 2]}, {'kind': 'conv2d', 'filters': 1, 'kernel': 2}], (12,)),
    }

    def test_cada_tipo_de_capa(self):
        """Gradientes analíticos frente a diferencias centrales"""
        rng = np.random.default_rng(5)
        for nombre, (specs, forma) in self.CASOS.items():
            red, params = red_inicializada(specs, forma)
            x = rng.standard_normal((3, *forma))
            errores = check_gradients(red, params, x)
            self.assertLessEqual(max(errores.values()), TOLERANCIA, f"{nombre}: {errores}")

    def test_concat_con_medidas(self):
        red, params = red_inicializada([{'kind': 'concat', 'input': 'm'}, {'kind': 'dense', 'units': 3}],
                                       (2,), formas_aux={'m': (4,)})
        rng = np.random.default_rng(6)
        x, m = rng.standard_normal((3, 2)), rng.standard_normal((3, 4))
        errores = check_gradients(red, params, x, {'m': m})
        self.assertLessEqual(max(errores.values()), TOLERANCIA)

        y, cinta = red.forward(params, x, {'m': m})
        dy = rng.standard_normal(y.shape)
        _, daux = red.backward(cinta, dy)
        W = params['red.1.dense.W']
        np.testing.assert_allclose(daux['m'], dy @ W[2:].T, atol=1e-12)

    def test_composiciones_diminutas(self):
        errores = comprobar_gradientes_diminuta(0)
        self.assertEqual(set(errores), {'encoder', 'encoder.media', 'encoder.logvar', 'decoder'})
        self.assertLessEqual(max(errores.values()), TOLERANCIA, errores)

    def test_relu_positiva(self):
        red, params = red_inicializada([{'kind': 'relu'}], (4,))
        x = np.abs(np.random.default_rng(1).standard_normal((2, 4))) + 0.1
        y, cinta = red.forward(params, x)
        dy = np.random.default_rng(2).standard_normal(y.shape)
        dx, _ = red.backward(cinta, dy)
        np.testing.assert_array_equal(dx, dy)

    def test_densa_formula_explicita(self):
        red, params = red_inicializada([{'kind': 'dense', 'units': 3}], (4,))
        rng = np.random.default_rng(3)
        x, dy = rng.standard_normal((5, 4)), rng.standard_normal((5, 3))
        _, cinta = red.forward(params, x)
        dx, _ = red.backward(cinta, dy)
        W = params['red.0.dense.W']
        np.testing.assert_allclose(params.grads['red.0.dense.W'], x.T @ dy, atol=1e-12)
        np.testing.assert_allclose(params.grads['red.0.dense.b'], dy.sum(axis=0), atol=1e-12)
        np.testing.assert_allclose(dx, dy @ W.T, atol=1e-12)

    def test_linealidad_del_backward(self):
        specs, forma = self.CASOS['conv2d']
        red, params = red_inicializada(specs, forma)
        rng = np.random.default_rng(4)
        x = rng.standard_normal((2, *forma))
        y, _ = red.forward(params, x)
        g1, g2 = rng.standard_normal((2, *y.shape))

        gradientes = []
        for g in (g1, g2, g1 + g2):
            params.zero_grad()
            _, cinta = red.forward(params, x)
            red.backward(cinta, g)
            gradientes.append(params.vector_gradientes().copy())
        np.testing.assert_allclose(gradientes[0] + gradientes[1], gradientes[2], atol=1e-12)

    def test_forward_determinista(self):
        specs, forma = self.CASOS['zero_pad']
        red, params = red_inicializada(specs, forma)
        x = np.random.default_rng(0).standard_normal((2, *forma))
        a, _ = red.forward(params, x)
        b, _ = red.forward(params, x)
        self.assertEqual(a.tobytes(), b.tobytes())


class TestCinta(unittest.TestCase):
    def setUp(self):
        self.red, self.params = red_inicializada([{'kind': 'dense', 'units': 2}], (3,))
        self.x = np.ones((1, 3))

    def test_cinta_obsoleta(self):
        y, cinta = self.red.forward(self.params, self.x)
        self.params.grads['red.0.dense.W'][...] = 1.0
        adam_step(AdamState(), self.params)
        with self.assertRaisesRegex(ErrorValidacion, 'obsoleta'):
            self.red.backward(cinta, np.ones_like(y))

    def test_cinta_consumida(self):
        y, cinta = self.red.forward(self.params, self.x)
        self.red.backward(cinta, np.ones_like(y))
        with self.assertRaises(ErrorValidacion):
            self.red.backward(cinta, np.ones_like(y))

    def test_cinta_ajena(self):
        otra, _ = red_inicializada([{'kind': 'dense', 'units': 2}], (3,))
        y, cinta = self.red.forward(self.params, self.x)
        with self.assertRaises(ErrorValidacion):
            otra.backward(cinta, np.ones_like(y))


class TestAdam(unittest.TestCase):
    def _params(self, **valores):
        params = ParamStore()
        for nombre, valor in valores.items():
            params.crear(nombre, np.array(valor, dtype=float))
        return params

    def test_primer_paso(self):
        """g = 1 en el primer paso mueve el parámetro ≈ -lr"""
        params = self._params(w=0.0)
        params.grads['w'][...] = 1.0
        estado = AdamState()
        adam_step(estado, params)
        self.assertAlmostEqual(float(params['w']), -1e-3 / (1 + 1e-8), places=12)
        self.assertEqual(estado.step, 1)
        self.assertEqual(float(params.grads['w']), 0.0)
        self.assertEqual(params.version, 1)

    def test_gradiente_nulo(self):
        params = self._params(w=[1.5, -2.0])
        adam_step(AdamState(), params)
        np.testing.assert_array_equal(params['w'], [1.5, -2.0])

    def test_parametros_independientes(self):
        juntos = self._params(a=1.0, b=2.0)
        juntos.grads['a'][...] = 0.3
        juntos.grads['b'][...] = -5.0
        adam_step(AdamState(), juntos)

        for nombre, inicial, g in (('a', 1.0, 0.3), ('b', 2.0, -5.0)):
            solo = self._params(**{nombre: inicial})
            solo.grads[nombre][...] = g
            adam_step(AdamState(), solo)
            self.assertEqual(float(solo[nombre]), float(juntos[nombre]))


class TestSerializacion(unittest.TestCase):
    def setUp(self):
        self.temp = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp, ignore_errors=True)

    def test_guardar_y_cargar(self):
        red, params = red_inicializada(TestGradientes.CASOS['zero_pad'][0], (3, 3, 2))
        ruta = os.path.join(self.temp, 'parametros.frc')
        guardar_parametros(ruta, 'frcmodel-1', {'modelo': 'prueba'}, params)
        cabecera, cargados = cargar_parametros(ruta, 'frcmodel-1')
        self.assertEqual(cabecera['fmt'], 'frcmodel-1')
        self.assertEqual(cabecera['modelo'], 'prueba')
        self.assertEqual(cargados.nombres(), params.nombres())
        np.testing.assert_array_equal(cargados.vector(), params.vector())

    def test_formato_incorrecto(self):
        _, params = red_inicializada([{'kind': 'dense', 'units': 2}], (3,))
        ruta = os.path.join(self.temp, 'parametros.frc')
        guardar_parametros(ruta, 'frcpod-1', {}, params)
        with self.assertRaises(ErrorValidacion):
            cargar_parametros(ruta, 'frcmodel-1')


if __name__ == '__main__':
    unittest.main()
