import unittest
import os
import json
import shutil
import tempfile

import numpy as np

from src.core.logger import Logger


class TestLogger(unittest.TestCase):
    def setUp(self):
        """Preparar el entorno para cada test"""
        self.temp = tempfile.mkdtemp()
        self.log_dir = os.path.join(self.temp, 'logs')
        self.config_file = os.path.join(self.temp, 'logging_config.json')
        with open(self.config_file, 'w', encoding='utf-8') as f:
            json.dump({
                'log_dir': self.log_dir,
                'handlers': {'file': {'enabled': True, 'level': 'DEBUG'}, 'console': {'enabled': False}},
                'alerts': {'enabled': True,
                           'categorias': {'no_finito': ['no finita'], 'rango_deficiente': ['rango deficiente']},
                           'notification_methods': ['file']},
            }, f)
        self.logger = Logger('test_logger', self.config_file)

    def tearDown(self):
        """Limpiar después de cada test"""
        for handler in self.logger.logger.handlers:
            handler.close()
        shutil.rmtree(self.temp, ignore_errors=True)

    def leer(self, logger=None):
        logger = logger or self.logger
        for handler in logger.logger.handlers:
            handler.flush()
        with open(logger.log_file, 'r', encoding='utf-8') as f:
            return f.read()

    def test_crear_directorio(self):
        """Verifica que se crea el directorio de logs"""
        self.assertTrue(os.path.isdir(self.log_dir))

    def test_crear_archivo_log(self):
        """Verifica que se crea el archivo de log con el nombre del logger"""
        self.logger.info("Mensaje de prueba")
        self.assertTrue(os.path.exists(self.logger.log_file))
        self.assertTrue(os.path.basename(self.logger.log_file).startswith('test_logger_'))

    def test_niveles_log(self):
        """Verifica que se registran diferentes niveles de log"""
        mensajes = {
            'info': "Mensaje info",
            'warning': "Mensaje warning",
            'error': "Mensaje error",
            'debug': "Mensaje debug"
        }
        for nivel, mensaje in mensajes.items():
            getattr(self.logger, nivel)(mensaje)

        contenido = self.leer()
        self.assertIn(mensajes['info'], contenido)
        self.assertIn(mensajes['warning'], contenido)
        self.assertIn(mensajes['error'], contenido)
        # Debug no debería aparecer por default
        self.assertNotIn(mensajes['debug'], contenido)

    def test_formato_log(self):
        """Verifica el formato correcto del log"""
        self.logger.info("Mensaje de formato")
        linea = self.leer().splitlines()[0]
        self.assertRegex(linea, r'\d{4}-\d{2}-\d{2}')
        self.assertIn('flowrecon.test_logger', linea)
        self.assertIn('INFO', linea)
        self.assertIn("Mensaje de formato", linea)

    def test_contexto(self):
        """El contexto extra se añade como JSON"""
        self.logger.info("Con contexto", extra={'M': 3, 'metodo': 'gpod_l0'})
        self.assertIn('Contexto: {"M": 3, "metodo": "gpod_l0"}', self.leer())

    def test_cambiar_nivel(self):
        self.logger.set_level('DEBUG')
        self.logger.debug("Ahora sí")
        self.assertIn("Ahora sí", self.leer())

    def test_alertas_y_estadisticas(self):
        self.logger.warning("Aviso")
        self.logger.error("Pérdida no finita en la época 3")
        stats = self.logger.get_stats()
        self.assertEqual(stats['warning_count'], 1)
        self.assertEqual(stats['error_count'], 1)
        self.assertEqual(stats['alert_count'], 1)
        self.assertEqual(stats['incidencias'], {'no_finito': 1, 'rango_deficiente': 0})
        self.assertTrue(os.path.exists(os.path.join(self.log_dir, 'alerts.log')))

    def test_contexto_anidado(self):
        """El contexto de bloque se combina con el extra y se restaura al salir"""
        with self.logger.contexto(celda='scvae_l0_L00_M3_r0'):
            with self.logger.contexto(M=3):
                self.logger.warning("GPOD con rango deficiente", extra={'r': 5})
            self.logger.info("Solo celda")
        self.logger.info("Sin contexto")
        lineas = self.leer().splitlines()
        self.assertIn('Contexto: {"celda": "scvae_l0_L00_M3_r0", "M": 3, "r": 5}', lineas[0])
        self.assertIn('Contexto: {"celda": "scvae_l0_L00_M3_r0"}', lineas[1])
        self.assertNotIn('Contexto', lineas[2])
        self.assertEqual(self.logger.get_stats()['incidencias']['rango_deficiente'], 1)
        with open(os.path.join(self.log_dir, 'alerts.log'), encoding='utf-8') as f:
            self.assertIn('[rango_deficiente]', f.read())

    def test_metricas_y_numpy(self):
        """Los valores de numpy se serializan en el contexto y las métricas se compactan"""
        self.logger.metricas("Validación", {'mean_relative_error': np.float64(0.123456789), 'M': 3})
        self.logger.info("Arreglo", extra={'media': np.array([1.0, 2.0]), 'n': np.int64(4)})
        contenido = self.leer()
        self.assertIn('Validación: mean_relative_error=0.123457, M=3', contenido)
        self.assertIn('Contexto: {"media": [1.0, 2.0], "n": 4}', contenido)

    def test_excepcion_con_traza(self):
        try:
            raise ValueError("fallo de prueba")
        except ValueError as e:
            self.logger.error("Error capturado", exc_info=e)
        contenido = self.leer()
        self.assertIn('Traceback', contenido)
        self.assertIn('fallo de prueba', contenido)

    def test_multiples_loggers(self):
        """Verifica que múltiples loggers funcionan independientemente"""
        logger1 = Logger('test_logger1', self.config_file)
        logger2 = Logger('test_logger2', self.config_file)
        try:
            logger1.info("Mensaje de logger1")
            logger2.info("Mensaje de logger2")
            self.assertNotEqual(logger1.log_file, logger2.log_file)
            self.assertIn("Mensaje de logger1", self.leer(logger1))
            self.assertNotIn("Mensaje de logger1", self.leer(logger2))
        finally:
            for logger in (logger1, logger2):
                for handler in logger.logger.handlers:
                    handler.close()


if __name__ == '__main__':
    unittest.main()
