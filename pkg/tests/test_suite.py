import unittest
from tests.test_core import (TestMalla, TestMuestreo, TestDivergencia, TestEscalado,
                             TestParticion, TestAccesos, TestContenedor)
from tests.test_sinteticos import TestGeneradores
from tests.test_red import (TestFormas, TestConvolucion, TestGradientes, TestCinta,
                            TestAdam, TestSerializacion)
from tests.test_pod_gpod import TestPod, TestGpod, TestSeleccion, TestModeloGpod
from tests.test_scvae import TestObjetivo, TestPesosAdaptativos, TestEntrenamiento
from tests.test_incertidumbre import TestChi2, TestResumen, TestMuestras
from tests.test_metricas import TestMetricas, TestMetricasManager
from tests.test_experimentos import TestPlan, TestAgregacion, TestExperimento
from tests.test_cli import TestCli, TestCrearDirectorios
from tests.test_logger import TestLogger
from src.core.logger import Logger

logger = Logger('test_suite')

if __name__ == '__main__':
    logger.info("Iniciando Suite Principal")

    suite = unittest.TestSuite()
    loader = unittest.TestLoader()

    # Agregar tests en orden: de los bloques básicos a la línea de comandos
    for caso in (TestMalla, TestMuestreo, TestDivergencia, TestEscalado, TestParticion, TestAccesos,
                 TestContenedor,
                 TestGeneradores,
                 TestFormas, TestConvolucion, TestGradientes, TestCinta, TestAdam, TestSerializacion,
                 TestPod, TestGpod, TestSeleccion, TestModeloGpod,
                 TestObjetivo, TestPesosAdaptativos, TestEntrenamiento,
                 TestChi2, TestResumen, TestMuestras,
                 TestMetricas, TestMetricasManager,
                 TestPlan, TestAgregacion, TestExperimento,
                 TestCli, TestCrearDirectorios, TestLogger):
        suite.addTests(loader.loadTestsFromTestCase(caso))

    # Ejecutar suite
    runner = unittest.TextTestRunner(verbosity=2)
    result = runner.run(suite)

    # Registrar resultado
    status = 'OK' if result.wasSuccessful() else 'FAIL'
    logger.info(f"Suite Principal: {status}")
