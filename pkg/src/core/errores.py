"""Jerarquía de errores del proyecto"""


class FlowReconError(Exception):
    """Error base de flowrecon"""


class ErrorValidacion(FlowReconError, ValueError):
    """Datos, formas o parámetros que no cumplen las precondiciones"""


class ErrorNumerico(FlowReconError, ArithmeticError):
    """Fallo numérico: pérdidas no finitas, sistemas irresolubles"""


class AdvertenciaRangoDeficiente(UserWarning):
    """El sistema GPOD no tiene rango completo; se usa la solución de norma mínima"""
