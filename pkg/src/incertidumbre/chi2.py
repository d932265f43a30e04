"""Cuantiles de la distribución χ²"""

import math

from scipy.optimize import brentq
from scipy.special import gammainc

from ..core.errores import ErrorValidacion

TOLERANCIA = 1e-10


def chi2_quantile(p: float, k: int) -> float:
    """
    Cuantil χ²_k(p) por inversión acotada de la gamma incompleta regularizada

    La CDF es P(k/2, x/2); se busca su raíz en [0, b] con b duplicado hasta
    encerrar p, con tolerancia absoluta 1e-10.

    Args:
        p: Probabilidad en (0, 1)
        k: Grados de libertad (>= 1)
    """
    if not 0 < p < 1:
        raise ErrorValidacion(f"La probabilidad debe estar en (0, 1) (recibido {p})")
    if int(k) < 1:
        raise ErrorValidacion(f"Los grados de libertad deben ser >= 1 (recibido {k})")
    a = 0.5 * int(k)

    def f(x):
        return gammainc(a, 0.5 * x) - p

    superior = k + 10.0 * math.sqrt(2.0 * k) + 10.0
    while f(superior) < 0:
        superior *= 2.0
    return float(brentq(f, 0.0, superior, xtol=TOLERANCIA))
