"""Optimizador Adam con corrección de sesgo"""

from dataclasses import dataclass, field
from typing import Dict

import numpy as np

from .parametros import ParamStore


@dataclass
class AdamState:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: ParamStore) -> None:
    """
    Aplica un paso de Adam con los gradientes acumulados en `params`,
    los pone a cero e incrementa la versión de los parámetros
    """
    state.step += 1
    t = state.step
    corr1 = 1.0 - state.beta1 ** t
    corr2 = 1.0 - state.beta2 ** t
    for nombre in params.nombres():
        g = params.grads[nombre]
        if nombre not in state.m:
            state.m[nombre] = np.zeros_like(g)
            state.v[nombre] = np.zeros_like(g)
        m = state.m[nombre]
        v = state.v[nombre]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        params.valores[nombre] -= state.learning_rate * (m / corr1) / (np.sqrt(v / corr2) + state.epsilon)
    params.zero_grad()
    params.version += 1
