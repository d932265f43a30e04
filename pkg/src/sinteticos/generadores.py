"""
Generadores analíticos de campos de velocidad incompresibles.

Todos los campos se construyen a partir de una función de corriente ψ con
u = ∂ψ/∂y y v = -∂ψ/∂x, de modo que su divergencia analítica es nula.
Las derivadas de ψ se evalúan en forma cerrada.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple
import logging
import math

import numpy as np

from ..core.errores import ErrorValidacion
from ..core.malla import FlowSeries, FlowSnapshot, Grid

logger = logging.getLogger(__name__)

TIPOS = ('taylor_green', 'traveling_vortices', 'random_fourier_solenoidal')

# Amplitudes relativas de los armónicos de traveling_vortices
ARMONICOS = (1.0, 0.5, 0.25)


@dataclass(frozen=True)
class FlowRecipe:
    """Receta de un campo sintético"""

    kind: str = 'traveling_vortices'
    amplitude: float = 1.0
    wavenumbers: Tuple[int, int] = (1, 1)
    phase_speed: float = 1.0
    seed: int = 0
    n_modos: int = 8  # solo random_fourier_solenoidal

    def __post_init__(self):
        if not self.amplitude > 0:
            raise ErrorValidacion(f"La amplitud debe ser positiva: {self.amplitude}")
        kx, ky = (int(k) for k in self.wavenumbers)
        if kx < 1 or ky < 1:
            raise ErrorValidacion(f"Los números de onda deben ser >= 1: {self.wavenumbers}")
        object.__setattr__(self, 'wavenumbers', (kx, ky))

    def periodo(self) -> float:
        """Periodo temporal de la receta (inf si el campo es estacionario)"""
        if self.phase_speed == 0:
            return math.inf
        if self.kind == 'traveling_vortices':
            return 2 * math.pi / (self.wavenumbers[0] * abs(self.phase_speed))
        return 2 * math.pi / abs(self.phase_speed)


def _taylor_green(receta: FlowRecipe, X, Y, t):
    A = receta.amplitude
    kx, ky = receta.wavenumbers
    f = math.cos(receta.phase_speed * t)
    u = A * np.cos(kx * X) * np.sin(ky * Y) * f
    v = -A * (kx / ky) * np.sin(kx * X) * np.cos(ky * Y) * f
    return u, v


def _traveling_vortices(receta: FlowRecipe, X, Y, t, fases):
    A = receta.amplitude
    kx, ky = receta.wavenumbers
    c = receta.phase_speed
    u = np.zeros_like(X)
    v = np.zeros_like(X)
    for h, (a, fase) in enumerate(zip(ARMONICOS, fases), start=1):
        theta = h * kx * (X - c * t) + fase
        # ψ_h = (A a / ky) sin(θ) sin(h ky y)
        u += A * a * h * np.sin(theta) * np.cos(h * ky * Y)
        v -= A * a * h * (kx / ky) * np.cos(theta) * np.sin(h * ky * Y)
    return u, v


def _random_fourier(receta: FlowRecipe, X, Y, t, modos):
    u = np.zeros_like(X)
    v = np.zeros_like(X)
    for p, q, a, fase, n in modos:
        norma = math.hypot(p, q)
        theta = p * X + q * Y + fase - n * receta.phase_speed * t
        # ψ_k = (a / |k|) sin(θ)
        u += (a * q / norma) * np.cos(theta)
        v -= (a * p / norma) * np.cos(theta)
    return u, v


def _modos_aleatorios(receta: FlowRecipe, rng: np.random.Generator):
    kx_max, ky_max = receta.wavenumbers
    modos = []
    for _ in range(receta.n_modos):
        p = int(rng.integers(1, kx_max + 1))
        q = int(rng.integers(1, ky_max + 1))
        a = receta.amplitude * rng.standard_normal() / math.hypot(p, q)
        fase = rng.uniform(0.0, 2 * math.pi)
        n = int(rng.integers(1, 4))
        modos.append((p, q, a, fase, n))
    return modos


def generate(recipe: FlowRecipe, grid: Grid, times: Sequence[float]) -> FlowSeries:
    """
    Genera una serie de campos sin divergencia analítica

    Args:
        recipe: Receta del campo
        grid: Malla
        times: Instantes (no vacío); el k-ésimo recibe time_index k

    Returns:
        Serie de K = len(times) instantáneas
    """
    if recipe.kind not in TIPOS:
        raise ErrorValidacion(f"Tipo de receta desconocido: {recipe.kind}")
    times = list(times)
    if not times:
        raise ErrorValidacion("Se necesita al menos un instante")

    rng = np.random.default_rng(recipe.seed)
    X, Y = grid.coordenadas()

    if recipe.kind == 'taylor_green':
        campo = lambda t: _taylor_green(recipe, X, Y, t)
    elif recipe.kind == 'traveling_vortices':
        fases = rng.uniform(0.0, 2 * math.pi, size=len(ARMONICOS))
        campo = lambda t: _traveling_vortices(recipe, X, Y, t, fases)
    else:
        modos = _modos_aleatorios(recipe, rng)
        campo = lambda t: _random_fourier(recipe, X, Y, t, modos)

    instantaneas = []
    for k, t in enumerate(times):
        u, v = campo(float(t))
        instantaneas.append(FlowSnapshot(grid, u, v, k))

    logger.info(f"Serie sintética '{recipe.kind}' generada: {len(times)} instantáneas en malla {grid.nx}x{grid.ny}")
    return FlowSeries(grid, tuple(instantaneas))


def default_times(steps: int, recipe: FlowRecipe, n_periodos: float = 17.3) -> np.ndarray:
    """
    Instantes equiespaciados que cubren `n_periodos` periodos de la receta

    Args:
        steps: Número de instantes
        recipe: Receta (define el periodo)
        n_periodos: Periodos cubiertos; no entero para no repetir fases exactas
    """
    periodo = recipe.periodo()
    if math.isinf(periodo):
        return np.arange(steps, dtype=np.float64)
    return np.linspace(0.0, n_periodos * periodo, steps, endpoint=False)


def default_grid(nx: int, ny: int) -> Grid:
    """Malla isótropa con dominio horizontal [0, 2π]"""
    h = 2 * math.pi / (nx - 1)
    return Grid(nx, ny, h, h)
