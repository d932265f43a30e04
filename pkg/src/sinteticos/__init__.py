"""Generadores de flujos sintéticos sin divergencia"""
from .generadores import FlowRecipe, generate, default_times, default_grid, TIPOS

__all__ = [
    'FlowRecipe',
    'generate',
    'default_times',
    'default_grid',
    'TIPOS'
]
