"""flowrecon: reconstrucción de flujos a partir de sensores dispersos con GPOD y SCVAE"""
from .core.logger import Logger

__version__ = '0.1.0'

__all__ = ['Logger', '__version__']
