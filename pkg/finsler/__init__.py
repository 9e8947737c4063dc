"""Numerical Finsler geometry: connections, curvature, Schwarzian tensors and
geodesic dynamics on user-defined metrics."""
from finsler.errors import FinslerError

__version__ = '0.1.0'

__all__ = ['FinslerError', '__version__']
