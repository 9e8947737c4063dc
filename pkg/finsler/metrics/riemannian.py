from typing import Callable, Optional

import numpy as np

from finsler.metrics.interface import MetricSpec, euclidean_square, quadratic_form


class RiemannianMetric(MetricSpec):
    """F^2 = a_ij(x) y^i y^j.

    `coefficients(x)` returns either an n x n nested list or a single scalar
    lambda(x), read as lambda(x) * identity.
    """
    kind = 'riemannian'

    def __init__(self, name: str, dimension: int, coefficients: Callable, domain_radius: Optional[float] = None,
                 **kwargs):
        super().__init__(name, dimension, domain_radius=domain_radius, **kwargs)
        self.coefficients = coefficients

    @property
    def is_riemannian(self) -> bool:
        return True

    def F2(self, x, y):
        a = self.coefficients(x)
        if isinstance(a, (list, tuple)) or np.ndim(a) == 2:
            return quadratic_form(a, y)
        return a * euclidean_square(y)

    def matrix(self, x) -> np.ndarray:
        """a_ij at a float point x."""
        a = self.coefficients(np.asarray(x, dtype=float))
        if isinstance(a, (list, tuple)) or np.ndim(a) == 2:
            return np.asarray(a, dtype=float)
        return float(a) * np.eye(self.dimension)
