import logging
from typing import Callable, Optional

import numpy as np

from finsler import diffengine as fd
from finsler.errors import DomainError, InvalidParameterError
from finsler.metrics.interface import MetricSpec, euclidean_square, quadratic_form
from finsler.tensors import TangentPoint

logger = logging.getLogger(__name__)

STRONG_CONVEXITY_MARGIN = 1e-9
VALIDATION_POINTS = 64


class RandersMetric(MetricSpec):
    """F = sqrt(a_ij(x) y^i y^j) + b_i(x) y^i with ||b||_a < 1 on the domain."""
    kind = 'randers'

    def __init__(self, name: str, dimension: int, a: Optional[Callable], b: Callable,
                 domain_radius: Optional[float] = None, validate: bool = True, **kwargs):
        super().__init__(name, dimension, domain_radius=domain_radius, **kwargs)
        self.a = a
        self.b = b
        if validate:
            self.validate()

    def alpha2(self, x, y):
        if self.a is None:
            return euclidean_square(y)
        a = self.a(x)
        if isinstance(a, (list, tuple)) or np.ndim(a) == 2:
            return quadratic_form(a, y)
        return a * euclidean_square(y)

    def beta(self, x, y):
        b = self.b(x)
        total = 0.0
        for i in range(self.dimension):
            total = total + b[i] * y[i]
        return total

    def F(self, x, y):
        return fd.sqrt(self.alpha2(x, y)) + self.beta(x, y)

    def F2(self, x, y):
        f = self.F(x, y)
        return f * f

    def a_matrix(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.a is None:
            return np.eye(self.dimension)
        a = self.a(x)
        if isinstance(a, (list, tuple)) or np.ndim(a) == 2:
            return np.asarray(a, dtype=float)
        return float(a) * np.eye(self.dimension)

    def b_norm(self, x) -> float:
        """||b||_a = sqrt(a^ij b_i b_j) at a float point."""
        x = np.asarray(x, dtype=float)
        b = np.asarray(self.b(x), dtype=float)
        a = self.a_matrix(x)
        try:
            value = float(b @ np.linalg.solve(a, b))
        except np.linalg.LinAlgError:
            raise InvalidParameterError(f"Randers metric '{self.name}': a_ij is singular at x={x.tolist()}")
        return float(np.sqrt(max(value, 0.0)))

    def validate(self, seed: int = 0) -> None:
        """Check positive-definite a and ||b||_a < 1 at the origin and sampled chart points."""
        rng = np.random.default_rng(seed)
        radius = (self.domain_radius - 1e-3) if self.domain_radius else self.sample_radius
        directions = rng.normal(size=(VALIDATION_POINTS, self.dimension))
        directions /= np.linalg.norm(directions, axis=1, keepdims=True)
        radii = radius * rng.uniform(size=(VALIDATION_POINTS, 1)) ** (1.0 / self.dimension)
        for x in np.vstack([np.zeros(self.dimension), directions * radii]):
            a = self.a_matrix(x)
            if np.min(np.linalg.eigvalsh(0.5 * (a + a.T))) <= 0:
                raise InvalidParameterError(f"Randers metric '{self.name}': a_ij is not positive-definite at x={x.tolist()}")
            norm = self.b_norm(x)
            if norm >= 1.0 - STRONG_CONVEXITY_MARGIN:
                raise InvalidParameterError(f"Randers metric '{self.name}': ||b||_a = {norm:.6f} >= 1 at x={x.tolist()}")
        logger.debug(f"Randers metric '{self.name}' passed strong convexity validation")

    def check_point(self, tp: TangentPoint) -> None:
        super().check_point(tp)
        norm = self.b_norm(tp.x)
        if norm >= 1.0 - STRONG_CONVEXITY_MARGIN:
            raise DomainError(f"||b||_a = {norm:.6f} >= 1 at x={tp.x.tolist()}; metric '{self.name}' is not strongly convex there")
