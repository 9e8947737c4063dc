from abc import ABC, abstractmethod
from typing import Any, Dict, Optional

import numpy as np

from finsler import diffengine as fd
from finsler.config import MetricConfig
from finsler.errors import DomainError
from finsler.tensors import MIN_TANGENT_NORM, TangentPoint

BOUNDARY_MARGIN = 1e-6


def quadratic_form(a, y):
    """sum_ij a_ij y^i y^j for a nested (n x n) list of scalars or jets."""
    n = len(y)
    total = 0.0
    for i in range(n):
        total = total + a[i][i] * y[i] * y[i]
        for j in range(i + 1, n):
            total = total + 2.0 * a[i][j] * y[i] * y[j]
    return total


def euclidean_square(y):
    total = 0.0
    for i in range(len(y)):
        total = total + y[i] * y[i]
    return total


class MetricSpec(ABC):
    """A Finsler metric on one coordinate chart.

    Subclasses supply F^2 as a function of (x, y) built from operations that
    accept floats, arrays and jets alike.
    """
    kind = 'custom'

    def __init__(self, name: str, dimension: int, domain_radius: Optional[float] = None,
                 sample_radius: Optional[float] = None, config: Optional[MetricConfig] = None):
        if dimension < 2:
            raise ValueError(f"Metric dimension must be at least 2, got {dimension}")
        self.name = name
        self.dimension = dimension
        self.domain_radius = domain_radius
        if sample_radius is None:
            sample_radius = 0.5 * domain_radius if domain_radius else 1.0
        self.sample_radius = sample_radius
        self.config = config

    def __repr__(self) -> str:
        return f"{type(self).__name__}(name='{self.name}', n={self.dimension})"

    @abstractmethod
    def F2(self, x, y):
        """Squared Finsler function F(x, y)^2."""
        pass

    def F(self, x, y):
        return fd.sqrt(self.F2(x, y))

    @property
    def is_riemannian(self) -> bool:
        return False

    def in_domain(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)):
            return False
        if self.domain_radius is None:
            return True
        return float(np.linalg.norm(x)) < self.domain_radius - BOUNDARY_MARGIN

    def check_point(self, tp: TangentPoint) -> None:
        """Raise DomainError unless tp is admissible for this metric."""
        if tp.dimension != self.dimension:
            raise DomainError(f"Point of dimension {tp.dimension} used with {self.dimension}-dimensional metric '{self.name}'")
        if float(np.linalg.norm(tp.y)) < MIN_TANGENT_NORM:
            raise DomainError(f"|y| = {np.linalg.norm(tp.y):.3e} is below {MIN_TANGENT_NORM}")
        if not self.in_domain(tp.x):
            raise DomainError(f"x={tp.x.tolist()} is outside the chart of '{self.name}' "
                              f"(radius {self.domain_radius}, margin {BOUNDARY_MARGIN})")

    def describe(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'kind': self.kind,
            'dimension': self.dimension,
            'domain_radius': self.domain_radius,
        }
