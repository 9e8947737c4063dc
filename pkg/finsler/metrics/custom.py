from typing import Callable, Optional

from finsler.metrics.interface import MetricSpec


class CustomMetric(MetricSpec):
    """Metric given directly by F(x, y), positively 1-homogeneous in y."""
    kind = 'custom'

    def __init__(self, name: str, dimension: int, function: Callable, domain_radius: Optional[float] = None,
                 riemannian: bool = False, **kwargs):
        super().__init__(name, dimension, domain_radius=domain_radius, **kwargs)
        self.function = function
        self._riemannian = riemannian

    @property
    def is_riemannian(self) -> bool:
        return self._riemannian

    def F(self, x, y):
        return self.function(x, y)

    def F2(self, x, y):
        f = self.function(x, y)
        return f * f
