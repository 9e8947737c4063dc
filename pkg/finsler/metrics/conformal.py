from typing import Callable

from finsler import diffengine as fd
from finsler.metrics.interface import MetricSpec
from finsler.tensors import TangentPoint


class ConformalMetric(MetricSpec):
    """Conformal change F' = e^phi(x) F of a base metric."""
    kind = 'custom'

    def __init__(self, base: MetricSpec, phi: Callable, name: str = None, **kwargs):
        super().__init__(name or f"conformal({base.name})", base.dimension, domain_radius=base.domain_radius,
                         sample_radius=base.sample_radius, **kwargs)
        self.base = base
        self.phi = phi

    @property
    def is_riemannian(self) -> bool:
        return self.base.is_riemannian

    def F(self, x, y):
        return fd.exp(self.phi(x)) * self.base.F(x, y)

    def F2(self, x, y):
        return fd.exp(2.0 * self.phi(x)) * self.base.F2(x, y)

    def check_point(self, tp: TangentPoint) -> None:
        self.base.check_point(tp)
