from finsler.metrics.interface import MetricSpec
from finsler.metrics.riemannian import RiemannianMetric
from finsler.metrics.randers import RandersMetric
from finsler.metrics.custom import CustomMetric
from finsler.metrics.conformal import ConformalMetric
from finsler.metrics.catalog import (CATALOG_NAMES, catalog, conformal, custom, euclidean, funk, funk_implicit_F,
                                     hyperbolic, perturbed_randers, randers, riemannian, sample_points, sphere)
from finsler.metrics.factory import MetricFactory
from finsler.metrics.operations import eval_F, fundamental_matrix, fundamental_tensor, inverse_metric, unit_vector

__all__ = [
    'MetricSpec', 'RiemannianMetric', 'RandersMetric', 'CustomMetric', 'ConformalMetric', 'MetricFactory',
    'CATALOG_NAMES', 'catalog', 'conformal', 'custom', 'euclidean', 'funk', 'funk_implicit_F', 'hyperbolic',
    'perturbed_randers', 'randers', 'riemannian', 'sample_points', 'sphere',
    'eval_F', 'fundamental_matrix', 'fundamental_tensor', 'inverse_metric', 'unit_vector',
]
