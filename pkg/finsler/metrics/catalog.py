import logging
import math
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy import optimize

from finsler.config import MetricConfig, get_default_seed
from finsler.errors import DomainError, InvalidParameterError
from finsler.expressions import Expression
from finsler.metrics.conformal import ConformalMetric
from finsler.metrics.custom import CustomMetric
from finsler.metrics.interface import MetricSpec, euclidean_square
from finsler.metrics.randers import RandersMetric
from finsler.metrics.riemannian import RiemannianMetric
from finsler.tensors import TangentPoint

logger = logging.getLogger(__name__)

CATALOG_NAMES = ('euclidean', 'sphere', 'hyperbolic', 'funk', 'randers', 'perturbed_randers',
                 'riemannian', 'custom', 'conformal')


def euclidean(n: int = 2) -> RiemannianMetric:
    return RiemannianMetric('euclidean', n, lambda x: 1.0,
                            config=MetricConfig(kind='euclidean', dimension=n))


def sphere(n: int = 2, curvature: float = 1.0) -> RiemannianMetric:
    """Stereographic chart of the round sphere, a_ij = 4 delta_ij / (1 + k|x|^2)^2."""
    k = float(curvature)
    if k <= 0:
        raise InvalidParameterError(f"sphere curvature must be positive, got {k}")

    def coefficients(x):
        return 4.0 / (1.0 + k * euclidean_square(x)) ** 2

    return RiemannianMetric('sphere', n, coefficients, sample_radius=1.0 / math.sqrt(k),
                            config=MetricConfig(kind='sphere', dimension=n, params={'curvature': k}))


def hyperbolic(n: int = 2, curvature: float = -1.0) -> RiemannianMetric:
    """Poincare ball of curvature c < 0, a_ij = 4 delta_ij / (1 + c|x|^2)^2."""
    c = float(curvature)
    if c >= 0:
        raise InvalidParameterError(f"hyperbolic curvature must be negative, got {c}")

    def coefficients(x):
        return 4.0 / (1.0 + c * euclidean_square(x)) ** 2

    return RiemannianMetric('hyperbolic', n, coefficients, domain_radius=1.0 / math.sqrt(-c),
                            config=MetricConfig(kind='hyperbolic', dimension=n, params={'curvature': c}))


def funk(n: int = 2) -> RandersMetric:
    """Funk metric of the unit ball written in Randers form."""

    def a(x):
        d = 1.0 - euclidean_square(x)
        d2 = d * d
        return [[((d if i == j else 0.0) + x[i] * x[j]) / d2 for j in range(n)] for i in range(n)]

    def b(x):
        d = 1.0 - euclidean_square(x)
        return [x[i] / d for i in range(n)]

    return RandersMetric('funk', n, a, b, domain_radius=1.0,
                         config=MetricConfig(kind='funk', dimension=n))


def _scalar_function(value, n: int):
    if isinstance(value, (int, float)):
        constant = float(value)
        return lambda x: constant
    return Expression(value, n, allow=('x',))


def _matrix_function(value, n: int):
    """None -> identity; scalar/expression -> lambda(x) * identity; nested list -> a_ij(x)."""
    if value is None:
        return None
    if isinstance(value, (list, tuple)):
        if len(value) != n or any(len(row) != n for row in value):
            raise InvalidParameterError(f"Coefficient matrix must be {n} x {n}")
        entries = [[_scalar_function(v, n) for v in row] for row in value]
        return lambda x: [[f(x) for f in row] for row in entries]
    return _scalar_function(value, n)


def _vector_function(value, n: int):
    if not isinstance(value, (list, tuple)) or len(value) != n:
        raise InvalidParameterError(f"One-form b must have {n} components, got {value!r}")
    entries = [_scalar_function(v, n) for v in value]
    return lambda x: [f(x) for f in entries]


def randers(n: int = 2, a=None, b=None, name: str = 'randers', domain_radius: Optional[float] = None) -> RandersMetric:
    if b is None:
        raise InvalidParameterError("randers metric needs a one-form 'b'")
    params = {'a': a, 'b': list(b)} if a is not None else {'b': list(b)}
    return RandersMetric(name, n, _matrix_function(a, n), _vector_function(list(b), n), domain_radius=domain_radius,
                         config=MetricConfig(kind='randers', dimension=n, params=params, domain_radius=domain_radius))


def perturbed_randers(n: int = 3) -> RandersMetric:
    """Flat a with b = (0.3 + 0.2 x2, 0, ...): not of scalar flag curvature when n >= 3."""
    b = ['0.3 + 0.2*x2'] + [0.0] * (n - 1)
    spec = randers(n, b=b, name='perturbed_randers')
    spec.config = MetricConfig(kind='perturbed_randers', dimension=n)
    return spec


def riemannian(n: int = 2, a=None, name: str = 'riemannian', domain_radius: Optional[float] = None) -> RiemannianMetric:
    coefficients = _matrix_function(a, n) or (lambda x: 1.0)
    return RiemannianMetric(name, n, coefficients, domain_radius=domain_radius,
                            config=MetricConfig(kind='riemannian', dimension=n, params={'a': a},
                                                domain_radius=domain_radius))


def custom(n: int = 2, F: str = None, name: str = 'custom', domain_radius: Optional[float] = None,
           riemannian: bool = False) -> CustomMetric:
    if F is None:
        raise InvalidParameterError("custom metric needs an expression 'F'")
    return CustomMetric(name, n, Expression(F, n), domain_radius=domain_radius, riemannian=riemannian,
                        config=MetricConfig(kind='custom', dimension=n, params={'F': F, 'riemannian': riemannian},
                                            domain_radius=domain_radius))


def conformal(n: int = 2, base: Dict[str, Any] = None, phi: str = None, name: str = None) -> ConformalMetric:
    from finsler.metrics.factory import MetricFactory

    if base is None or phi is None:
        raise InvalidParameterError("conformal metric needs 'base' and 'phi'")
    base_spec = MetricFactory.create_metric(base)
    spec = ConformalMetric(base_spec, Expression(phi, base_spec.dimension, allow=('x',)), name=name)
    spec.config = MetricConfig(kind='conformal', dimension=base_spec.dimension, params={'base': base, 'phi': phi})
    return spec


def catalog(name: str, params: Optional[Dict[str, Any]] = None, dimension: Optional[int] = None) -> MetricSpec:
    """Build a validated metric from its catalog name and parameters.

    Without a dimension (argument or 'n' parameter) the builder's own default applies.
    """
    params = dict(params or {})
    if 'n' in params:
        dimension = params.pop('n')
    if dimension is not None:
        params['n'] = int(dimension)
    key = name.strip().lower()
    if key in ('euclidean', 'flat'):
        builder = euclidean
    elif key == 'sphere':
        builder = sphere
    elif key == 'hyperbolic':
        builder = hyperbolic
    elif key == 'funk':
        builder = funk
    elif key == 'randers':
        builder = randers
    elif key == 'perturbed_randers':
        builder = perturbed_randers
    elif key == 'riemannian':
        builder = riemannian
    elif key == 'custom':
        builder = custom
    elif key == 'conformal':
        builder = conformal
    else:
        raise InvalidParameterError(f"Unknown catalog metric '{name}'; available: {', '.join(CATALOG_NAMES)}")
    try:
        return builder(**params)
    except TypeError as e:
        raise InvalidParameterError(f"Invalid parameters for '{key}': {e}")


def sample_points(spec: MetricSpec, count: int, seed: Optional[int] = None,
                  radius: Optional[float] = None) -> List[TangentPoint]:
    """Admissible tangent points, x uniform in a ball and y Gaussian; reproducible for a seed."""
    if count <= 0:
        raise ValueError(f"Sample count must be positive, got {count}")
    rng = np.random.default_rng(get_default_seed() if seed is None else seed)
    radius = spec.sample_radius if radius is None else radius
    if spec.domain_radius:
        radius = min(radius, spec.domain_radius * 0.95)
    n = spec.dimension
    points: List[TangentPoint] = []
    attempts = 0
    while len(points) < count:
        attempts += 1
        if attempts > 50 * count:
            raise DomainError(f"Could not draw {count} admissible points for '{spec.name}'")
        direction = rng.normal(size=n)
        direction /= np.linalg.norm(direction)
        x = radius * rng.uniform() ** (1.0 / n) * direction
        y = rng.normal(size=n)
        tp = TangentPoint(x, y)
        try:
            spec.check_point(tp)
        except DomainError:
            continue
        points.append(tp)
    return points


def funk_implicit_F(x: Sequence[float], y: Sequence[float]) -> float:
    """Funk metric of the unit ball from its defining equation |y + F x| = F."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.linalg.norm(x) >= 1.0:
        raise DomainError(f"x={x.tolist()} lies outside the unit ball")

    def residual(f):
        return np.linalg.norm(y + f * x) - f

    upper = max(1.0, float(np.linalg.norm(y)))
    while residual(upper) > 0:
        upper *= 2.0
    return float(optimize.brentq(residual, 0.0, upper, xtol=1e-15, rtol=4 * np.finfo(float).eps))
