import numpy as np

from finsler import diffengine as fd
from finsler.errors import DomainError, SingularMetricError
from finsler.metrics.interface import MetricSpec
from finsler.tensors import LOWER, UPPER, TangentPoint, Tensor


def eval_F(spec: MetricSpec, tp: TangentPoint) -> float:
    spec.check_point(tp)
    with np.errstate(all='ignore'):
        value = float(spec.F(tp.x, tp.y))
    if not np.isfinite(value) or value <= 0:
        raise DomainError(f"F is not positive at {tp} for metric '{spec.name}' (F={value})")
    return value


def fundamental_matrix(spec: MetricSpec, tp: TangentPoint) -> np.ndarray:
    """g_ij = 1/2 d^2 F^2 / dy^i dy^j from second-order jets."""
    spec.check_point(tp)
    n = spec.dimension
    X, Y = fd.seed_tangent(tp.x, tp.y, 2)
    with np.errstate(all='ignore'):
        f2 = spec.F2(X, Y)
    y_vars = range(n, 2 * n)
    g = 0.5 * f2.grad(y_vars).grad(y_vars).value
    if not np.all(np.isfinite(g)):
        raise DomainError(f"Fundamental tensor is not finite at {tp} for metric '{spec.name}'")
    g = 0.5 * (g + g.T)
    if np.min(np.linalg.eigvalsh(g)) <= 0:
        raise SingularMetricError(f"g_ij is not positive-definite at {tp}: metric '{spec.name}' "
                                  f"is outside its strong-convexity domain")
    return g


def fundamental_tensor(spec: MetricSpec, tp: TangentPoint) -> Tensor:
    return Tensor(fundamental_matrix(spec, tp), (LOWER, LOWER))


def inverse_metric(spec: MetricSpec, tp: TangentPoint) -> Tensor:
    g = fundamental_matrix(spec, tp)
    try:
        ginv = np.linalg.inv(g)
    except np.linalg.LinAlgError as e:
        raise SingularMetricError(f"g_ij is singular at {tp}: {e}")
    return Tensor(0.5 * (ginv + ginv.T), (UPPER, UPPER))


def unit_vector(spec: MetricSpec, tp: TangentPoint) -> np.ndarray:
    """l^i = y^i / F."""
    return tp.y / eval_F(spec, tp)
