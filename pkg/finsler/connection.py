"""Spray, nonlinear connection, Cartan connection coefficients and the
covariant calculus built on them.

Everything at a tangent point is derived from jets of F^2 in the combined
variables (x^1..x^n, y^1..y^n). With jet order K:

    F^2               exact to order K
    g, g^-1, G^i      K - 2
    G^i_j, C, Gamma   K - 3
    delta(Gamma)      K - 4
"""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from finsler import diffengine as fd
from finsler.diffengine import JetArray, jet_einsum
from finsler.errors import DomainError, NonConvergenceError, SingularMetricError
from finsler.expressions import Expression
from finsler.metrics.interface import MetricSpec
from finsler.metrics.operations import fundamental_matrix
from finsler.tensors import LOWER, UPPER, TangentPoint, Tensor

logger = logging.getLogger(__name__)

SPRAY_ORDER = 2
CONNECTION_ORDER = 3
CURVATURE_ORDER = 4

GRADIENT_DAMPING = 0.5
GRADIENT_TOLERANCE = 1e-12
GRADIENT_MAX_ITERATIONS = 200


class ScalarField:
    """Smooth real function of x, evaluated on floats or jets."""

    def __init__(self, function: Callable, dimension: int, gradient: Optional[Callable] = None, name: str = None):
        self.function = function
        self.dimension = dimension
        self.analytic_gradient = gradient
        self.name = name or getattr(function, 'text', 'h')

    @classmethod
    def from_expression(cls, text: str, dimension: int) -> 'ScalarField':
        return cls(Expression(text, dimension, allow=('x',)), dimension, name=text)

    @classmethod
    def constant(cls, value: float, dimension: int) -> 'ScalarField':
        return cls(lambda x: float(value), dimension, name=str(value))

    def __repr__(self) -> str:
        return f"ScalarField('{self.name}', n={self.dimension})"

    def __call__(self, x):
        return self.function(x)

    def jets(self, x: Sequence[float], order: int) -> JetArray:
        return fd.taylor(self.function, x, order)

    def value(self, x) -> float:
        return float(self.function(np.asarray(x, dtype=float)))

    def gradient(self, x) -> np.ndarray:
        """h_i = dh/dx^i."""
        if self.analytic_gradient is not None:
            return np.asarray(self.analytic_gradient(np.asarray(x, dtype=float)), dtype=float)
        return self.jets(x, 1).grad(range(self.dimension)).value

    def hessian(self, x) -> np.ndarray:
        vars_ = range(self.dimension)
        return self.jets(x, 2).grad(vars_).grad(vars_).value


class TensorField:
    """Components as a function of (x, y) with one variance label per slot."""

    def __init__(self, function: Callable, variance: Tuple[str, ...] = (), name: str = 'T'):
        self.function = function
        self.variance = tuple(variance)
        self.name = name

    def __repr__(self) -> str:
        return f"TensorField('{self.name}', {''.join(self.variance) or 'scalar'})"

    def jets(self, spec: MetricSpec, tp: TangentPoint, order: int) -> JetArray:
        X, Y = fd.seed_tangent(tp.x, tp.y, order)
        with np.errstate(all='ignore'):
            out = fd.as_array(self.function(X, Y))
        if not isinstance(out, JetArray):
            out = JetArray.constant(X.algebra, out)
        return out


class FundamentalTensorField(TensorField):
    """g_ij of a metric, usable wherever a tensor field is expected."""

    def __init__(self):
        super().__init__(None, (LOWER, LOWER), name='g')

    def jets(self, spec: MetricSpec, tp: TangentPoint, order: int) -> JetArray:
        return PointJets(spec, tp, order + 2).g


def metric_field() -> FundamentalTensorField:
    return FundamentalTensorField()


def scalar_as_tensor_field(h: ScalarField) -> TensorField:
    return TensorField(lambda x, y: h(x), (), name=h.name)


class PointJets:
    """Per-point cache of jets of every connection quantity.

    Quantities are computed on first access and reused within one tangent point.
    """

    def __init__(self, spec: MetricSpec, tp: TangentPoint, order: int = CURVATURE_ORDER):
        spec.check_point(tp)
        self.spec = spec
        self.tp = tp
        self.order = order
        self.n = spec.dimension
        self.x_vars = range(self.n)
        self.y_vars = range(self.n, 2 * self.n)
        self.X, self.Y = fd.seed_tangent(tp.x, tp.y, order)

    def __repr__(self) -> str:
        return f"PointJets({self.spec.name}, {self.tp}, order={self.order})"

    @cached_property
    def F2(self) -> JetArray:
        with np.errstate(all='ignore'):
            f2 = self.spec.F2(self.X, self.Y)
        if not isinstance(f2, JetArray):
            f2 = JetArray.constant(self.X.algebra, f2)
        if not np.all(np.isfinite(f2.c)) or f2.value <= 0:
            raise DomainError(f"F^2 is not finite and positive at {self.tp} for metric '{self.spec.name}'")
        return f2

    @cached_property
    def g(self) -> JetArray:
        g = 0.5 * self.F2.grad(self.y_vars).grad(self.y_vars)
        g = 0.5 * (g + g.T)
        if np.min(np.linalg.eigvalsh(g.value)) <= 0:
            raise SingularMetricError(f"g_ij is not positive-definite at {self.tp}: metric '{self.spec.name}' "
                                      f"is outside its strong-convexity domain")
        return g

    @cached_property
    def ginv(self) -> JetArray:
        return fd.inv(self.g)

    @cached_property
    def spray(self) -> JetArray:
        """G^i = 1/4 g^il ([F^2]_{x^k y^l} y^k - [F^2]_{x^l})."""
        f2_yx = self.F2.grad(self.y_vars).grad(self.x_vars)
        term = jet_einsum('lk,k->l', f2_yx, self.Y) - self.F2.grad(self.x_vars)
        return 0.25 * jet_einsum('il,l->i', self.ginv, term)

    @cached_property
    def N(self) -> JetArray:
        """G^i_j = dG^i / dy^j."""
        return self.spray.grad(self.y_vars)

    def delta(self, T: JetArray) -> JetArray:
        """delta T / delta x^k appended as the last tensor axis."""
        return T.grad(self.x_vars) - jet_einsum('...m,mk->...k', T.grad(self.y_vars), self.N)

    def vertical(self, T: JetArray) -> JetArray:
        return T.grad(self.y_vars)

    @cached_property
    def C_lower(self) -> JetArray:
        """C_ijk = 1/2 dg_ij / dy^k."""
        return 0.5 * self.g.grad(self.y_vars)

    @cached_property
    def C(self) -> JetArray:
        return jet_einsum('il,ljk->ijk', self.ginv, self.C_lower)

    @cached_property
    def Gamma_lower(self) -> JetArray:
        """Gamma_ljk = 1/2 (delta_j g_lk + delta_k g_jl - delta_l g_jk)."""
        dg = self.delta(self.g)
        return 0.5 * (dg.transpose(0, 2, 1) + dg.transpose(1, 0, 2) - dg.transpose(2, 0, 1))

    @cached_property
    def Gamma(self) -> JetArray:
        return jet_einsum('il,ljk->ijk', self.ginv, self.Gamma_lower)

    @cached_property
    def christoffel(self) -> np.ndarray:
        """Formal Christoffel symbols: partial x-derivatives of g at fixed y."""
        pg = self.g.grad(self.x_vars).value
        lower = 0.5 * (pg.transpose(0, 2, 1) + pg.transpose(1, 0, 2) - pg.transpose(2, 0, 1))
        return np.einsum('il,ljk->ijk', self.ginv.value, lower)


@dataclass(frozen=True)
class ConnectionData:
    spray: np.ndarray
    nonlinear: np.ndarray
    gamma: np.ndarray
    cartan: np.ndarray
    cartan_lower: np.ndarray
    christoffel: np.ndarray


def spray(spec: MetricSpec, tp: TangentPoint) -> np.ndarray:
    """G^i(x, y)."""
    return PointJets(spec, tp, SPRAY_ORDER).spray.value


def nonlinear_connection(spec: MetricSpec, tp: TangentPoint) -> Tensor:
    return Tensor(PointJets(spec, tp, CONNECTION_ORDER).N.value, (UPPER, LOWER))


def delta_x(spec: MetricSpec, f: Callable, tp: TangentPoint, k: int) -> float:
    """delta f / delta x^k = df/dx^k - G^j_k df/dy^j for f(x, y)."""
    jets = PointJets(spec, tp, CONNECTION_ORDER)
    N = jets.N.value
    X, Y = fd.seed_tangent(tp.x, tp.y, 1)
    with np.errstate(all='ignore'):
        out = f(X, Y)
    if not isinstance(out, JetArray):
        return 0.0
    n = spec.dimension
    dx = out.grad(range(n)).value
    dy = out.grad(range(n, 2 * n)).value
    value = float(dx[k] - dy @ N[:, k])
    if not np.isfinite(value):
        raise DomainError(f"delta derivative is not finite at {tp}")
    return value


def cartan_coefficients(spec: MetricSpec, tp: TangentPoint, jets: Optional[PointJets] = None) -> ConnectionData:
    jets = jets or PointJets(spec, tp, CONNECTION_ORDER)
    return ConnectionData(
        spray=jets.spray.value,
        nonlinear=jets.N.value,
        gamma=jets.Gamma.value,
        cartan=jets.C.value,
        cartan_lower=jets.C_lower.value,
        christoffel=jets.christoffel,
    )


def _slot_corrections(components: np.ndarray, variance: Sequence[str], coefficients: np.ndarray) -> np.ndarray:
    """Sum over slots of +coeff^a_rk T^..r.. (upper) and -coeff^r_ak T_..r.. (lower), k appended last."""
    total = np.zeros(components.shape + (coefficients.shape[-1],))
    for slot, label in enumerate(variance):
        if label == UPPER:
            term = np.tensordot(components, coefficients, axes=([slot], [1]))
            total += np.moveaxis(term, -2, slot)
        else:
            term = np.tensordot(components, coefficients, axes=([slot], [0]))
            total -= np.moveaxis(term, -2, slot)
    return total


def h_covariant(spec: MetricSpec, T: TensorField, tp: TangentPoint) -> Tensor:
    """Cartan horizontal covariant derivative; the new lower slot comes last."""
    jets = PointJets(spec, tp, CONNECTION_ORDER)
    field = T.jets(spec, tp, 1)
    N = jets.N.value
    dT = field.grad(jets.x_vars).value - np.einsum('...m,mk->...k', field.grad(jets.y_vars).value, N)
    result = dT + _slot_corrections(field.value, T.variance, jets.Gamma.value)
    return Tensor(result, T.variance + (LOWER,))


def v_covariant(spec: MetricSpec, T: TensorField, tp: TangentPoint) -> Tensor:
    """Cartan vertical covariant derivative with C-terms; the new lower slot comes last."""
    jets = PointJets(spec, tp, CONNECTION_ORDER)
    field = T.jets(spec, tp, 1)
    result = field.grad(jets.y_vars).value + _slot_corrections(field.value, T.variance, jets.C.value)
    return Tensor(result, T.variance + (LOWER,))


def gradient(spec: MetricSpec, h: ScalarField, x: Sequence[float]) -> np.ndarray:
    """grad h at x: the fixed point v = g^-1(x, v) dh, zero where dh vanishes."""
    x = np.asarray(x, dtype=float)
    dh = h.gradient(x)
    if float(np.linalg.norm(dh)) < 1e-14:
        return np.zeros_like(dh)
    if spec.is_riemannian:
        g = fundamental_matrix(spec, TangentPoint(x, dh))
        return np.linalg.solve(g, dh)

    v = dh.copy()
    for iteration in range(1, GRADIENT_MAX_ITERATIONS + 1):
        target = np.linalg.solve(fundamental_matrix(spec, TangentPoint(x, v)), dh)
        updated = (1.0 - GRADIENT_DAMPING) * v + GRADIENT_DAMPING * target
        step = float(np.linalg.norm(updated - v))
        v = updated
        if step <= GRADIENT_TOLERANCE * (1.0 + float(np.linalg.norm(v))):
            residual = float(np.linalg.norm(v - np.linalg.solve(fundamental_matrix(spec, TangentPoint(x, v)), dh)))
            logger.debug(f"gradient fixed point converged in {iteration} iterations, residual {residual:.3e}")
            if residual <= 1e-10 * (1.0 + float(np.linalg.norm(v))):
                return v
            break
    raise NonConvergenceError(f"gradient fixed point did not converge at x={x.tolist()} for metric '{spec.name}'")


def _hessian_matrix(jets: PointJets, h: ScalarField) -> np.ndarray:
    x = jets.tp.x
    dh = h.gradient(x)
    coefficients = jets.Gamma.value + jets.C.value
    hess = h.hessian(x) - np.einsum('kij,k->ij', coefficients, dh)
    return hess


def hessian(spec: MetricSpec, h: ScalarField, tp: TangentPoint) -> Tensor:
    """Hess(h)_ij = d^2h/dx^i dx^j - (Gamma^k_ij + C^k_ij) dh/dx^k at (x, y)."""
    return Tensor(_hessian_matrix(PointJets(spec, tp, CONNECTION_ORDER), h), (LOWER, LOWER))


def laplacian(spec: MetricSpec, h: ScalarField, tp: TangentPoint) -> float:
    jets = PointJets(spec, tp, CONNECTION_ORDER)
    return float(np.einsum('ij,ij->', jets.ginv.value, _hessian_matrix(jets, h)))


def _vector_jets(Y: Callable, x: np.ndarray) -> JetArray:
    return fd.taylor(lambda v: fd.as_array(list(Y(v))), x, 1)


def div_h(spec: MetricSpec, Y: Callable, tp: TangentPoint) -> float:
    """dY^i/dx^i + Gamma^i_ij Y^j for a vector field Y(x)."""
    jets = PointJets(spec, tp, CONNECTION_ORDER)
    field = _vector_jets(Y, tp.x)
    divergence = np.trace(field.grad(range(spec.dimension)).value)
    return float(divergence + np.einsum('iij,j->', jets.Gamma.value, field.value))


def div_v(spec: MetricSpec, Y: Callable, tp: TangentPoint) -> float:
    """C^i_ij Y^j."""
    jets = PointJets(spec, tp, CONNECTION_ORDER)
    values = np.asarray(list(Y(np.asarray(tp.x, dtype=float))), dtype=float)
    return float(np.einsum('iij,j->', jets.C.value, values))
