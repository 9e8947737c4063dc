"""Truncated Taylor-polynomial (jet) arithmetic and a finite-difference oracle.

A JetArray holds, for every entry of a tensor-shaped array, the Taylor
coefficients c_a = (d^a f)(x0) / a! for all multi-indices |a| <= order of the
algebra. Coefficients live on the last axis; leading axes are tensor slots.
"""
import math
import logging
from functools import lru_cache
from itertools import product
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from finsler.config import get_max_order
from finsler.errors import DomainError, OrderOverflowError, SingularMetricError

logger = logging.getLogger(__name__)

MultiIndex = Tuple[int, ...]

_EPS = np.finfo(float).eps

# Central stencils (offsets in units of h, weights) accurate to O(h^2).
_STENCILS = {
    1: ((-1, 0, 1), (-0.5, 0.0, 0.5)),
    2: ((-1, 0, 1), (1.0, -2.0, 1.0)),
    3: ((-2, -1, 0, 1, 2), (-0.5, 1.0, 0.0, -1.0, 0.5)),
    4: ((-2, -1, 0, 1, 2), (1.0, -4.0, 6.0, -4.0, 1.0)),
}


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for first in range(total, -1, -1):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


class JetAlgebra:
    """Multiplication tables for jets in `nvars` variables truncated at `order`."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        self.monomials: List[MultiIndex] = []
        for degree in range(order + 1):
            self.monomials.extend(_compositions(degree, nvars))
        self.index = {m: k for k, m in enumerate(self.monomials)}
        self.size = len(self.monomials)
        self.degrees = np.array([sum(m) for m in self.monomials])
        self.factorials = np.array([math.prod(math.factorial(a) for a in m) for m in self.monomials], dtype=float)

        left, right, target = [], [], []
        for a, ma in enumerate(self.monomials):
            room = order - self.degrees[a]
            for b, mb in enumerate(self.monomials):
                if self.degrees[b] > room:
                    break
                left.append(a)
                right.append(b)
                target.append(self.index[tuple(p + q for p, q in zip(ma, mb))])
        self.left = np.array(left, dtype=np.intp)
        self.right = np.array(right, dtype=np.intp)
        self.scatter = np.zeros((len(left), self.size))
        self.scatter[np.arange(len(left)), target] = 1.0

        # d/dv maps coefficient of a + e_v (times a_v + 1) onto a
        self.shift_source = np.zeros((nvars, self.size), dtype=np.intp)
        self.shift_factor = np.zeros((nvars, self.size))
        for v in range(nvars):
            for k, m in enumerate(self.monomials):
                raised = m[:v] + (m[v] + 1,) + m[v + 1:]
                if raised in self.index:
                    self.shift_source[v, k] = self.index[raised]
                    self.shift_factor[v, k] = m[v] + 1

    def __repr__(self) -> str:
        return f"JetAlgebra(nvars={self.nvars}, order={self.order}, size={self.size})"

    def unit(self, v: int) -> int:
        return self.index[tuple(1 if k == v else 0 for k in range(self.nvars))]


@lru_cache(maxsize=None)
def _build_algebra(nvars: int, order: int) -> JetAlgebra:
    logger.debug(f"Building jet algebra nvars={nvars} order={order}")
    return JetAlgebra(nvars, order)


def get_algebra(nvars: int, order: int) -> JetAlgebra:
    max_order = get_max_order()
    if order > max_order:
        raise OrderOverflowError(f"Derivative order {order} exceeds the engine maximum {max_order}")
    if order < 0 or nvars < 1:
        raise ValueError(f"Invalid jet algebra request: nvars={nvars}, order={order}")
    return _build_algebra(nvars, order)


class JetArray:
    """Tensor-shaped array of truncated Taylor polynomials.

    `valid` is the highest total order whose coefficients are exact; it drops
    by one with every differentiation.
    """
    __array_ufunc__ = None

    def __init__(self, algebra: JetAlgebra, coeffs: np.ndarray, valid: Optional[int] = None):
        self.algebra = algebra
        self.c = coeffs
        self.valid = algebra.order if valid is None else valid

    # construction
    @classmethod
    def constant(cls, algebra: JetAlgebra, value) -> 'JetArray':
        value = np.asarray(value, dtype=float)
        coeffs = np.zeros(value.shape + (algebra.size,))
        coeffs[..., 0] = value
        return cls(algebra, coeffs)

    # array protocol
    @property
    def shape(self) -> Tuple[int, ...]:
        return self.c.shape[:-1]

    @property
    def ndim(self) -> int:
        return self.c.ndim - 1

    @property
    def value(self):
        return self.c[..., 0]

    def __len__(self) -> int:
        return self.shape[0]

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    def __getitem__(self, key) -> 'JetArray':
        if not isinstance(key, tuple):
            key = (key,)
        return JetArray(self.algebra, self.c[key + (Ellipsis,)], self.valid)

    def __repr__(self) -> str:
        return f"JetArray(shape={self.shape}, valid={self.valid}, value={self.value!r})"

    def sum(self, axis=None) -> 'JetArray':
        if axis is None:
            return JetArray(self.algebra, self.c.reshape(-1, self.algebra.size).sum(axis=0), self.valid)
        axis = axis % self.ndim
        return JetArray(self.algebra, self.c.sum(axis=axis), self.valid)

    def transpose(self, *axes) -> 'JetArray':
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        if not axes:
            axes = tuple(reversed(range(self.ndim)))
        return JetArray(self.algebra, self.c.transpose(tuple(axes) + (self.ndim,)), self.valid)

    @property
    def T(self) -> 'JetArray':
        return self.transpose()

    # arithmetic
    def _lift(self, other):
        if isinstance(other, JetArray):
            if other.algebra is not self.algebra:
                raise ValueError("Cannot combine jets from different algebras")
            return other
        return None

    def __add__(self, other) -> 'JetArray':
        jet = self._lift(other)
        if jet is not None:
            return JetArray(self.algebra, self.c + jet.c, min(self.valid, jet.valid))
        other = np.asarray(other, dtype=float)
        shape = np.broadcast_shapes(self.shape, other.shape)
        coeffs = np.array(np.broadcast_to(self.c, shape + (self.algebra.size,)))
        coeffs[..., 0] += other
        return JetArray(self.algebra, coeffs, self.valid)

    __radd__ = __add__

    def __neg__(self) -> 'JetArray':
        return JetArray(self.algebra, -self.c, self.valid)

    def __pos__(self) -> 'JetArray':
        return self

    def __sub__(self, other) -> 'JetArray':
        return self + (-other)

    def __rsub__(self, other) -> 'JetArray':
        return (-self) + other

    def __mul__(self, other) -> 'JetArray':
        jet = self._lift(other)
        alg = self.algebra
        if jet is not None:
            coeffs = (self.c[..., alg.left] * jet.c[..., alg.right]) @ alg.scatter
            return JetArray(alg, coeffs, min(self.valid, jet.valid))
        other = np.asarray(other, dtype=float)
        return JetArray(alg, self.c * other[..., None], self.valid)

    __rmul__ = __mul__

    def __truediv__(self, other) -> 'JetArray':
        if isinstance(other, JetArray):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=float))

    def __rtruediv__(self, other) -> 'JetArray':
        return self.reciprocal() * other

    def __pow__(self, exponent) -> 'JetArray':
        if isinstance(exponent, JetArray):
            return (exponent * self.log()).exp()
        exponent = float(exponent)
        if exponent.is_integer() and 0 <= exponent <= 16:
            return self._integer_power(int(exponent))
        if exponent.is_integer() and -16 <= exponent < 0:
            return self.reciprocal()._integer_power(int(-exponent))
        return self.power(exponent)

    def __rpow__(self, base) -> 'JetArray':
        return (self * np.log(np.asarray(base, dtype=float))).exp()

    def _integer_power(self, k: int) -> 'JetArray':
        result = JetArray.constant(self.algebra, np.ones(self.shape))
        result.valid = self.valid
        base = self
        while k:
            if k & 1:
                result = result * base
            k >>= 1
            if k:
                base = base * base
        return result

    # univariate composition
    def _compose(self, derivatives: Sequence[np.ndarray]) -> 'JetArray':
        """f(u0 + h) = sum_k f^(k)(u0) h^k / k! with h the nilpotent part."""
        nil = JetArray(self.algebra, self.c.copy(), self.valid)
        nil.c[..., 0] = 0.0
        result = JetArray.constant(self.algebra, derivatives[0])
        result.valid = self.valid
        term = nil
        for k in range(1, min(self.algebra.order, self.valid) + 1):
            result = result + term * (derivatives[k] / math.factorial(k))
            if k < self.algebra.order:
                term = term * nil
        return result

    def _orders(self) -> int:
        return min(self.algebra.order, self.valid)

    def exp(self) -> 'JetArray':
        with np.errstate(all='ignore'):
            e = np.exp(self.value)
        return self._compose([e] * (self._orders() + 1))

    def log(self) -> 'JetArray':
        u0 = self.value
        with np.errstate(all='ignore'):
            derivs = [np.log(u0)]
            for k in range(1, self._orders() + 1):
                derivs.append((-1) ** (k - 1) * math.factorial(k - 1) / u0 ** k)
        return self._compose(derivs)

    def power(self, p: float) -> 'JetArray':
        u0 = self.value
        derivs = []
        coefficient = 1.0
        with np.errstate(all='ignore'):
            for k in range(self._orders() + 1):
                if coefficient == 0.0:
                    derivs.append(np.zeros_like(u0))
                else:
                    derivs.append(coefficient * np.power(u0, p - k))
                coefficient *= (p - k)
        return self._compose(derivs)

    def sqrt(self) -> 'JetArray':
        return self.power(0.5)

    def reciprocal(self) -> 'JetArray':
        return self.power(-1.0)

    def sin(self) -> 'JetArray':
        u0 = self.value
        cycle = [np.sin(u0), np.cos(u0), -np.sin(u0), -np.cos(u0)]
        return self._compose([cycle[k % 4] for k in range(self._orders() + 1)])

    def cos(self) -> 'JetArray':
        u0 = self.value
        cycle = [np.cos(u0), -np.sin(u0), -np.cos(u0), np.sin(u0)]
        return self._compose([cycle[k % 4] for k in range(self._orders() + 1)])

    def tan(self) -> 'JetArray':
        return self.sin() / self.cos()

    # differentiation
    def diff(self, var: int) -> 'JetArray':
        if self.valid <= 0:
            raise OrderOverflowError(f"Jet exhausted: cannot differentiate in variable {var} "
                                     f"(algebra order {self.algebra.order})")
        alg = self.algebra
        coeffs = self.c[..., alg.shift_source[var]] * alg.shift_factor[var]
        return JetArray(alg, coeffs, self.valid - 1)

    def grad(self, variables: Sequence[int]) -> 'JetArray':
        """Stack of first derivatives; the new tensor axis is appended last."""
        parts = [self.diff(v).c for v in variables]
        return JetArray(self.algebra, np.stack(parts, axis=-2), self.valid - 1)

    def partial(self, idx: MultiIndex):
        idx = tuple(int(i) for i in idx)
        if sum(idx) > self.valid:
            raise OrderOverflowError(f"Multi-index {idx} exceeds jet validity {self.valid}")
        k = self.algebra.index[idx]
        return self.c[..., k] * self.algebra.factorials[k]


def stack(jets: Sequence, axis: int = 0) -> JetArray:
    """Stack scalars/jets sharing one algebra into a new leading axis."""
    algebra = next(j.algebra for j in jets if isinstance(j, JetArray))
    lifted = [j if isinstance(j, JetArray) else JetArray.constant(algebra, j) for j in jets]
    valid = min(j.valid for j in lifted)
    shape = np.broadcast_shapes(*(j.shape for j in lifted))
    coeffs = [np.broadcast_to(j.c, shape + (algebra.size,)) for j in lifted]
    return JetArray(algebra, np.stack(coeffs, axis=axis % (len(shape) + 1)), valid)


def _flatten(items):
    if isinstance(items, (list, tuple)):
        for item in items:
            yield from _flatten(item)
    else:
        yield items


def _nested_shape(items) -> Tuple[int, ...]:
    shape = []
    while isinstance(items, (list, tuple)):
        shape.append(len(items))
        items = items[0] if items else None
    return tuple(shape)


def as_array(items):
    """Nested list of scalar floats/jets -> ndarray or JetArray of the same shape."""
    if isinstance(items, JetArray):
        return items
    flat = list(_flatten(items))
    if not any(isinstance(v, JetArray) for v in flat):
        return np.asarray(items, dtype=float)
    jet = stack(flat)
    shape = _nested_shape(items)
    return JetArray(jet.algebra, jet.c.reshape(shape + (jet.algebra.size,)), jet.valid)


def jet_einsum(subscripts: str, *operands):
    """Einstein summation over tensor axes for jets and constant arrays (one or two operands)."""
    jets = [op for op in operands if isinstance(op, JetArray)]
    if not jets:
        return np.einsum(subscripts, *operands)
    spec = subscripts.replace(' ', '')
    inputs, output = spec.split('->')
    parts = inputs.split(',')
    letter = next(ch for ch in 'PQRSTUVWXYZ' if ch not in spec)
    algebra = jets[0].algebra
    valid = min(j.valid for j in jets)
    if len(operands) == 1:
        coeffs = np.einsum(f"{parts[0]}{letter}->{output}{letter}", operands[0].c)
        return JetArray(algebra, coeffs, valid)
    if len(operands) != 2:
        raise ValueError("jet_einsum takes one or two operands")
    a, b = operands
    if isinstance(a, JetArray) and isinstance(b, JetArray):
        coeffs = np.einsum(f"{parts[0]}{letter},{parts[1]}{letter}->{output}{letter}",
                           a.c[..., algebra.left], b.c[..., algebra.right]) @ algebra.scatter
    elif isinstance(a, JetArray):
        coeffs = np.einsum(f"{parts[0]}{letter},{parts[1]}->{output}{letter}", a.c, np.asarray(b, dtype=float))
    else:
        coeffs = np.einsum(f"{parts[0]},{parts[1]}{letter}->{output}{letter}", np.asarray(a, dtype=float), b.c)
    return JetArray(algebra, coeffs, valid)


def inv(matrix):
    """Inverse of a square jet matrix by a Neumann series around its value."""
    if not isinstance(matrix, JetArray):
        try:
            return np.linalg.inv(matrix)
        except np.linalg.LinAlgError as e:
            raise SingularMetricError(f"Singular matrix: {e}")
    base = matrix.value
    try:
        base_inv = np.linalg.inv(base)
    except np.linalg.LinAlgError as e:
        raise SingularMetricError(f"Singular matrix: {e}")
    if not np.all(np.isfinite(base_inv)) or np.linalg.cond(base) > 1e14:
        raise SingularMetricError(f"Matrix is numerically singular (cond={np.linalg.cond(base):.3e})")
    nil = JetArray(matrix.algebra, matrix.c.copy(), matrix.valid)
    nil.c[..., 0] = 0.0
    step = -jet_einsum('ij,jk->ik', base_inv, nil)
    term = JetArray.constant(matrix.algebra, base_inv)
    term.valid = matrix.valid
    result = term
    for _ in range(min(matrix.algebra.order, matrix.valid)):
        term = jet_einsum('ij,jk->ik', step, term)
        result = result + term
    return result


# Functions usable on floats, ndarrays and jets alike.

def exp(u):
    return u.exp() if isinstance(u, JetArray) else np.exp(u)


def log(u):
    return u.log() if isinstance(u, JetArray) else np.log(u)


def sqrt(u):
    return u.sqrt() if isinstance(u, JetArray) else np.sqrt(u)


def sin(u):
    return u.sin() if isinstance(u, JetArray) else np.sin(u)


def cos(u):
    return u.cos() if isinstance(u, JetArray) else np.cos(u)


def tan(u):
    return u.tan() if isinstance(u, JetArray) else np.tan(u)


def power(u, p):
    if isinstance(u, JetArray) or isinstance(p, JetArray):
        if not isinstance(u, JetArray):
            return p.__rpow__(u)
        return u ** p
    return np.power(u, p)


def value_of(u):
    return u.value if isinstance(u, JetArray) else np.asarray(u, dtype=float)


def seed(algebra: JetAlgebra, point: Sequence[float], first_var: int = 0) -> JetArray:
    """Independent variables x_v = point_v + t_v for v = first_var .. first_var+len(point)-1."""
    point = np.asarray(point, dtype=float).ravel()
    coeffs = np.zeros((point.size, algebra.size))
    coeffs[:, 0] = point
    if algebra.order >= 1:
        for i in range(point.size):
            coeffs[i, algebra.unit(first_var + i)] = 1.0
    return JetArray(algebra, coeffs)


def seed_tangent(x: Sequence[float], y: Sequence[float], order: int) -> Tuple[JetArray, JetArray]:
    """Jets of (x, y) in the combined variable list (x^1..x^n, y^1..y^n)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    algebra = get_algebra(2 * n, order)
    return seed(algebra, x, 0), seed(algebra, y, n)


def taylor(f: Callable, x: Sequence[float], order: int) -> JetArray:
    """Evaluate f on seeded jets at x; a constant result is lifted to a jet."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    algebra = get_algebra(x.size, order)
    with np.errstate(all='ignore'):
        out = f(seed(algebra, x))
    if not isinstance(out, JetArray):
        out = JetArray.constant(algebra, out)
    if not np.all(np.isfinite(out.c[..., algebra.degrees <= out.valid])):
        raise DomainError(f"Function is not finite near x={x.tolist()}")
    return out


def partial(f: Callable, x: Sequence[float], idx: MultiIndex) -> float:
    """Mixed partial d^idx f (x) by Taylor-mode arithmetic."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = tuple(int(i) for i in idx)
    if len(idx) != x.size:
        raise ValueError(f"Multi-index {idx} does not match a point with {x.size} coordinates")
    if any(i < 0 for i in idx):
        raise ValueError(f"Multi-index entries must be non-negative: {idx}")
    order = sum(idx)
    jet = taylor(f, x, order)
    return float(jet.partial(idx))


def default_step(x: Sequence[float], order: int) -> float:
    scale = 1.0 + float(np.linalg.norm(np.atleast_1d(x)))
    if order <= 1:
        return 1e-4 * scale
    return scale * _EPS ** (1.0 / (order + 4))


def _difference(f: Callable, x: np.ndarray, idx: MultiIndex, h: float) -> float:
    active = [(v, k) for v, k in enumerate(idx) if k > 0]
    stencils = [_STENCILS[k] for _, k in active]
    total = 0.0
    for choice in product(*(range(len(s[0])) for s in stencils)):
        weight = 1.0
        point = x.copy()
        for (v, _), stencil, j in zip(active, stencils, choice):
            weight *= stencil[1][j]
            point[v] += stencil[0][j] * h
        if weight != 0.0:
            total += weight * float(f(point))
    return total / h ** sum(idx)


def fd_partial(f: Callable, x: Sequence[float], idx: MultiIndex, h: Optional[float] = None) -> float:
    """Central finite-difference estimate of d^idx f (x) with one Richardson level.

    Tensor-product stencils per variable; D(h) and D(2h) are combined as
    (4 D(h) - D(2h)) / 3.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    idx = tuple(int(i) for i in idx)
    if len(idx) != x.size:
        raise ValueError(f"Multi-index {idx} does not match a point with {x.size} coordinates")
    if any(k > 4 for k in idx) or sum(idx) > 4:
        raise OrderOverflowError(f"Finite-difference oracle supports total order <= 4, got {idx}")
    if sum(idx) == 0:
        return float(f(x))
    if h is None:
        h = default_step(x, sum(idx))
    if h <= 0:
        raise ValueError(f"Step size must be positive, got {h}")
    with np.errstate(all='ignore'):
        estimate = (4.0 * _difference(f, x, idx, h) - _difference(f, x, idx, 2.0 * h)) / 3.0
    if not np.isfinite(estimate):
        raise DomainError(f"Finite differences are not finite near x={x.tolist()}")
    return estimate


def derivatives_1d(g: Callable, x: float, order: int) -> List[float]:
    """[g(x), g'(x), ..., g^(order)(x)] from a single univariate jet."""
    jet = taylor(lambda v: g(v[0]), [x], order)
    return [float(jet.partial((k,))) for k in range(order + 1)]
