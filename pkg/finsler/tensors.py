from dataclasses import dataclass, field
from typing import Sequence, Tuple

import numpy as np

from finsler.errors import DomainError

UPPER = 'u'
LOWER = 'l'

MIN_TANGENT_NORM = 1e-8


@dataclass(frozen=True)
class TangentPoint:
    """An element (x, y) of the slit tangent bundle in one chart."""
    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.atleast_1d(np.asarray(self.x, dtype=float)).copy()
        y = np.atleast_1d(np.asarray(self.y, dtype=float)).copy()
        if x.shape != y.shape or x.ndim != 1:
            raise ValueError(f"x and y must be vectors of equal length, got {x.shape} and {y.shape}")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DomainError("Tangent point has non-finite coordinates")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'y', y)

    @property
    def dimension(self) -> int:
        return self.x.size

    def with_y(self, y: Sequence[float]) -> 'TangentPoint':
        return TangentPoint(self.x, y)

    def scaled(self, factor: float) -> 'TangentPoint':
        return TangentPoint(self.x, factor * self.y)

    def __repr__(self) -> str:
        return f"TangentPoint(x={self.x.tolist()}, y={self.y.tolist()})"


@dataclass(frozen=True)
class Tensor:
    """Dense components with one variance label ('u' or 'l') per slot."""
    components: np.ndarray
    variance: Tuple[str, ...] = field(default=())

    def __post_init__(self):
        comps = np.asarray(self.components, dtype=float)
        variance = tuple(self.variance)
        if len(variance) != comps.ndim:
            raise ValueError(f"{len(variance)} variance labels for a rank-{comps.ndim} array")
        if any(v not in (UPPER, LOWER) for v in variance):
            raise ValueError(f"Variance labels must be '{UPPER}' or '{LOWER}', got {variance}")
        if comps.ndim and len(set(comps.shape)) != 1:
            raise ValueError(f"Tensor components must be n x ... x n, got shape {comps.shape}")
        object.__setattr__(self, 'components', comps)
        object.__setattr__(self, 'variance', variance)

    @property
    def rank(self) -> int:
        return self.components.ndim

    @property
    def dimension(self) -> int:
        return self.components.shape[0] if self.rank else 0

    @property
    def signature(self) -> str:
        return ''.join(self.variance)

    def __array__(self, dtype=None, copy=None):
        return self.components if dtype is None else self.components.astype(dtype)

    def __getitem__(self, key):
        return self.components[key]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.components))) if self.components.size else 0.0

    def is_symmetric(self, axes: Tuple[int, int] = (0, 1), tol: float = 1e-10) -> bool:
        swapped = np.swapaxes(self.components, *axes)
        scale = 1.0 + self.sup_norm()
        return bool(np.max(np.abs(self.components - swapped)) <= tol * scale)

    def is_antisymmetric(self, axes: Tuple[int, int], tol: float = 1e-10) -> bool:
        swapped = np.swapaxes(self.components, *axes)
        scale = 1.0 + self.sup_norm()
        return bool(np.max(np.abs(self.components + swapped)) <= tol * scale)

    def __repr__(self) -> str:
        return f"Tensor({self.signature or 'scalar'}, n={self.dimension})"
