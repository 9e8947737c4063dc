"""Chern and Cartan hh-curvature, the spray curvature R^i_km, the Riemann
operator R^i_k, Ricci scalar/tensor and flag curvature.

Index conventions (components are stored in the written index order):

    R^i_jkm = dGamma^i_jk/dx^m - dGamma^i_jm/dx^k
              + Gamma^i_sm Gamma^s_jk - Gamma^i_sk Gamma^s_jm     (delta-derivatives)
    R^i_km  = dG^i_k/dx^m - dG^i_m/dx^k  = y^j R^i_jkm
    R^i_k   = y^m R^i_mk

so that constant curvature kappa gives R^i_jkm = kappa (g_jk d^i_m - g_jm d^i_k)
and R^i_k = kappa F^2 (d^i_k - l^i l_k).
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from finsler import diffengine as fd
from finsler.connection import CURVATURE_ORDER, PointJets
from finsler.errors import DegenerateFlagError, DepthExceededError
from finsler.metrics.interface import MetricSpec
from finsler.tensors import LOWER, UPPER, TangentPoint, Tensor

logger = logging.getLogger(__name__)

RICCI_STEP = 1e-3


def _jets(spec: MetricSpec, tp: TangentPoint, jets: Optional[PointJets]) -> PointJets:
    if jets is not None and jets.order >= CURVATURE_ORDER:
        return jets
    return PointJets(spec, tp, CURVATURE_ORDER)


def _chern(jets: PointJets) -> np.ndarray:
    gamma = jets.Gamma.value
    d_gamma = jets.delta(jets.Gamma).value
    return (d_gamma - np.swapaxes(d_gamma, 2, 3)
            + np.einsum('ism,sjk->ijkm', gamma, gamma)
            - np.einsum('isk,sjm->ijkm', gamma, gamma))


def _spray_curvature(jets: PointJets) -> np.ndarray:
    d_n = jets.delta(jets.N).value
    return d_n - np.swapaxes(d_n, 1, 2)


def _riemann(jets: PointJets) -> np.ndarray:
    return np.einsum('m,imk->ik', jets.tp.y, _spray_curvature(jets))


def chern_hh(spec: MetricSpec, tp: TangentPoint, jets: Optional[PointJets] = None) -> Tensor:
    return Tensor(_chern(_jets(spec, tp, jets)), (UPPER, LOWER, LOWER, LOWER))


def spray_curvature(spec: MetricSpec, tp: TangentPoint, jets: Optional[PointJets] = None) -> Tensor:
    return Tensor(_spray_curvature(_jets(spec, tp, jets)), (UPPER, LOWER, LOWER))


def cartan_hh(spec: MetricSpec, tp: TangentPoint, jets: Optional[PointJets] = None) -> Tensor:
    """*R^i_jkm = R^i_jkm + R^s_km C^i_sj."""
    jets = _jets(spec, tp, jets)
    correction = np.einsum('skm,isj->ijkm', _spray_curvature(jets), jets.C.value)
    return Tensor(_chern(jets) + correction, (UPPER, LOWER, LOWER, LOWER))


def riemann_operator(spec: MetricSpec, tp: TangentPoint, jets: Optional[PointJets] = None) -> Tensor:
    """R^i_k = y^m R^i_mk."""
    return Tensor(_riemann(_jets(spec, tp, jets)), (UPPER, LOWER))


def ricci_trace_alt(spec: MetricSpec, tp: TangentPoint, jets: Optional[PointJets] = None) -> Tensor:
    """g^mj R^i_mjk, the metric trace of the Chern curvature."""
    jets = _jets(spec, tp, jets)
    return Tensor(np.einsum('mj,imjk->ik', jets.ginv.value, _chern(jets)), (UPPER, LOWER))


def ricci_scalar(spec: MetricSpec, tp: TangentPoint, jets: Optional[PointJets] = None) -> float:
    """Ric = R^i_i, positively 2-homogeneous in y."""
    return float(np.trace(_riemann(_jets(spec, tp, jets))))


def ricci_tensor(spec: MetricSpec, tp: TangentPoint, fd_fallback: bool = True,
                 step: Optional[float] = None) -> Tensor:
    """Ric_ik = 1/2 d^2 Ric / dy^i dy^k by central differences in y."""
    if not fd_fallback:
        raise DepthExceededError("Ricci tensor needs order-6 jets of F^2; enable the finite-difference fallback")
    spec.check_point(tp)
    n = spec.dimension
    h = RICCI_STEP * float(np.linalg.norm(tp.y)) if step is None else step

    def ricci_of_y(y):
        return ricci_scalar(spec, TangentPoint(tp.x, y))

    ric = np.zeros((n, n))
    for i in range(n):
        for k in range(i, n):
            idx = [0] * n
            idx[i] += 1
            idx[k] += 1
            ric[i, k] = ric[k, i] = 0.5 * fd.fd_partial(ricci_of_y, tp.y, tuple(idx), h)
    return Tensor(ric, (LOWER, LOWER))


def flag_curvature(spec: MetricSpec, tp: TangentPoint, X: Sequence[float],
                   jets: Optional[PointJets] = None) -> float:
    """g(R(X, y)y, X) / (g(X, X) g(y, y) - g(X, y)^2) with R(X, y)y = R^i_k X^k."""
    jets = _jets(spec, tp, jets)
    X = np.asarray(X, dtype=float)
    y = tp.y
    g = jets.g.value
    gxx = X @ g @ X
    gyy = y @ g @ y
    gxy = X @ g @ y
    denominator = gxx * gyy - gxy ** 2
    if denominator <= 1e-10 * max(gxx * gyy, 1e-300):
        raise DegenerateFlagError(f"Flag is degenerate: X={X.tolist()} is parallel to y={y.tolist()}")
    return float(X @ g @ (_riemann(jets) @ X) / denominator)


@dataclass(frozen=True)
class ScalarCurvatureFit:
    kappa: float
    residual: float


def scalar_curvature_fit(spec: MetricSpec, tp: TangentPoint, jets: Optional[PointJets] = None) -> ScalarCurvatureFit:
    """Least-squares kappa in R^h_k = kappa F^2 (d^h_k - l^h l_k) and the relative misfit."""
    jets = _jets(spec, tp, jets)
    g = jets.g.value
    y = tp.y
    f2 = float(jets.F2.value)
    y_lower = g @ y
    model = f2 * np.eye(spec.dimension) - np.outer(y, y_lower)
    R = _riemann(jets)
    kappa = float(np.sum(R * model) / np.sum(model * model))
    residual = float(np.max(np.abs(R - kappa * model)) / (f2 * (1.0 + abs(kappa))))
    return ScalarCurvatureFit(kappa=kappa, residual=residual)


def is_scalar_curvature(spec: MetricSpec, tp: TangentPoint, tol: float = 1e-6) -> bool:
    return scalar_curvature_fit(spec, tp).residual <= tol


@dataclass(frozen=True)
class CurvatureData:
    chern: Tensor
    cartan: Tensor
    spray: Tensor
    riemann: Tensor
    ricci: float
    ricci_tensor: Optional[Tensor]
    flag: Optional[float]


def curvature_data(spec: MetricSpec, tp: TangentPoint, X: Optional[Sequence[float]] = None,
                   with_ricci_tensor: bool = True) -> CurvatureData:
    jets = PointJets(spec, tp, CURVATURE_ORDER)
    return CurvatureData(
        chern=chern_hh(spec, tp, jets),
        cartan=cartan_hh(spec, tp, jets),
        spray=spray_curvature(spec, tp, jets),
        riemann=riemann_operator(spec, tp, jets),
        ricci=ricci_scalar(spec, tp, jets),
        ricci_tensor=ricci_tensor(spec, tp) if with_ricci_tensor else None,
        flag=flag_curvature(spec, tp, X, jets) if X is not None else None,
    )
