"""Schwarzian tensor of a conformal factor, the Z integrability tensors and
the Moebius, concircular and C-conformal residuals."""
import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional

import numpy as np

from finsler import diffengine as fd
from finsler.config import MetricConfig, get_default_tolerance
from finsler.connection import (CONNECTION_ORDER, CURVATURE_ORDER, PointJets, ScalarField, _hessian_matrix, h_covariant,
                                metric_field, v_covariant)
from finsler.curvature import _chern, _spray_curvature
from finsler.diffengine import JetArray, jet_einsum
from finsler.errors import CriticalPointError
from finsler.expressions import Expression
from finsler.metrics.conformal import ConformalMetric
from finsler.metrics.interface import MetricSpec
from finsler.reports import IntegrabilityReport
from finsler.tensors import LOWER, UPPER, TangentPoint, Tensor

logger = logging.getLogger(__name__)

CRITICAL_DERIVATIVE = 1e-12


@dataclass(frozen=True)
class ConformalFactorData:
    """phi_i, phi^i, ||grad phi||^2, Phi and Phi_k = delta Phi / delta x^k at one tangent point."""
    phi_lower: np.ndarray
    phi_upper: np.ndarray
    grad_norm2: float
    Phi: float
    Phi_k: np.ndarray


def conformal_factor_data(spec: MetricSpec, phi: ScalarField, tp: TangentPoint) -> ConformalFactorData:
    jets = PointJets(spec, tp, CURVATURE_ORDER)
    n = spec.dimension
    value = phi(jets.X)
    if not isinstance(value, JetArray):
        value = JetArray.constant(jets.X.algebra, value)
    phi_i = value.grad(jets.x_vars)
    hess = phi_i.grad(jets.x_vars) - jet_einsum('kij,k->ij', jets.Gamma + jets.C, phi_i)
    laplace = jet_einsum('ij,ij->', jets.ginv, hess)
    phi_up = jet_einsum('ij,j->i', jets.ginv, phi_i)
    norm2 = jet_einsum('i,i->', phi_up, phi_i)
    Phi = (laplace - norm2) * (1.0 / n)
    return ConformalFactorData(
        phi_lower=phi_i.value,
        phi_upper=phi_up.value,
        grad_norm2=float(norm2.value),
        Phi=float(Phi.value),
        Phi_k=jets.delta(Phi).value,
    )


def _schwarzian(jets: PointJets, phi: ScalarField) -> np.ndarray:
    n = jets.n
    dphi = phi.gradient(jets.tp.x)
    hess = _hessian_matrix(jets, phi)
    g = jets.g.value
    ginv = jets.ginv.value
    trace_term = np.einsum('ij,ij->', ginv, hess) - dphi @ ginv @ dphi
    return hess - np.outer(dphi, dphi) - (trace_term / n) * g


def schwarzian_tensor(spec: MetricSpec, phi: ScalarField, tp: TangentPoint) -> Tensor:
    """B_ij = Hess(phi)_ij - phi_i phi_j - (1/n)(Laplacian phi - ||grad phi||^2) g_ij."""
    return Tensor(_schwarzian(PointJets(spec, tp, CONNECTION_ORDER), phi), (LOWER, LOWER))


def _z(jets: PointJets, chern: Optional[np.ndarray] = None) -> np.ndarray:
    n = jets.n
    chern = _chern(jets) if chern is None else chern
    g = jets.g.value
    trace = np.einsum('mj,imjk->ik', jets.ginv.value, chern)
    return chern - (np.einsum('ij,hk->hijk', g, trace) - np.einsum('ik,hj->hijk', g, trace)) / (n - 1)


def _z_scalar(jets: PointJets, spray_curvature: Optional[np.ndarray] = None) -> np.ndarray:
    y_lower = jets.g.value @ jets.tp.y
    f2 = float(jets.F2.value)
    rs = _spray_curvature(jets) if spray_curvature is None else spray_curvature
    R = np.einsum('m,imk->ik', jets.tp.y, rs)
    return rs - (np.einsum('j,hk->hjk', y_lower, R) - np.einsum('k,hj->hjk', y_lower, R)) / f2


def z_tensor(spec: MetricSpec, tp: TangentPoint) -> Tensor:
    """Z^h_ijk = R^h_ijk - (g_ij R^h_k - g_ik R^h_j) / (n - 1) with R^h_k = g^mj R^h_mjk."""
    return Tensor(_z(PointJets(spec, tp, CURVATURE_ORDER)), (UPPER, LOWER, LOWER, LOWER))


def z_scalar_tensor(spec: MetricSpec, tp: TangentPoint) -> Tensor:
    """Z^h_jk = R^h_jk - F^-2 (y_j R^h_k - y_k R^h_j)."""
    return Tensor(_z_scalar(PointJets(spec, tp, CURVATURE_ORDER)), (UPPER, LOWER, LOWER))


def curvature_scale(chern: np.ndarray, spray_curvature: np.ndarray) -> float:
    """1 + the larger sup-norm of the Chern and spray curvatures."""
    return 1.0 + max(float(np.max(np.abs(chern))), float(np.max(np.abs(spray_curvature))))


def point_norms(spec: MetricSpec, tp: TangentPoint, phi: Optional[ScalarField] = None):
    """Scale-aware norms (|Z|, |Z scalar|, |B| or None) at one point."""
    jets = PointJets(spec, tp, CURVATURE_ORDER)
    chern = _chern(jets)
    rs = _spray_curvature(jets)
    scale = curvature_scale(chern, rs)
    z = float(np.max(np.abs(_z(jets, chern)))) / scale
    zs = float(np.max(np.abs(_z_scalar(jets, rs)))) / scale
    b = float(np.max(np.abs(_schwarzian(jets, phi)))) / scale if phi is not None else None
    return z, zs, b


def structural_residuals(spec: MetricSpec, tp: TangentPoint) -> Dict[str, float]:
    """Scaled residuals of the identities every Finsler metric satisfies at (x, y)."""
    jets = PointJets(spec, tp, CURVATURE_ORDER)
    y = tp.y
    g = jets.g.value
    f2 = float(jets.F2.value)
    chern = _chern(jets)
    rs = _spray_curvature(jets)
    scale = curvature_scale(chern, rs)
    C_lower = jets.C_lower.value
    g_scale = 1.0 + float(np.max(np.abs(g)))
    g_field = metric_field()
    metricity = max(h_covariant(spec, g_field, tp).sup_norm(), v_covariant(spec, g_field, tp).sup_norm())
    return {
        'fundamental_tensor': abs(y @ g @ y - f2) / (1.0 + f2),
        'cartan_y': float(np.max(np.abs(C_lower @ y))) / (1.0 + float(np.max(np.abs(C_lower)))),
        'metricity': metricity / g_scale,
        'riemann_y': float(np.max(np.abs(np.einsum('m,imk,k->i', y, rs, y)))) / (scale * (1.0 + f2)),
        'chern_y': float(np.max(np.abs(np.einsum('j,ijkm->ikm', y, chern) - rs))) / scale,
        'z_trace': float(np.max(np.abs(np.einsum('ij,hijk->hk', jets.ginv.value, _z(jets, chern))))) / scale,
    }


def assemble_report(spec: MetricSpec, norms: List[tuple], tol: float, with_phi: bool) -> IntegrabilityReport:
    sup_z = max(n[0] for n in norms)
    sup_zs = max(n[1] for n in norms)
    sup_b = max(n[2] for n in norms) if with_phi else None
    verdicts = {'Z': sup_z <= tol, 'Zscalar': sup_zs <= tol}
    if with_phi:
        verdicts['B'] = sup_b <= tol
    return IntegrabilityReport(metric=spec.name, n_samples=len(norms), sup_Z=sup_z, sup_Zscalar=sup_zs,
                               sup_B=sup_b, tol=tol, verdicts=verdicts)


def integrability_report(spec: MetricSpec, sample: Iterable[TangentPoint], phi: Optional[ScalarField] = None,
                         tol: Optional[float] = None) -> IntegrabilityReport:
    """Sup-norms of Z, Z scalar and B over the sample, each relative to 1 + |R|."""
    sample = list(sample)
    if not sample:
        raise ValueError("integrability_report needs a non-empty sample")
    tol = get_default_tolerance() if tol is None else tol
    start = time.time()
    norms = [point_norms(spec, tp, phi) for tp in sample]
    report = assemble_report(spec, norms, tol, phi is not None)
    logger.info(f"[TIMING] integrability_report for '{spec.name}' over {len(sample)} points: "
                f"{time.time() - start:.2f} seconds")
    return report


def c_conformal_residual(spec: MetricSpec, phi: ScalarField, tp: TangentPoint) -> Tensor:
    """C^h_ij phi_h."""
    jets = PointJets(spec, tp, CONNECTION_ORDER)
    return Tensor(np.einsum('hij,h->ij', jets.C.value, phi.gradient(tp.x)), (LOWER, LOWER))


def conformal_change(spec: MetricSpec, phi: ScalarField) -> ConformalMetric:
    """F' = e^phi F."""
    changed = ConformalMetric(spec, phi, name=f"{spec.name}*e^({phi.name})")
    if spec.config is not None and isinstance(phi.function, Expression):
        changed.config = MetricConfig(kind='conformal', dimension=spec.dimension,
                                      params={'base': spec.config.model_dump(), 'phi': phi.function.text})
    return changed


def concircular_residual(spec: MetricSpec, rho: ScalarField, c: float, tp: TangentPoint) -> Tensor:
    """Hess(rho)_ij + c^2 rho g_ij."""
    jets = PointJets(spec, tp, CONNECTION_ORDER)
    residual = _hessian_matrix(jets, rho) + c * c * rho.value(tp.x) * jets.g.value
    return Tensor(residual, (LOWER, LOWER))


def mobius_residual(spec: MetricSpec, phi: ScalarField, sample: Iterable[TangentPoint]) -> float:
    """Sup over the sample of |B_ij(phi)|."""
    sup = 0.0
    for tp in sample:
        sup = max(sup, float(np.max(np.abs(_schwarzian(PointJets(spec, tp, CONNECTION_ORDER), phi)))))
    return sup


def antisymmetric_part(matrix: np.ndarray) -> float:
    """Sup-norm of (M - M^T) / 2."""
    matrix = np.asarray(matrix)
    return float(np.max(np.abs(0.5 * (matrix - matrix.T))))


def schwarzian_asymmetry(spec: MetricSpec, phi: ScalarField, sample: Iterable[TangentPoint]) -> float:
    """Sup over the sample of the antisymmetric part of B_ij(phi); zero up to rounding."""
    sup = 0.0
    for tp in sample:
        sup = max(sup, antisymmetric_part(_schwarzian(PointJets(spec, tp, CONNECTION_ORDER), phi)))
    return sup


def concircular_from_conformal(phi: ScalarField) -> ScalarField:
    """rho = e^-phi."""
    return ScalarField(lambda x: fd.exp(-phi(x)), phi.dimension, name=f"exp(-({phi.name}))")


def rho_mobius_residual(spec: MetricSpec, phi: ScalarField, tp: TangentPoint) -> Tensor:
    """Hess(rho)_kl + rho Phi g_kl for rho = e^-phi; equals -rho B_kl(phi)."""
    rho = concircular_from_conformal(phi)
    jets = PointJets(spec, tp, CONNECTION_ORDER)
    n = spec.dimension
    dphi = phi.gradient(tp.x)
    ginv = jets.ginv.value
    Phi = (np.einsum('ij,ij->', ginv, _hessian_matrix(jets, phi)) - dphi @ ginv @ dphi) / n
    residual = _hessian_matrix(jets, rho) + rho.value(tp.x) * Phi * jets.g.value
    return Tensor(residual, (LOWER, LOWER))


def mobius_integrability(spec: MetricSpec, phi: ScalarField, tp: TangentPoint):
    """Contracted obstructions Z^h_ijk phi_h and Z^h_jk phi_h for a candidate factor."""
    jets = PointJets(spec, tp, CURVATURE_ORDER)
    dphi = phi.gradient(tp.x)
    return (Tensor(np.einsum('hijk,h->ijk', _z(jets), dphi), (LOWER, LOWER, LOWER)),
            Tensor(np.einsum('hjk,h->jk', _z_scalar(jets), dphi), (LOWER, LOWER)))


def schwarzian_1d(g: Callable, x: float) -> float:
    """S(g) = g'''/g' - 3/2 (g''/g')^2."""
    _, d1, d2, d3 = fd.derivatives_1d(g, x, 3)
    if abs(d1) < CRITICAL_DERIVATIVE:
        raise CriticalPointError(f"g'({x}) = {d1:.3e}: the Schwarzian is undefined at a critical point")
    return d3 / d1 - 1.5 * (d2 / d1) ** 2
