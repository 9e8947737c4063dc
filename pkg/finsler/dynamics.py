"""Geodesics, Jacobi fields and conjugate points, the projective parameter
and the Bonnet-Myers check along sampled geodesics.

All ODEs use the fixed-step classical RK4 scheme of ``finsler.ode``. Jacobi
fields and the projective parameter advance with step 2h over the geodesic
samples so that the curvature is only ever evaluated on the trajectory.
"""
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import interpolate, optimize

from finsler import ode
from finsler.config import get_default_seed
from finsler.connection import CURVATURE_ORDER, PointJets, spray
from finsler.curvature import _chern, _riemann, ricci_tensor
from finsler.errors import ChartExitError, ConfigurationError, DomainError, InvalidParameterError
from finsler.metrics.interface import MetricSpec
from finsler.metrics.operations import eval_F
from finsler.reports import BonnetReport, GeodesicResult, rows_to_csv, write_text
from finsler.tensors import TangentPoint

logger = logging.getLogger(__name__)

DEFAULT_STEP = 1e-3
UNIT_SPEED_TOLERANCE = 1e-10
CHART_LIMIT = 1e3
BLOWUP_LIMIT = 1e8
ILL_CONDITIONED = 1e-6
EVEN_ROOT_SCREEN = 1e-2
EVEN_ROOT_ACCEPT = 1e-5
BONNET_SLACK = 1e-2
EQUIVALENCE_TOLERANCE = 1e-4
EQUIVALENCE_POINTS = 5
MAX_TILT = 0.6
JACOBI_OPERATORS = ('riemann', 'chern')

# sixth-order central first-derivative stencil on offsets -3..3
_D1_STENCIL = np.array([-1.0, 9.0, -45.0, 0.0, 45.0, -9.0, 1.0]) / 60.0


@dataclass
class Trajectory:
    """Samples s_k of a unit-speed geodesic with positions x and velocities v."""
    metric: str
    s: np.ndarray
    x: np.ndarray
    v: np.ndarray
    step: float
    order: int = ode.RK4_ORDER
    exited: bool = False

    def __len__(self) -> int:
        return len(self.s)

    @property
    def length(self) -> float:
        return float(self.s[-1])

    @property
    def dimension(self) -> int:
        return self.x.shape[1]

    def point(self, k: int) -> TangentPoint:
        return TangentPoint(self.x[k], self.v[k])

    def speeds(self, spec: MetricSpec) -> np.ndarray:
        return np.array([eval_F(spec, self.point(k)) for k in range(len(self))])


@dataclass(frozen=True)
class CurveFrame:
    """Connection and curvature data at every trajectory sample."""
    gamma_t: np.ndarray  # Gamma^i_jk v^k
    jacobi_operator: np.ndarray
    ricci: np.ndarray
    F2: np.ndarray
    g: np.ndarray
    operator: str


@dataclass
class JacobiSolution:
    """J(s) and W(s) = D_T J(s) on the even samples, J(0) = 0, W(0) = I."""
    s: np.ndarray
    J: np.ndarray
    W: np.ndarray
    indices: np.ndarray
    gamma_t: np.ndarray
    jacobi_operator: np.ndarray
    g: np.ndarray
    operator: str
    step: float

    def det(self) -> np.ndarray:
        return np.linalg.det(self.J)


@dataclass
class ProjectiveParameter:
    s: np.ndarray
    p: np.ndarray
    dp: np.ndarray
    ddp: np.ndarray
    S: np.ndarray
    indices: np.ndarray
    initial: Tuple[float, float, float]
    step: float
    blew_up: bool = False


def unit_initial_vector(spec: MetricSpec, x: Sequence[float], direction: Sequence[float]) -> np.ndarray:
    """direction / F(x, direction)."""
    direction = np.asarray(direction, dtype=float)
    return direction / eval_F(spec, TangentPoint(x, direction))


def geodesic(spec: MetricSpec, x0: Sequence[float], y0: Sequence[float], length: float,
             step: float = DEFAULT_STEP, strict: bool = False) -> Trajectory:
    """Integrate x'' + 2 G(x, x') = 0 from (x0, y0) with F(x0, y0) = 1.

    The step is adjusted so the last sample lands on ``length``. Leaving the
    chart ends the trajectory early with ``exited`` set (ChartExitError when
    ``strict``).
    """
    tp0 = TangentPoint(x0, y0)
    speed = eval_F(spec, tp0)
    if abs(speed - 1.0) > UNIT_SPEED_TOLERANCE:
        raise InvalidParameterError(f"Initial vector must have F = 1, got F = {speed:.12g}; "
                                    f"rescale it with unit_initial_vector")
    n = spec.dimension
    steps, h = ode.step_count(length, step)
    left_chart: List[float] = []

    def rhs(s, state):
        if not np.all(np.isfinite(state)):
            return np.full_like(state, np.nan)
        try:
            G = spray(spec, TangentPoint(state[:n], state[n:]))
        except DomainError:
            left_chart.append(s)
            return np.zeros_like(state)
        return np.concatenate([state[n:], -2.0 * G])

    def stop(s, state):
        if left_chart:
            return True
        if not np.all(np.isfinite(state)):
            return False
        x = state[:n]
        return not spec.in_domain(x) or float(np.linalg.norm(x)) > CHART_LIMIT

    start = time.time()
    s, states, exited = ode.integrate(rhs, 0.0, np.concatenate([tp0.x, tp0.y]), h, steps, stop=stop)
    if exited:
        message = f"Geodesic of '{spec.name}' left the chart after s={s[-1]:.6g} of {length:.6g}"
        if strict:
            raise ChartExitError(message)
        logger.warning(message)
    logger.info(f"[TIMING] geodesic on '{spec.name}' ({len(s)} samples): {time.time() - start:.2f} seconds")
    return Trajectory(metric=spec.name, s=s, x=states[:, :n].copy(), v=states[:, n:].copy(), step=h,
                      exited=exited)


def curvature_along(spec: MetricSpec, traj: Trajectory, operator: str = 'riemann') -> CurveFrame:
    """Gamma_T, the Jacobi operator, R^i_i, F^2 and g at every sample.

    ``operator`` selects R^i_k (``riemann``) or T^j R^i_jmk T^m (``chern``).
    """
    if operator not in JACOBI_OPERATORS:
        raise ValueError(f"Unsupported Jacobi operator: {operator}")
    count = len(traj)
    n = traj.dimension
    gamma_t = np.zeros((count, n, n))
    jacobi_operator = np.zeros((count, n, n))
    ricci = np.zeros(count)
    f2 = np.zeros(count)
    g = np.zeros((count, n, n))
    for k in range(count):
        jets = PointJets(spec, traj.point(k), CURVATURE_ORDER)
        v = traj.v[k]
        R = _riemann(jets)
        gamma_t[k] = np.einsum('ijk,k->ij', jets.Gamma.value, v)
        if operator == 'chern':
            jacobi_operator[k] = np.einsum('j,ijmk,m->ik', v, _chern(jets), v)
        else:
            jacobi_operator[k] = R
        ricci[k] = np.trace(R)
        f2[k] = float(jets.F2.value)
        g[k] = jets.g.value
    return CurveFrame(gamma_t=gamma_t, jacobi_operator=jacobi_operator, ricci=ricci, F2=f2, g=g,
                      operator=operator)


def jacobi_field(spec: MetricSpec, traj: Trajectory, operator: str = 'riemann',
                 frame: Optional[CurveFrame] = None) -> JacobiSolution:
    """Solve J' = W - Gamma_T J, W' = -A J - Gamma_T W with J(0) = 0, W(0) = I."""
    if frame is None or frame.operator != operator:
        frame = curvature_along(spec, traj, operator)
    n = traj.dimension
    m = n * n

    def rhs(k, state):
        J = state[:m].reshape(n, n)
        W = state[m:].reshape(n, n)
        dJ = W - frame.gamma_t[k] @ J
        dW = -frame.jacobi_operator[k] @ J - frame.gamma_t[k] @ W
        return np.concatenate([dJ.ravel(), dW.ravel()])

    state0 = np.concatenate([np.zeros(m), np.eye(n).ravel()])
    indices, states, _ = ode.integrate_on_samples(rhs, traj.s, state0)
    return JacobiSolution(
        s=traj.s[indices],
        J=states[:, :m].reshape(-1, n, n),
        W=states[:, m:].reshape(-1, n, n),
        indices=indices,
        gamma_t=frame.gamma_t[indices],
        jacobi_operator=frame.jacobi_operator[indices],
        g=frame.g[indices],
        operator=operator,
        step=2.0 * traj.step,
    )


def jacobi_wronskian(solution: JacobiSolution) -> np.ndarray:
    """W^T g J - J^T g W at every sample; identically zero for a Jacobi flow."""
    WgJ = np.einsum('kji,kjl,klm->kim', solution.W, solution.g, solution.J)
    return WgJ - np.swapaxes(WgJ, 1, 2)


def _central_derivative(values: np.ndarray, h: float) -> np.ndarray:
    """Sixth-order central derivative at samples 3..N-4 along axis 0."""
    count = len(values)
    if count < 7:
        raise ValueError(f"Need at least 7 samples for the residual stencil, got {count}")
    result = np.zeros((count - 6,) + values.shape[1:])
    for j, weight in enumerate(_D1_STENCIL):
        if weight:
            result = result + weight * values[j:count - 6 + j]
    return result / h


def jacobi_residual(solution: JacobiSolution) -> float:
    """Re-substitution residual of the Jacobi system on the even-sample grid."""
    h = solution.step
    J, W = solution.J, solution.W
    inner = slice(3, len(J) - 3)
    gamma_t = solution.gamma_t[inner]
    dJ = _central_derivative(J, h) - (W[inner] - gamma_t @ J[inner])
    dW = _central_derivative(W, h) + solution.jacobi_operator[inner] @ J[inner] + gamma_t @ W[inner]
    scale = 1.0 + float(np.max(np.abs(J))) + float(np.max(np.abs(W)))
    return max(float(np.max(np.abs(dJ))), float(np.max(np.abs(dW)))) / scale


def _hermite(solution: JacobiSolution, first: int, last: int) -> interpolate.CubicHermiteSpline:
    n = solution.J.shape[1]
    J = solution.J[first:last + 1]
    dJ = solution.W[first:last + 1] - solution.gamma_t[first:last + 1] @ J
    count = last - first + 1
    return interpolate.CubicHermiteSpline(solution.s[first:last + 1], J.reshape(count, n * n),
                                          dJ.reshape(count, n * n))


def conjugate_search(spec: MetricSpec, traj: Trajectory, operator: str = 'riemann',
                     solution: Optional[JacobiSolution] = None) -> Optional[float]:
    """First s* > 0 where det J vanishes, or None within the trajectory.

    A sign change of det J is refined on the Hermite interpolant of J with
    Brent's method. Without any sign change, a dip of sigma_min(J)/sigma_max(J)
    to zero is accepted as a root of even multiplicity.
    """
    solution = solution or jacobi_field(spec, traj, operator)
    n = solution.J.shape[1]
    s = solution.s
    det = solution.det()
    if len(s) < 3:
        return None
    scale = float(np.max(np.abs(det)))
    for k in range(2, len(s)):
        if det[k] == 0.0:
            return float(s[k])
        if np.sign(det[k]) != np.sign(det[k - 1]):
            spline = _hermite(solution, k - 1, k)

            def det_at(t):
                return float(np.linalg.det(spline(t).reshape(n, n)))

            root = optimize.brentq(det_at, s[k - 1], s[k], xtol=1e-12)
            slope = (det[k] - det[k - 1]) / (s[k] - s[k - 1])
            if abs(slope) < ILL_CONDITIONED * (1.0 + scale):
                logger.warning(f"det J is ill-conditioned near the conjugate point s*={root:.8f} "
                               f"(slope {slope:.3e})")
            return float(root)
    return _even_root(solution)


def _even_root(solution: JacobiSolution) -> Optional[float]:
    n = solution.J.shape[1]
    singular = np.linalg.svd(solution.J[1:], compute_uv=False)
    ratio = singular[:, -1] / singular[:, 0]
    for i in range(1, len(ratio) - 1):
        if ratio[i] < EVEN_ROOT_SCREEN and ratio[i] <= ratio[i - 1] and ratio[i] <= ratio[i + 1]:
            k = i + 1
            spline = _hermite(solution, k - 1, k + 1)

            def ratio_at(t):
                values = np.linalg.svd(spline(t).reshape(n, n), compute_uv=False)
                return float(values[-1] / values[0])

            found = optimize.minimize_scalar(ratio_at, bounds=(solution.s[k - 1], solution.s[k + 1]),
                                             method='bounded', options={'xatol': 1e-10})
            if found.fun <= EVEN_ROOT_ACCEPT:
                logger.warning(f"Conjugate point at s*={found.x:.8f} has even multiplicity: det J does not "
                               f"change sign there")
                return float(found.x)
    return None


def ricci_along(spec: MetricSpec, traj: Trajectory) -> np.ndarray:
    return curvature_along(spec, traj).ricci


def projective_parameter(spec: MetricSpec, traj: Trajectory,
                         initial: Tuple[float, float, float] = (0.0, 1.0, 0.0),
                         frame: Optional[CurveFrame] = None) -> ProjectiveParameter:
    """Solve p''' = 3/2 p''^2 / p' + S p' with S = 2/(n-1) R^i_i(x, x').

    Integration stops with ``blew_up`` set when |p| exceeds 1e8 or p' stops
    being positive.
    """
    if initial[1] <= 0:
        raise InvalidParameterError(f"p'(0) must be positive, got {initial[1]}")
    ricci = frame.ricci if frame is not None else ricci_along(spec, traj)
    S = 2.0 / (spec.dimension - 1) * ricci

    def rhs(k, state):
        p, dp, ddp = state
        return np.array([dp, ddp, 1.5 * ddp * ddp / dp + S[k] * dp])

    def stop(k, state):
        return not np.all(np.isfinite(state)) or abs(state[0]) > BLOWUP_LIMIT or state[1] <= 0

    indices, states, blew_up = ode.integrate_on_samples(rhs, traj.s, np.asarray(initial, dtype=float), stop=stop)
    if blew_up:
        logger.warning(f"Projective parameter blew up after s={traj.s[indices[-1]]:.6g} on '{spec.name}'")
    return ProjectiveParameter(s=traj.s[indices], p=states[:, 0], dp=states[:, 1], ddp=states[:, 2],
                               S=S[indices], indices=indices, initial=tuple(float(v) for v in initial),
                               step=2.0 * traj.step, blew_up=blew_up)


def schwarzian_residual_of_p(spec: MetricSpec, traj: Trajectory, pp: ProjectiveParameter) -> float:
    """sup |p'''/p' - 3/2 (p''/p')^2 - S| / (1 + |S|) over interior samples,
    p''' taken from central differences of p''."""
    S = pp.S if pp.S is not None else 2.0 / (spec.dimension - 1) * ricci_along(spec, traj)[pp.indices]
    inner = slice(3, len(pp.s) - 3)
    d3 = _central_derivative(pp.ddp, pp.step)
    dp = pp.dp[inner]
    ratio = pp.ddp[inner] / dp
    residual = np.abs(d3 / dp - 1.5 * ratio * ratio - S[inner]) / (1.0 + np.abs(S[inner]))
    return float(np.max(residual))


def mobius_gauge(pp: ProjectiveParameter, a: float, b: float, c: float, d: float) -> ProjectiveParameter:
    """q = (a p + b) / (c p + d) with its first two derivatives by the chain rule."""
    det = a * d - b * c
    if det == 0:
        raise InvalidParameterError("Moebius map needs ad - bc != 0")

    def transform(p, dp, ddp):
        den = c * p + d
        return (a * p + b) / den, det * dp / den ** 2, det * (ddp / den ** 2 - 2.0 * c * dp * dp / den ** 3)

    q, dq, ddq = transform(pp.p, pp.dp, pp.ddp)
    initial = tuple(float(v) for v in transform(*pp.initial))
    return replace(pp, p=q, dp=dq, ddp=ddq, initial=initial)


def projective_factor(spec_a: MetricSpec, spec_b: MetricSpec, tp: TangentPoint,
                      tol: float = 1e-6) -> Optional[float]:
    """P with G_B = G_A + P y, or None when the sprays are not projectively related at tp."""
    G_a = spray(spec_a, tp)
    G_b = spray(spec_b, tp)
    difference = G_b - G_a
    y = tp.y
    factor = float(difference @ y / (y @ y))
    residual = float(np.linalg.norm(difference - factor * y))
    if residual <= tol * (1.0 + float(np.linalg.norm(G_a)) + float(np.linalg.norm(G_b))):
        return factor
    return None


def bonnet_starts(spec: MetricSpec, count: int, seed: Optional[int] = None) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Unit initial vectors on the sphere |x| = sample radius, tilted by up to 0.6 rad off its tangent plane."""
    rng = np.random.default_rng(get_default_seed() if seed is None else seed)
    n = spec.dimension
    radius = spec.sample_radius
    if spec.domain_radius:
        radius = min(radius, 0.9 * spec.domain_radius)
    tilts = np.linspace(-MAX_TILT, MAX_TILT, count) if count > 1 else np.zeros(1)
    starts = []
    for tilt in tilts:
        u = rng.normal(size=n)
        u /= np.linalg.norm(u)
        t = rng.normal(size=n)
        t -= (t @ u) * u
        t /= np.linalg.norm(t)
        x0 = radius * u
        starts.append((x0, unit_initial_vector(spec, x0, math.cos(tilt) * t + math.sin(tilt) * u)))
    return starts


def _equivalence_residual(spec: MetricSpec, traj: Trajectory, frame: CurveFrame) -> float:
    """max |Ric_ij v^i v^j - R^i_i| / (1 + |R^i_i|) at a few samples."""
    worst = 0.0
    for k in np.linspace(0, len(traj) - 1, EQUIVALENCE_POINTS).astype(int):
        v = traj.v[k]
        contracted = float(v @ np.asarray(ricci_tensor(spec, traj.point(k))) @ v)
        worst = max(worst, abs(contracted - frame.ricci[k]) / (1.0 + abs(frame.ricci[k])))
    return worst


def bonnet_geodesic(spec: MetricSpec, index: int, x0, y0, lam: float, length: float, step: float) -> GeodesicResult:
    n = spec.dimension
    bound = math.pi / math.sqrt(lam)
    traj = geodesic(spec, x0, y0, length, step)
    frame = curvature_along(spec, traj)
    ratio = float(np.min(frame.ricci / frame.F2)) / (n - 1)
    equivalence = _equivalence_residual(spec, traj, frame)
    if equivalence > EQUIVALENCE_TOLERANCE:
        logger.warning(f"Geodesic {index}: Ric(v, v) and R^i_i differ by {equivalence:.3e}")
    result = dict(index=index, x0=list(map(float, x0)), y0=list(map(float, y0)), min_ricci_ratio=ratio,
                  equivalence_residual=equivalence, bound=bound)
    if ratio < lam - 1e-9 * (1.0 + lam):
        return GeodesicResult(status='hypothesis-violated', **result)
    distance = conjugate_search(spec, traj, solution=jacobi_field(spec, traj, frame=frame))
    if distance is None:
        status = 'chart-exit' if traj.exited else 'no-conjugate'
    elif distance > bound + BONNET_SLACK:
        status = 'bound-exceeded'
    else:
        status = 'ok'
    return GeodesicResult(status=status, conjugate_distance=distance, **result)


def _bonnet_worker(config: Dict[str, Any], index: int, x0, y0, lam: float, length: float,
                   step: float) -> GeodesicResult:
    from finsler.metrics.factory import MetricFactory

    return bonnet_geodesic(MetricFactory.create_metric(config), index, x0, y0, lam, length, step)


def bonnet_myers_check(spec: MetricSpec, lam: float, n_geodesics: int = 8, L_max: Optional[float] = None,
                       step: float = DEFAULT_STEP, seed: Optional[int] = None,
                       starts: Optional[Sequence[Tuple[Sequence[float], Sequence[float]]]] = None,
                       workers: Optional[int] = None) -> BonnetReport:
    """Check Ric >= (n-1) lam along sampled geodesics and, where it holds, that the
    first conjugate point comes within pi / sqrt(lam)."""
    if lam <= 0:
        raise InvalidParameterError(f"lambda must be positive, got {lam}")
    bound = math.pi / math.sqrt(lam)
    length = 1.1 * bound + 2.0 * BONNET_SLACK if L_max is None else float(L_max)
    starts = list(starts) if starts is not None else bonnet_starts(spec, n_geodesics, seed)
    start = time.time()
    if workers and workers > 1:
        if spec.config is None:
            raise ConfigurationError(f"Metric '{spec.name}' has no config to rebuild it in worker processes")
        config = spec.config.model_dump()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_bonnet_worker, config, i, np.asarray(x0, dtype=float),
                                   np.asarray(y0, dtype=float), lam, length, step)
                       for i, (x0, y0) in enumerate(starts)]
            results = [f.result() for f in futures]
    else:
        results = [bonnet_geodesic(spec, i, x0, y0, lam, length, step) for i, (x0, y0) in enumerate(starts)]
    logger.info(f"[TIMING] bonnet_myers_check on '{spec.name}' ({len(starts)} geodesics): "
                f"{time.time() - start:.2f} seconds")
    return BonnetReport(metric=spec.name, lam=lam, n_geodesics=len(starts), length=length, step=step,
                        bound=bound, geodesics=results)


def trajectory_rows(traj: Trajectory, jacobi: Optional[JacobiSolution] = None,
                    projective: Optional[ProjectiveParameter] = None) -> Tuple[List[str], List[List[float]]]:
    """Header and rows: s, x1..xn, v1..vn, then detJ and p, dp, ddp when given.

    With a Jacobi solution or projective parameter the rows follow their
    (even-sample) grid.
    """
    n = traj.dimension
    header = ['s'] + [f"x{i + 1}" for i in range(n)] + [f"v{i + 1}" for i in range(n)]
    indices = np.arange(len(traj))
    if jacobi is not None:
        header.append('detJ')
        indices = jacobi.indices
    if projective is not None:
        header.extend(['p', 'dp', 'ddp'])
        indices = projective.indices if jacobi is None or len(projective.indices) < len(indices) else indices
    det = jacobi.det() if jacobi is not None else None
    rows = []
    for row, k in enumerate(indices):
        values = [float(traj.s[k])] + traj.x[k].tolist() + traj.v[k].tolist()
        if det is not None:
            values.append(float(det[row]))
        if projective is not None:
            values.extend([float(projective.p[row]), float(projective.dp[row]), float(projective.ddp[row])])
        rows.append(values)
    return header, rows


def write_trajectory(path: str, traj: Trajectory, jacobi: Optional[JacobiSolution] = None,
                     projective: Optional[ProjectiveParameter] = None) -> None:
    header, rows = trajectory_rows(traj, jacobi, projective)
    write_text(path, rows_to_csv(header, rows))
