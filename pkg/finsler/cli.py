#!/usr/bin/env python3
"""Command-line front end: tensor dumps, integrability checks, geodesic
dynamics and Moebius residuals on catalog or configured metrics."""
import argparse
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator

from finsler import connection, curvature, dynamics, schwarzian
from finsler.config import ConfigManager, get_default_seed, get_default_tolerance, get_log_level
from finsler.connection import ScalarField
from finsler.errors import ConfigurationError, DegenerateFlagError, FinslerError
from finsler.metrics import CATALOG_NAMES, MetricFactory, catalog, eval_F, sample_points
from finsler.metrics.interface import MetricSpec
from finsler.reports import MobiusReport, record_to_csv, rows_to_csv, to_json, write_text
from finsler.tensors import TangentPoint

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VERDICT = 2

STRUCTURAL_TOL = 1e-6
DEFAULT_SAMPLES = {'check': 16, 'mobius': 16, 'bonnet': 8}
DEFAULT_LENGTHS = {'geodesic': 2.0 * math.pi, 'conjugate': 4.0, 'projparam': 1.4}

Command = Literal['tensors', 'check', 'geodesic', 'conjugate', 'projparam', 'bonnet', 'mobius']


def parse_vector(value) -> Optional[List[float]]:
    if value is None or isinstance(value, list):
        return value
    try:
        return [float(v) for v in str(value).split(',')]
    except ValueError:
        raise ValueError(f"Expected comma-separated numbers, got '{value}'")


def parse_params(pairs: Optional[List[str]]) -> Dict[str, Any]:
    """k=v pairs with YAML-typed values: --param curvature=4 --param b=[0.2,0]."""
    params: Dict[str, Any] = {}
    for pair in pairs or []:
        if '=' not in pair:
            raise ConfigurationError(f"--param expects key=value, got '{pair}'")
        key, raw = pair.split('=', 1)
        params[key.strip()] = yaml.safe_load(raw)
    return params


class RunConfig(BaseModel):
    """Validated options of one CLI run."""
    model_config = ConfigDict(extra='forbid')

    command: Command
    metric: Optional[str] = None
    n: Optional[int] = Field(default=None, ge=2)
    config_path: Optional[str] = None
    params: Dict[str, Any] = Field(default_factory=dict)
    x: Optional[List[float]] = None
    y: Optional[List[float]] = None
    flag: Optional[List[float]] = None
    phi: Optional[str] = None
    rho: Optional[str] = None
    c: float = 1.0
    lam: Optional[float] = None
    length: Optional[float] = Field(default=None, gt=0)
    step: float = Field(default=dynamics.DEFAULT_STEP, gt=0)
    samples: Optional[int] = Field(default=None, gt=0)
    seed: int = Field(default_factory=get_default_seed)
    tol: float = Field(default_factory=get_default_tolerance, gt=0)
    operator: Literal['riemann', 'chern'] = 'riemann'
    out: Optional[str] = None
    format: Literal['json', 'csv'] = 'json'
    workers: Optional[int] = Field(default=None, ge=1)

    @field_validator('x', 'y', 'flag', mode='before')
    @classmethod
    def _vector(cls, value):
        return parse_vector(value)

    @property
    def sample_count(self) -> int:
        return self.samples or DEFAULT_SAMPLES.get(self.command, 16)

    @property
    def curve_length(self) -> float:
        return self.length or DEFAULT_LENGTHS.get(self.command, 2.0 * math.pi)


def load_metric(cfg: RunConfig) -> MetricSpec:
    """Catalog name with --param values, or a profile from a metrics YAML file."""
    name = cfg.metric
    if cfg.config_path is None and name is not None and name.lower() in CATALOG_NAMES + ('flat',):
        return catalog(name, cfg.params, dimension=cfg.n)
    manager = ConfigManager(cfg.config_path) if cfg.config_path else ConfigManager()
    metric_config = manager.load_metric_config(name)
    if cfg.params:
        metric_config = metric_config.model_copy(update={'params': {**metric_config.params, **cfg.params}})
    if cfg.n is not None:
        metric_config = metric_config.model_copy(update={'dimension': cfg.n})
    return MetricFactory.create_metric(metric_config)


def _tangent_point(spec: MetricSpec, cfg: RunConfig) -> TangentPoint:
    n = spec.dimension
    x = cfg.x if cfg.x is not None else [0.0] * n
    y = cfg.y if cfg.y is not None else [1.0] + [0.0] * (n - 1)
    return TangentPoint(x, y)


def _curve_start(spec: MetricSpec, cfg: RunConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Defaults to x0 = sample_radius * e1 heading along e2."""
    n = spec.dimension
    x0 = np.asarray(cfg.x, dtype=float) if cfg.x is not None else spec.sample_radius * np.eye(n)[0]
    direction = np.asarray(cfg.y, dtype=float) if cfg.y is not None else np.eye(n)[1]
    return x0, dynamics.unit_initial_vector(spec, x0, direction)


def _field(cfg: RunConfig, text: Optional[str], n: int, option: str) -> ScalarField:
    if text is None:
        raise ConfigurationError(f"'{cfg.command}' needs --{option}")
    return ScalarField.from_expression(text, n)


def cmd_tensors(cfg: RunConfig):
    spec = load_metric(cfg)
    tp = _tangent_point(spec, cfg)
    jets = connection.PointJets(spec, tp, connection.CURVATURE_ORDER)
    f2 = float(jets.F2.value)
    ricci = curvature.ricci_scalar(spec, tp, jets)
    record: Dict[str, Any] = {
        'metric': spec.name,
        'x': tp.x.tolist(),
        'y': tp.y.tolist(),
        'F': math.sqrt(f2),
        'g': jets.g.value.tolist(),
        'g_inv': jets.ginv.value.tolist(),
        'spray': jets.spray.value.tolist(),
        'nonlinear_connection': jets.N.value.tolist(),
        'gamma': jets.Gamma.value.tolist(),
        'cartan': jets.C.value.tolist(),
        'chern_curvature': curvature.chern_hh(spec, tp, jets).components.tolist(),
        'spray_curvature': curvature.spray_curvature(spec, tp, jets).components.tolist(),
        'riemann': curvature.riemann_operator(spec, tp, jets).components.tolist(),
        'ricci': ricci,
        'ricci_normalized': ricci / f2,
        'ricci_tensor': curvature.ricci_tensor(spec, tp).components.tolist(),
    }
    if cfg.flag is not None:
        try:
            record['flag_curvature'] = curvature.flag_curvature(spec, tp, cfg.flag, jets)
        except DegenerateFlagError as e:
            logger.warning(str(e))
            record['flag_curvature'] = None
    return record, None, True


def _check_worker(config: Dict[str, Any], x, y, phi_text: Optional[str]):
    spec = MetricFactory.create_metric(config)
    phi = ScalarField.from_expression(phi_text, spec.dimension) if phi_text else None
    return schwarzian.point_norms(spec, TangentPoint(x, y), phi)


def _invariant_checks(spec: MetricSpec, sample: List[TangentPoint]) -> Dict[str, bool]:
    """Homogeneity, metricity and the trace identities on the sample."""
    homogeneous = True
    worst: Dict[str, float] = {}
    for tp in sample:
        F = eval_F(spec, tp)
        homogeneous &= abs(eval_F(spec, tp.scaled(2.0)) - 2.0 * F) <= 1e-10 * (1.0 + F)
        for key, value in schwarzian.structural_residuals(spec, tp).items():
            worst[key] = max(worst.get(key, 0.0), value)
    logger.info(f"Structural residuals: {', '.join(f'{k}={v:.2e}' for k, v in sorted(worst.items()))}")
    identities = ('cartan_y', 'riemann_y', 'chern_y', 'z_trace')
    return {
        'homogeneity': bool(homogeneous),
        'fundamental_tensor': bool(worst['fundamental_tensor'] <= 1e-8),
        'metricity': bool(worst['metricity'] <= STRUCTURAL_TOL),
        'trace_identities': bool(all(worst[k] <= STRUCTURAL_TOL for k in identities)),
    }


def cmd_check(cfg: RunConfig):
    spec = load_metric(cfg)
    sample = sample_points(spec, cfg.sample_count, seed=cfg.seed)
    phi = ScalarField.from_expression(cfg.phi, spec.dimension) if cfg.phi else None
    if cfg.workers and cfg.workers > 1:
        if spec.config is None:
            raise ConfigurationError(f"Metric '{spec.name}' has no config to rebuild it in worker processes")
        start = time.time()
        config = spec.config.model_dump()
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            futures = [pool.submit(_check_worker, config, tp.x, tp.y, cfg.phi) for tp in sample]
            norms = [f.result() for f in futures]
        report = schwarzian.assemble_report(spec, norms, cfg.tol, phi is not None)
        logger.info(f"[TIMING] check on '{spec.name}' with {cfg.workers} workers: {time.time() - start:.2f} seconds")
    else:
        report = schwarzian.integrability_report(spec, sample, phi=phi, tol=cfg.tol)
    report.verdicts.update(_invariant_checks(spec, sample))
    for key, verdict in sorted(report.verdicts.items()):
        logger.info(f"{key}: {'pass' if verdict else 'FAIL'}")
    return report, None, report.passed


def cmd_geodesic(cfg: RunConfig):
    spec = load_metric(cfg)
    x0, y0 = _curve_start(spec, cfg)
    traj = dynamics.geodesic(spec, x0, y0, cfg.curve_length, cfg.step)
    speeds = traj.speeds(spec)
    summary = {
        'metric': spec.name,
        'samples': len(traj),
        'length': traj.length,
        'step': traj.step,
        'exited': traj.exited,
        'speed_drift': float(np.max(np.abs(speeds - 1.0))),
        'end_x': traj.x[-1].tolist(),
    }
    return summary, dynamics.trajectory_rows(traj), True


def cmd_conjugate(cfg: RunConfig):
    spec = load_metric(cfg)
    x0, y0 = _curve_start(spec, cfg)
    traj = dynamics.geodesic(spec, x0, y0, cfg.curve_length, cfg.step)
    solution = dynamics.jacobi_field(spec, traj, cfg.operator)
    distance = dynamics.conjugate_search(spec, traj, cfg.operator, solution=solution)
    summary = {
        'metric': spec.name,
        'conjugate_distance': distance,
        'length': traj.length,
        'step': traj.step,
        'operator': cfg.operator,
        'wronskian': float(np.max(np.abs(dynamics.jacobi_wronskian(solution)))),
    }
    return summary, dynamics.trajectory_rows(traj, jacobi=solution), True


def cmd_projparam(cfg: RunConfig):
    spec = load_metric(cfg)
    x0, y0 = _curve_start(spec, cfg)
    traj = dynamics.geodesic(spec, x0, y0, cfg.curve_length, cfg.step)
    pp = dynamics.projective_parameter(spec, traj)
    residual = dynamics.schwarzian_residual_of_p(spec, traj, pp)
    summary = {
        'metric': spec.name,
        'length': float(pp.s[-1]),
        'step': pp.step,
        'blew_up': pp.blew_up,
        'p_end': float(pp.p[-1]),
        'residual': residual,
        'tol': cfg.tol,
    }
    return summary, dynamics.trajectory_rows(traj, projective=pp), residual <= cfg.tol


def cmd_bonnet(cfg: RunConfig):
    if cfg.lam is None:
        raise ConfigurationError("'bonnet' needs --lambda")
    spec = load_metric(cfg)
    report = dynamics.bonnet_myers_check(spec, cfg.lam, n_geodesics=cfg.sample_count, L_max=cfg.length,
                                         step=cfg.step, seed=cfg.seed, workers=cfg.workers)
    for result in report.geodesics:
        logger.info(f"geodesic {result.index}: {result.status}, conjugate distance {result.conjugate_distance}")
    return report, None, report.passed


def cmd_mobius(cfg: RunConfig):
    spec = load_metric(cfg)
    phi = _field(cfg, cfg.phi, spec.dimension, 'phi')
    sample = sample_points(spec, cfg.sample_count, seed=cfg.seed)
    residual = schwarzian.mobius_residual(spec, phi, sample)
    asymmetry = schwarzian.schwarzian_asymmetry(spec, phi, sample)
    c_conformal = max(schwarzian.c_conformal_residual(spec, phi, tp).sup_norm() for tp in sample)
    verdicts = {'mobius': residual <= cfg.tol, 'symmetric': asymmetry <= cfg.tol,
                'c_conformal': c_conformal <= cfg.tol}
    concircular = None
    if cfg.rho is not None:
        rho = ScalarField.from_expression(cfg.rho, spec.dimension)
        concircular = max(schwarzian.concircular_residual(spec, rho, cfg.c, tp).sup_norm() for tp in sample)
        verdicts['concircular'] = concircular <= cfg.tol
    report = MobiusReport(metric=spec.name, phi=phi.name, n_samples=len(sample), mobius_residual=residual,
                          schwarzian_asymmetry=asymmetry, c_conformal_residual=c_conformal,
                          concircular_residual=concircular, tol=cfg.tol, verdicts=verdicts)
    return report, None, all(report.verdicts.values())


COMMANDS = {
    'tensors': cmd_tensors,
    'check': cmd_check,
    'geodesic': cmd_geodesic,
    'conjugate': cmd_conjugate,
    'projparam': cmd_projparam,
    'bonnet': cmd_bonnet,
    'mobius': cmd_mobius,
}


def render(cfg: RunConfig, payload: Any, rows: Optional[Tuple[List[str], List[List[float]]]]) -> str:
    if cfg.format == 'csv':
        return rows_to_csv(*rows) if rows is not None else record_to_csv(payload)
    if rows is not None:
        header, values = rows
        payload = {'summary': payload, 'columns': header, 'rows': values}
    return to_json(payload) + '\n'


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description='Finsler connection, curvature and Schwarzian computations')
    subparsers = parser.add_subparsers(dest='command', required=True)
    for name, command in COMMANDS.items():
        sub = subparsers.add_parser(name, help=command.__name__.replace('cmd_', ''))
        sub.add_argument('--metric', help=f"Catalog metric ({', '.join(CATALOG_NAMES)}) or profile name")
        sub.add_argument('--n', type=int, help='Chart dimension (default: the metric builder or profile dimension)')
        sub.add_argument('--config', dest='config_path', help='Metric profiles YAML file')
        sub.add_argument('--param', action='append', help='Metric parameter key=value (repeatable)')
        sub.add_argument('--x', help='Base point, comma-separated')
        sub.add_argument('--y', help='Direction, comma-separated')
        sub.add_argument('--flag', help='Flag pole X for flag curvature')
        sub.add_argument('--phi', help='Conformal factor expression in x1..xn')
        sub.add_argument('--rho', help='Concircular field expression in x1..xn')
        sub.add_argument('--c', type=float, default=1.0)
        sub.add_argument('--lambda', dest='lam', type=float, help='Ricci lower bound')
        sub.add_argument('--length', type=float)
        sub.add_argument('--step', type=float, default=dynamics.DEFAULT_STEP)
        sub.add_argument('--samples', type=int, help='Sample points or geodesics')
        sub.add_argument('--seed', type=int, default=get_default_seed())
        sub.add_argument('--tol', type=float, default=get_default_tolerance())
        sub.add_argument('--operator', choices=['riemann', 'chern'], default='riemann')
        sub.add_argument('--out', help='Write the report here instead of stdout')
        sub.add_argument('--format', choices=['json', 'csv'], default='json')
        sub.add_argument('--workers', type=int, help='Worker processes for check and bonnet')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logging.basicConfig(
        level=get_log_level(),
        format='%(asctime)s - %(levelname)s - %(message)s'
    )
    args = build_parser().parse_args(argv)
    try:
        options = {k: v for k, v in vars(args).items() if v is not None and k != 'param'}
        options['params'] = parse_params(args.param)
        cfg = RunConfig(**options)
        payload, rows, passed = COMMANDS[cfg.command](cfg)
        text = render(cfg, payload, rows)
        if cfg.out:
            write_text(cfg.out, text)
        else:
            sys.stdout.write(text)
    except (FinslerError, ValueError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_ERROR
    if not passed:
        logger.warning(f"{args.command}: verdict failure")
        return EXIT_VERDICT
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
