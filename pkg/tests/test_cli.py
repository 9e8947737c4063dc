import json
import math

import pytest
from pydantic import ValidationError

from finsler.cli import EXIT_ERROR, EXIT_OK, EXIT_VERDICT, RunConfig, main, parse_params


def run(capsys, *argv):
    """Run the CLI and return (exit code, parsed JSON from stdout or None)."""
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, (json.loads(out) if out.strip() else None)


# tensors

def test_tensors_on_flat_space(capsys):
    code, record = run(capsys, 'tensors', '--metric', 'euclidean', '--x', '0.3,0.1', '--y', '1,0')
    assert code == EXIT_OK
    assert record['F'] == pytest.approx(1.0)
    assert record['ricci'] == pytest.approx(0.0, abs=1e-12)
    assert max(abs(v) for plane in record['spray_curvature'] for row in plane for v in row) < 1e-12


def test_tensors_sphere_flag_curvature(capsys):
    code, record = run(capsys, 'tensors', '--metric', 'sphere', '--n', '2', '--x', '0.1,0.2', '--y', '1,0',
                       '--flag', '0,1')
    assert code == EXIT_OK
    assert record['flag_curvature'] == pytest.approx(1.0, abs=1e-5)


def test_tensors_funk_ricci(capsys):
    code, record = run(capsys, 'tensors', '--metric', 'funk', '--x', '0.1,0.3', '--y', '1,0.2')
    assert code == EXIT_OK
    assert record['ricci_normalized'] == pytest.approx(-0.25, abs=1e-6)


def test_tensors_degenerate_flag_is_reported_as_null(capsys):
    code, record = run(capsys, 'tensors', '--metric', 'sphere', '--y', '1,1', '--flag', '2,2')
    assert code == EXIT_OK
    assert record['flag_curvature'] is None


def test_catalog_dimension_defaults_to_the_builder(capsys):
    code, record = run(capsys, 'tensors', '--metric', 'perturbed_randers')
    assert code == EXIT_OK
    assert len(record['x']) == 3
    assert len(record['g']) == 3


def test_n_overrides_a_profile_dimension(capsys, tmp_path):
    path = tmp_path / 'profiles.yaml'
    path.write_text("ball:\n  kind: sphere\n  dimension: 2\n")
    code, record = run(capsys, 'tensors', '--config', str(path), '--metric', 'ball', '--n', '3')
    assert code == EXIT_OK
    assert len(record['x']) == 3


def test_catalog_parameters_from_the_command_line(capsys):
    code, record = run(capsys, 'tensors', '--metric', 'sphere', '--param', 'curvature=4', '--flag', '0,1')
    assert code == EXIT_OK
    assert record['flag_curvature'] == pytest.approx(4.0, abs=1e-5)


def test_metric_profile_from_config_file(capsys, tmp_path):
    path = tmp_path / 'profiles.yaml'
    path.write_text("mysphere:\n  kind: sphere\n  dimension: 2\n  params:\n    curvature: 4.0\n")
    code, record = run(capsys, 'tensors', '--config', str(path), '--metric', 'mysphere', '--flag', '0,1')
    assert code == EXIT_OK
    assert record['flag_curvature'] == pytest.approx(4.0, abs=1e-5)


# check and mobius

def test_check_flat_space_passes(capsys):
    code, report = run(capsys, 'check', '--metric', 'euclidean', '--samples', '3')
    assert code == EXIT_OK
    assert set(report['verdicts']) == {'Z', 'Zscalar', 'homogeneity', 'fundamental_tensor', 'metricity',
                                       'trace_identities'}
    assert report['n_samples'] == 3


def test_check_perturbed_randers_fails(capsys):
    code, report = run(capsys, 'check', '--metric', 'perturbed_randers', '--n', '3', '--samples', '3')
    assert code == EXIT_VERDICT
    assert max(report['sup_Z'], report['sup_Zscalar']) > report['tol']


def test_check_uses_the_builder_dimension_without_n(capsys):
    code, report = run(capsys, 'check', '--metric', 'perturbed_randers', '--samples', '3')
    assert code == EXIT_VERDICT
    assert not (report['verdicts']['Z'] and report['verdicts']['Zscalar'])
    assert report['n_samples'] == 3


def test_check_sphere_verdicts_are_json_booleans(capsys):
    code, report = run(capsys, 'check', '--metric', 'sphere', '--samples', '2')
    assert code == EXIT_OK
    assert all(type(verdict) is bool for verdict in report['verdicts'].values())
    assert all(report['verdicts'].values())


def test_check_reports_are_deterministic(capsys, tmp_path):
    paths = [tmp_path / 'first.json', tmp_path / 'second.json']
    for path in paths:
        assert main(['check', '--metric', 'funk', '--samples', '2', '--seed', '5', '--out', str(path)]) == EXIT_OK
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_check_with_conformal_factor(capsys):
    code, report = run(capsys, 'check', '--metric', 'euclidean', '--samples', '2',
                       '--phi', 'log(2/(1 + x1^2 + x2^2))')
    assert code == EXIT_OK
    assert report['verdicts']['B']


def test_mobius_constant_factor(capsys):
    code, report = run(capsys, 'mobius', '--metric', 'euclidean', '--phi', '0.5', '--samples', '3')
    assert code == EXIT_OK
    assert report['mobius_residual'] == 0.0


def test_mobius_reports_schwarzian_asymmetry(capsys):
    code, report = run(capsys, 'mobius', '--metric', 'funk', '--phi', '0.3*x1 + 0.2*x2^2', '--samples', '3')
    assert code == EXIT_VERDICT
    assert report['verdicts']['symmetric']
    assert report['schwarzian_asymmetry'] < 1e-10 * (1.0 + report['mobius_residual'])


def test_mobius_cubic_factor_fails(capsys):
    code, report = run(capsys, 'mobius', '--metric', 'euclidean', '--phi', 'x1^3', '--samples', '3')
    assert code == EXIT_VERDICT
    assert not report['verdicts']['mobius']


def test_mobius_with_concircular_field(capsys):
    code, report = run(capsys, 'mobius', '--metric', 'sphere', '--phi', '0', '--samples', '2',
                       '--rho', '(1 - x1^2 - x2^2)/(1 + x1^2 + x2^2)', '--c', '1')
    assert code == EXIT_OK
    assert report['verdicts']['concircular']


# dynamics

def test_geodesic_csv_output(capsys, tmp_path):
    path = tmp_path / 'geodesic.csv'
    code = main(['geodesic', '--metric', 'sphere', '--step', '0.01', '--format', 'csv', '--out', str(path)])
    assert code == EXIT_OK
    lines = path.read_text().splitlines()
    assert lines[0] == 's,x1,x2,v1,v2'
    first, last = lines[1].split(','), lines[-1].split(',')
    assert float(last[0]) == pytest.approx(2.0 * math.pi)
    assert float(last[1]) == pytest.approx(float(first[1]), abs=1e-6)


def test_conjugate_point_on_the_sphere(capsys):
    code, payload = run(capsys, 'conjugate', '--metric', 'sphere', '--x', '1,0', '--y', '0,1', '--length', '4',
                        '--step', '0.01')
    assert code == EXIT_OK
    assert payload['summary']['conjugate_distance'] == pytest.approx(math.pi, abs=1e-3)
    assert payload['columns'] == ['s', 'x1', 'x2', 'v1', 'v2', 'detJ']


def test_projective_parameter_on_the_sphere(capsys):
    code, payload = run(capsys, 'projparam', '--metric', 'sphere', '--x', '1,0', '--y', '0,1', '--length', '1.0',
                        '--step', '0.002', '--tol', '1e-5')
    assert code == EXIT_OK
    assert payload['summary']['p_end'] == pytest.approx(math.tan(1.0), rel=1e-4)
    assert payload['columns'][-3:] == ['p', 'dp', 'ddp']


def test_bonnet_on_flat_space_violates_the_hypothesis(capsys):
    code, report = run(capsys, 'bonnet', '--metric', 'euclidean', '--lambda', '1', '--samples', '1',
                       '--length', '1', '--step', '0.05')
    assert code == EXIT_VERDICT
    assert report['geodesics'][0]['status'] == 'hypothesis-violated'


# errors

def test_bonnet_needs_lambda(capsys):
    assert main(['bonnet', '--metric', 'sphere']) == EXIT_ERROR


def test_unknown_metric(capsys):
    assert main(['tensors', '--metric', 'no_such_metric']) == EXIT_ERROR


def test_malformed_vector(capsys):
    assert main(['tensors', '--metric', 'sphere', '--x', 'a,b']) == EXIT_ERROR


def test_order_limit_from_environment(capsys, monkeypatch):
    monkeypatch.setenv('FINSLER_MAX_ORDER', '3')
    assert main(['tensors', '--metric', 'sphere']) == EXIT_ERROR


def test_run_config_rejects_unknown_options():
    with pytest.raises(ValidationError):
        RunConfig(command='check', colour='blue')


def test_parse_params_reads_yaml_values():
    assert parse_params(['curvature=4', "b=[0.2, '0.1*x1']"]) == {'curvature': 4, 'b': [0.2, '0.1*x1']}
