import math
from dataclasses import replace

import numpy as np
import pytest

from finsler.dynamics import (JacobiSolution, bonnet_myers_check, bonnet_starts, conjugate_search, curvature_along,
                              geodesic, jacobi_field, jacobi_residual, jacobi_wronskian, mobius_gauge,
                              projective_factor, projective_parameter, schwarzian_residual_of_p, trajectory_rows,
                              unit_initial_vector, write_trajectory)
from finsler.errors import ChartExitError, ConfigurationError, InvalidParameterError
from finsler.metrics import RiemannianMetric, catalog, eval_F
from finsler.tensors import TangentPoint

EQUATOR_START = ([1.0, 0.0], [0.0, 1.0])


@pytest.fixture(scope="module")
def sphere_traj(sphere2):
    return geodesic(sphere2, *EQUATOR_START, length=4.0, step=0.01)


@pytest.fixture(scope="module")
def sphere_solution(sphere2, sphere_traj):
    return jacobi_field(sphere2, sphere_traj)


@pytest.fixture(scope="module")
def quarter_arc(sphere2):
    """Equator geodesic up to s = 1.4 with its curvature frame; p = tan s there."""
    traj = geodesic(sphere2, *EQUATOR_START, length=1.4, step=1e-3)
    return traj, curvature_along(sphere2, traj)


# Geodesics

def test_flat_geodesic_is_a_straight_line(flat):
    x0 = np.array([0.1, 0.2])
    y0 = np.array([0.6, 0.8])
    traj = geodesic(flat, x0, y0, length=2.0, step=0.1)
    np.testing.assert_allclose(traj.x, x0 + np.outer(traj.s, y0), atol=1e-12)
    assert traj.length == pytest.approx(2.0)


def test_sphere_equator_closes_after_two_pi(sphere2):
    traj = geodesic(sphere2, *EQUATOR_START, length=2.0 * math.pi, step=2.0 * math.pi / 628)
    np.testing.assert_allclose(traj.x[-1], EQUATOR_START[0], atol=1e-6)
    assert np.max(np.abs(traj.speeds(sphere2) - 1.0)) < 1e-6


def test_funk_geodesic_keeps_unit_speed(funk2):
    traj = geodesic(funk2, [0.0, 0.0], unit_initial_vector(funk2, [0.0, 0.0], [1.0, 0.0]), length=3.0, step=0.01)
    assert np.max(np.abs(traj.speeds(funk2) - 1.0)) < 1e-6
    # forward Funk distance from the centre is -log(1 - |x|)
    assert traj.x[-1, 0] == pytest.approx(1.0 - math.exp(-3.0), rel=1e-6)


def test_integrator_is_fourth_order(sphere2):
    exact = np.array([math.cos(2.0), math.sin(2.0)])
    errors = [np.linalg.norm(geodesic(sphere2, *EQUATOR_START, length=2.0, step=h).x[-1] - exact)
              for h in (0.1, 0.05)]
    assert 12.0 <= errors[0] / errors[1] <= 20.0


def test_initial_vector_must_be_unit(sphere2):
    with pytest.raises(InvalidParameterError):
        geodesic(sphere2, [1.0, 0.0], [0.0, 2.0], length=1.0)


def test_leaving_the_chart(hyperbolic2):
    traj = geodesic(hyperbolic2, [0.0, 0.0], [0.5, 0.0], length=30.0, step=0.05)
    assert traj.exited
    assert traj.length < 30.0
    assert np.all(np.linalg.norm(traj.x, axis=1) < 1.0)
    with pytest.raises(ChartExitError):
        geodesic(hyperbolic2, [0.0, 0.0], [0.5, 0.0], length=30.0, step=0.05, strict=True)


# Jacobi fields and conjugate points

def test_first_conjugate_point_on_the_sphere(sphere2, sphere_traj, sphere_solution):
    assert conjugate_search(sphere2, sphere_traj, solution=sphere_solution) == pytest.approx(math.pi, abs=1e-3)


def test_jacobi_flow_is_symplectic(sphere_solution):
    assert np.max(np.abs(jacobi_wronskian(sphere_solution))) < 1e-6


def test_jacobi_residual_is_small(sphere_solution):
    assert jacobi_residual(sphere_solution) < 1e-5


def test_chern_operator_matches_riemann_operator(sphere2, sphere_traj, sphere_solution):
    chern = jacobi_field(sphere2, sphere_traj, operator='chern')
    np.testing.assert_allclose(chern.J, sphere_solution.J, atol=1e-8)


def test_unknown_jacobi_operator(sphere2, sphere_traj):
    with pytest.raises(ValueError):
        curvature_along(sphere2, sphere_traj, operator='ricci')


def test_no_conjugate_point_without_positive_curvature(flat, hyperbolic2):
    line = geodesic(flat, [0.0, 0.0], [1.0, 0.0], length=5.0, step=0.05)
    assert conjugate_search(flat, line) is None
    traj = geodesic(hyperbolic2, [0.0, 0.0], [0.5, 0.0], length=10.0, step=0.02)
    assert not traj.exited
    assert conjugate_search(hyperbolic2, traj) is None


@pytest.mark.parametrize('kappa', [0.25, 1.0, 4.0])
def test_conjugate_distance_scales_with_curvature(kappa):
    spec = catalog('sphere', {'curvature': kappa})
    x0, y0 = bonnet_starts(spec, 1, seed=5)[0]
    scale = 1.0 / math.sqrt(kappa)
    traj = geodesic(spec, x0, y0, length=1.2 * math.pi * scale, step=0.01 * scale)
    assert conjugate_search(spec, traj) == pytest.approx(math.pi * scale, rel=1e-3)


def test_even_multiplicity_conjugate_point():
    # Jacobi fields of the round 3-sphere: det J = s sin^2 s never changes sign
    s = np.linspace(0.0, 4.0, 201)
    count = len(s)
    J = np.zeros((count, 3, 3))
    W = np.zeros((count, 3, 3))
    J[:, 0, 0] = s
    W[:, 0, 0] = 1.0
    for i in (1, 2):
        J[:, i, i] = np.sin(s)
        W[:, i, i] = np.cos(s)
    operator = np.tile(np.diag([0.0, 1.0, 1.0]), (count, 1, 1))
    solution = JacobiSolution(s=s, J=J, W=W, indices=np.arange(count), gamma_t=np.zeros((count, 3, 3)),
                              jacobi_operator=operator, g=np.tile(np.eye(3), (count, 1, 1)), operator='riemann',
                              step=s[1] - s[0])
    assert np.all(solution.det()[1:] > 0)
    assert conjugate_search(catalog('euclidean', dimension=3), None, solution=solution) == pytest.approx(math.pi,
                                                                                                       abs=1e-6)


# Projective parameter

def test_flat_projective_parameter_is_affine(flat):
    traj = geodesic(flat, [0.0, 0.0], [1.0, 0.0], length=1.0, step=0.01)
    pp = projective_parameter(flat, traj)
    np.testing.assert_allclose(pp.p, pp.s, atol=1e-12)
    assert schwarzian_residual_of_p(flat, traj, pp) < 1e-10


def test_sphere_projective_parameter_is_tangent(sphere2, quarter_arc):
    traj, frame = quarter_arc
    pp = projective_parameter(sphere2, traj, frame=frame)
    np.testing.assert_allclose(pp.S, 2.0, rtol=1e-8)
    np.testing.assert_allclose(pp.p, np.tan(pp.s), rtol=1e-6, atol=1e-12)
    assert not pp.blew_up
    assert schwarzian_residual_of_p(sphere2, traj, pp) < 1e-6


def test_perturbed_parameter_fails_the_residual(sphere2, quarter_arc):
    traj, frame = quarter_arc
    pp = projective_parameter(sphere2, traj, frame=frame)
    perturbed = replace(pp, p=pp.p + 0.01 * pp.s ** 2, dp=pp.dp + 0.02 * pp.s, ddp=pp.ddp + 0.02)
    assert schwarzian_residual_of_p(sphere2, traj, perturbed) > 1e-3


def test_moebius_gauge_gives_another_projective_parameter(sphere2, quarter_arc):
    traj, frame = quarter_arc
    pp = projective_parameter(sphere2, traj, frame=frame)
    gauged = mobius_gauge(pp, 2.0, 1.0, 1.0, 3.0)
    np.testing.assert_allclose(gauged.initial, (1.0 / 3.0, 5.0 / 9.0, -10.0 / 27.0), rtol=1e-12)
    assert schwarzian_residual_of_p(sphere2, traj, gauged) < 1e-6
    # uniqueness: solving from the transformed initial data gives the same curve
    solved = projective_parameter(sphere2, traj, initial=gauged.initial, frame=frame)
    np.testing.assert_allclose(solved.p, gauged.p, rtol=1e-5)


def test_projective_parameter_needs_increasing_start(sphere2, quarter_arc):
    traj, frame = quarter_arc
    with pytest.raises(InvalidParameterError):
        projective_parameter(sphere2, traj, initial=(0.0, 0.0, 1.0), frame=frame)


def test_singular_moebius_map_is_rejected(sphere2, quarter_arc):
    traj, frame = quarter_arc
    pp = projective_parameter(sphere2, traj, frame=frame)
    with pytest.raises(InvalidParameterError):
        mobius_gauge(pp, 1.0, 2.0, 2.0, 4.0)


def test_projective_factor(flat, funk2, sphere2):
    tp = TangentPoint([0.2, -0.1], [0.7, 0.4])
    assert projective_factor(funk2, funk2, tp) == pytest.approx(0.0, abs=1e-12)
    assert projective_factor(flat, funk2, tp) == pytest.approx(0.5 * eval_F(funk2, tp), rel=1e-6)
    assert projective_factor(flat, sphere2, TangentPoint([0.3, 0.1], [1.0, 0.5])) is None


# Bonnet-Myers check

def test_bonnet_myers_on_the_unit_sphere(sphere2):
    report = bonnet_myers_check(sphere2, 1.0, n_geodesics=2, step=0.01, seed=3)
    assert report.passed
    for result in report.geodesics:
        assert result.status == 'ok'
        assert result.min_ricci_ratio == pytest.approx(1.0, abs=1e-8)
        assert result.conjugate_distance == pytest.approx(math.pi, abs=1e-3)


@pytest.mark.parametrize('kappa', [0.25, 4.0])
def test_bonnet_myers_sweep_on_rescaled_spheres(kappa):
    spec = catalog('sphere', {'curvature': kappa})
    scale = 1.0 / math.sqrt(kappa)
    report = bonnet_myers_check(spec, 0.99 * kappa, n_geodesics=10, step=0.02 * scale, seed=11)
    assert report.n_geodesics == 10
    assert report.passed
    for result in report.geodesics:
        assert result.min_ricci_ratio == pytest.approx(kappa, rel=1e-6)
        assert result.conjugate_distance == pytest.approx(math.pi * scale, abs=1e-2)


def test_bonnet_myers_with_a_weaker_bound(sphere2):
    report = bonnet_myers_check(sphere2, 0.5, n_geodesics=1, step=0.01)
    assert report.bound == pytest.approx(math.pi / math.sqrt(0.5))
    assert report.geodesics[0].status == 'ok'
    assert report.geodesics[0].conjugate_distance < report.bound


def test_bonnet_myers_hypothesis_fails_on_flat_space(flat):
    report = bonnet_myers_check(flat, 1.0, n_geodesics=2, L_max=1.0, step=0.05)
    assert report.hypothesis_violated
    assert not report.passed
    assert all(result.conjugate_distance is None for result in report.geodesics)


def test_bonnet_myers_rejects_non_positive_lambda(sphere2):
    with pytest.raises(InvalidParameterError):
        bonnet_myers_check(sphere2, 0.0)


def test_worker_pool_needs_a_rebuildable_metric():
    spec = RiemannianMetric('plain', 2, lambda x: 1.0)
    with pytest.raises(ConfigurationError):
        bonnet_myers_check(spec, 1.0, n_geodesics=2, workers=2)


def test_bonnet_starts_are_unit_and_reproducible(sphere2):
    first = bonnet_starts(sphere2, 3, seed=8)
    second = bonnet_starts(sphere2, 3, seed=8)
    for (x0, y0), (x1, y1) in zip(first, second):
        np.testing.assert_array_equal(x0, x1)
        assert eval_F(sphere2, TangentPoint(x0, y0)) == pytest.approx(1.0)


# Output rows

def test_trajectory_rows_and_csv(sphere2, sphere_traj, sphere_solution, tmp_path):
    header, rows = trajectory_rows(sphere_traj, jacobi=sphere_solution)
    assert header == ['s', 'x1', 'x2', 'v1', 'v2', 'detJ']
    assert len(rows) == len(sphere_solution.s)
    assert rows[0][0] == 0.0
    path = tmp_path / 'trajectory.csv'
    write_trajectory(str(path), sphere_traj, jacobi=sphere_solution)
    lines = path.read_text().splitlines()
    assert lines[0] == 's,x1,x2,v1,v2,detJ'
    assert len(lines) == len(rows) + 1
