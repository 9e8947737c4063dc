import math
import os

import numpy as np
import pytest

from finsler.config import ConfigManager, MetricConfig
from finsler.errors import ConfigurationError, DomainError, InvalidParameterError
from finsler.metrics import (MetricFactory, catalog, custom, eval_F, fundamental_matrix, funk, funk_implicit_F,
                             inverse_metric, randers, sample_points, sphere, unit_vector)
from finsler.tensors import TangentPoint


def test_euclidean_norm(flat):
    assert eval_F(flat, TangentPoint([0.3, -0.2], [3.0, 4.0])) == pytest.approx(5.0)


def test_sphere_on_unit_circle_is_isometric(sphere2):
    # conformal factor 2 / (1 + |x|^2) equals 1 on the unit circle
    assert eval_F(sphere2, TangentPoint([1.0, 0.0], [0.0, 1.0])) == pytest.approx(1.0)
    np.testing.assert_allclose(fundamental_matrix(sphere2, TangentPoint([0.5, 0.0], [1.0, 1.0])),
                               (4.0 / 1.25 ** 2) * np.eye(2), rtol=1e-12)


def test_funk_randers_form_matches_defining_equation(funk_sample):
    spec = funk(2)
    for tp in funk_sample:
        assert eval_F(spec, tp) == pytest.approx(funk_implicit_F(tp.x, tp.y), rel=1e-10)


def test_funk_outside_unit_ball_raises(funk2):
    with pytest.raises(DomainError):
        eval_F(funk2, TangentPoint([1.2, 0.0], [1.0, 0.0]))


def test_vanishing_direction_raises(flat):
    with pytest.raises(DomainError):
        eval_F(flat, TangentPoint([0.0, 0.0], [0.0, 0.0]))


def test_positive_homogeneity(funk_sample, funk2):
    for tp in funk_sample:
        F = eval_F(funk2, tp)
        assert eval_F(funk2, tp.scaled(2.5)) == pytest.approx(2.5 * F, rel=1e-12)
        np.testing.assert_allclose(fundamental_matrix(funk2, tp.scaled(2.5)), fundamental_matrix(funk2, tp),
                                   rtol=1e-8, atol=1e-10)


def test_fundamental_tensor_reproduces_F2(funk_sample, funk2):
    for tp in funk_sample:
        g = fundamental_matrix(funk2, tp)
        assert tp.y @ g @ tp.y == pytest.approx(eval_F(funk2, tp) ** 2, rel=1e-10)


def test_inverse_metric(funk_sample, funk2):
    tp = funk_sample[0]
    product = np.asarray(inverse_metric(funk2, tp)) @ fundamental_matrix(funk2, tp)
    np.testing.assert_allclose(product, np.eye(2), atol=1e-10)


def test_unit_vector_has_unit_length(funk2):
    tp = TangentPoint([0.2, 0.1], [0.3, -1.0])
    assert eval_F(funk2, tp.with_y(unit_vector(funk2, tp))) == pytest.approx(1.0)


def test_custom_expression_matches_randers():
    tp = TangentPoint([0.1, 0.4], [0.7, -1.1])
    expression = custom(2, F='sqrt(y1^2 + y2^2) + 0.2*y1')
    builtin = randers(2, b=[0.2, 0.0])
    assert eval_F(expression, tp) == pytest.approx(eval_F(builtin, tp), rel=1e-12)
    np.testing.assert_allclose(fundamental_matrix(expression, tp), fundamental_matrix(builtin, tp), rtol=1e-12)


# Parameter validation

def test_randers_rejects_long_one_form():
    with pytest.raises(InvalidParameterError):
        randers(2, b=[1.2, 0.0])


def test_randers_point_outside_convexity_domain():
    spec = randers(2, b=['0.5*x1', 0.0])
    with pytest.raises(DomainError):
        eval_F(spec, TangentPoint([2.5, 0.0], [1.0, 0.0]))


def test_sphere_needs_positive_curvature():
    with pytest.raises(InvalidParameterError):
        sphere(2, curvature=-1.0)


def test_unknown_catalog_name():
    with pytest.raises(InvalidParameterError):
        catalog('torus')


def test_unexpected_catalog_parameter():
    with pytest.raises(InvalidParameterError):
        catalog('sphere', {'radius': 2.0})


def test_factory_builds_from_dict():
    spec = MetricFactory.create_metric({'kind': 'Sphere', 'dimension': 3, 'params': {'curvature': 4.0}})
    assert spec.dimension == 3
    assert spec.config.kind == 'sphere'
    assert spec.sample_radius == pytest.approx(0.5)


def test_catalog_dimension_defaults_to_the_builder():
    assert catalog('perturbed_randers').dimension == 3
    assert catalog('perturbed_randers', dimension=4).dimension == 4
    assert catalog('sphere', {'n': 3}).dimension == 3
    spec = MetricFactory.create_metric({'kind': 'perturbed_randers'})
    assert spec.dimension == 3
    assert spec.config.dimension == 3


def test_factory_revalidates_randers_on_a_wider_domain():
    config = {'kind': 'randers', 'params': {'b': ['0.9*x1', 0.0]}}
    assert MetricFactory.create_metric(config).b_norm([0.5, 0.0]) == pytest.approx(0.45)
    with pytest.raises(InvalidParameterError):
        MetricFactory.create_metric({**config, 'domain_radius': 5.0})
    narrow = MetricFactory.create_metric({**config, 'domain_radius': 1.05})
    assert narrow.domain_radius == pytest.approx(1.05)


def test_factory_rejects_unknown_keys():
    with pytest.raises(ConfigurationError):
        MetricFactory.create_metric({'kind': 'sphere', 'colour': 'blue'})


def test_config_manager_reads_profiles(tmp_path):
    path = tmp_path / 'metrics.yaml'
    path.write_text("wind:\n  kind: randers\n  dimension: 2\n  params:\n    b: [0.2, '0.1*x1']\n")
    manager = ConfigManager(str(path))
    assert manager.profile_names() == ['wind']
    config = manager.load_metric_config('wind')
    assert isinstance(config, MetricConfig)
    spec = MetricFactory.create_metric(config)
    tp = TangentPoint([0.5, 0.0], [1.0, 0.0])
    assert eval_F(spec, tp) == pytest.approx(1.0 + 0.2)
    with pytest.raises(ConfigurationError):
        manager.load_metric_config('missing')


def test_shipped_profiles_load():
    manager = ConfigManager(os.path.join(os.path.dirname(__file__), "..", "config", "metrics.yaml"))
    for name in manager.profile_names():
        spec = MetricFactory.create_metric(manager.load_metric_config(name))
        tp = sample_points(spec, 1, seed=3)[0]
        assert eval_F(spec, tp) > 0


def test_conformal_profile_scales_base():
    spec = catalog('conformal', {'base': {'kind': 'euclidean'}, 'phi': '0.5*x1'})
    tp = TangentPoint([0.4, 0.0], [0.0, 2.0])
    assert eval_F(spec, tp) == pytest.approx(math.exp(0.2) * 2.0)


# Sampling

def test_sampling_is_reproducible(funk2):
    first = sample_points(funk2, 5, seed=3)
    second = sample_points(funk2, 5, seed=3)
    for a, b in zip(first, second):
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.y, b.y)


def test_samples_stay_inside_domain(hyperbolic2):
    for tp in sample_points(hyperbolic2, 20, seed=5):
        assert np.linalg.norm(tp.x) < 1.0
