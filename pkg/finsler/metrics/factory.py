import logging
from typing import Any, Dict, Union

from finsler.config import MetricConfig
from finsler.errors import ConfigurationError
from finsler.metrics.catalog import catalog
from finsler.metrics.interface import MetricSpec

logger = logging.getLogger(__name__)


class MetricFactory:
    @staticmethod
    def create_metric(config: Union[MetricConfig, Dict[str, Any]]) -> MetricSpec:
        if not isinstance(config, MetricConfig):
            try:
                config = MetricConfig(**config)
            except ValueError as e:
                raise ConfigurationError(f"Invalid metric config: {e}")
        spec = catalog(config.kind, config.params, dimension=config.dimension)
        if config.domain_radius is not None and spec.domain_radius != config.domain_radius:
            spec.domain_radius = config.domain_radius
            spec.sample_radius = min(spec.sample_radius, 0.5 * config.domain_radius)
            if hasattr(spec, 'validate'):
                spec.validate()
        if config.name:
            spec.name = config.name
        if config.dimension is None:
            config = config.model_copy(update={'dimension': spec.dimension})
        spec.config = config
        logger.debug(f"Created metric '{spec.name}' of kind {config.kind} in dimension {spec.dimension}")
        return spec
