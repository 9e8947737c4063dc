import os
from typing import Dict, Any, Optional
import yaml
from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator

from finsler.errors import ConfigurationError

# Load environment variables
load_dotenv()

DEFAULT_MAX_ORDER = 4
HARD_MAX_ORDER = 5


def get_max_order() -> int:
    """Maximum jet order, FINSLER_MAX_ORDER overrides the default of 4."""
    raw = os.getenv('FINSLER_MAX_ORDER', str(DEFAULT_MAX_ORDER))
    try:
        order = int(raw)
    except ValueError:
        raise ConfigurationError(f"FINSLER_MAX_ORDER must be an integer, got '{raw}'")
    if not 1 <= order <= HARD_MAX_ORDER:
        raise ConfigurationError(f"FINSLER_MAX_ORDER must lie in 1..{HARD_MAX_ORDER}, got {order}")
    return order


def get_default_seed() -> int:
    return int(os.getenv('FINSLER_SEED', '42'))


def get_default_tolerance() -> float:
    return float(os.getenv('FINSLER_TOLERANCE', '1e-4'))


def get_log_level() -> str:
    return os.getenv('FINSLER_LOG_LEVEL', 'INFO').upper()


class MetricConfig(BaseModel):
    """One metric profile: catalog kind, chart dimension and kind-specific parameters."""
    model_config = ConfigDict(extra='forbid')

    kind: str
    dimension: Optional[int] = Field(default=None, ge=2)
    params: Dict[str, Any] = Field(default_factory=dict)
    domain_radius: Optional[float] = Field(default=None, gt=0)
    name: Optional[str] = None

    @field_validator('kind')
    @classmethod
    def _lower_kind(cls, value: str) -> str:
        return value.strip().lower()


class ConfigManager:
    def __init__(self, config_path: str = 'config/metrics.yaml'):
        self.config_path = config_path
        self.configs = self._load_configs()

    def _load_configs(self) -> Dict[str, Any]:
        if os.path.exists(self.config_path):
            with open(self.config_path, 'r') as f:
                return yaml.safe_load(f) or {}
        return {}

    def get_active_metric(self) -> str:
        """Get the active metric profile name from environment variables."""
        return os.getenv('FINSLER_DEFAULT_METRIC', 'sphere')

    def get_metric_config(self, name: str = None) -> Dict[str, Any]:
        """Get a metric profile, using the environment variable if name is not specified."""
        if name is None:
            name = self.get_active_metric()
        return self.configs.get(name, {})

    def profile_names(self):
        return sorted(self.configs.keys())

    def load_metric_config(self, name: str = None) -> MetricConfig:
        raw = self.get_metric_config(name)
        if not raw:
            raise ConfigurationError(
                f"Metric profile '{name or self.get_active_metric()}' not found in {self.config_path}")
        try:
            return MetricConfig(**raw)
        except ValueError as e:
            raise ConfigurationError(f"Invalid metric profile '{name}': {e}")
