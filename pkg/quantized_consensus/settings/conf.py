from typing import Any

from django.conf import settings

from quantized_consensus.settings.setup import configure_django_settings


class ConsensusConfig:
    """A configuration handler.

    allowing dynamic settings loading from the Django settings, with
    default fallbacks. Settings are read on access, so values set through
    environment variables or a host project are always honoured.

    """

    config_prefix = "QUANTIZED_CONSENSUS_"

    def get_setting(self, setting_name: str, default_value: Any) -> Any:
        """Retrieve a setting from Django settings with a default fallback."""
        configure_django_settings()
        return getattr(settings, setting_name, default_value)

    @property
    def output_dir(self) -> Any:
        return self.get_setting(f"{self.config_prefix}OUTPUT_DIR", ".")

    @property
    def euler_dt(self) -> Any:
        return self.get_setting(f"{self.config_prefix}EULER_DT", 0.005)

    @property
    def max_jumps(self) -> Any:
        return self.get_setting(f"{self.config_prefix}MAX_JUMPS", 1_000_000)

    @property
    def default_epsilon(self) -> Any:
        return self.get_setting(f"{self.config_prefix}DEFAULT_EPSILON", 0.5)

    @property
    def chatter_window_steps(self) -> Any:
        return self.get_setting(f"{self.config_prefix}CHATTER_WINDOW_STEPS", 50)

    @property
    def chatter_threshold(self) -> Any:
        return self.get_setting(f"{self.config_prefix}CHATTER_THRESHOLD", 10)

    @property
    def rgg_max_attempts(self) -> Any:
        return self.get_setting(f"{self.config_prefix}RGG_MAX_ATTEMPTS", 1000)

    @property
    def log_level(self) -> Any:
        return self.get_setting(f"{self.config_prefix}LOG_LEVEL", "WARNING")


# Create a global config object
consensus_config: ConsensusConfig = ConsensusConfig()
