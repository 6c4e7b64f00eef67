from typing import Any, List

from django.core.checks import Error, register

from quantized_consensus.settings.conf import consensus_config
from quantized_consensus.validators.config_validators import (
    validate_directory_setting,
    validate_epsilon_setting,
    validate_log_level_setting,
    validate_positive_integer_setting,
    validate_positive_number_setting,
)


@register()
def check_quantized_consensus_settings(
    app_configs: Any, **kwargs: Any
) -> List[Error]:
    """Check and validate the simulator settings in the Django configuration.

    This function registers as a system check in Django to validate custom settings.

    Args:
        app_configs: Unused argument, provided by Django system check framework.
        kwargs: Additional keyword arguments passed by Django system check framework.

    Returns:
        List[Error]: A list of validation errors for the custom settings, or an empty list
        if all settings are valid.

    """
    errors: List[Error] = []

    errors.extend(
        validate_directory_setting(
            consensus_config.output_dir, "QUANTIZED_CONSENSUS_OUTPUT_DIR"
        )
    )

    # Numeric defaults of the integrators and checks
    errors.extend(
        validate_positive_number_setting(
            consensus_config.euler_dt, "QUANTIZED_CONSENSUS_EULER_DT"
        )
    )
    errors.extend(
        validate_epsilon_setting(
            consensus_config.default_epsilon, "QUANTIZED_CONSENSUS_DEFAULT_EPSILON"
        )
    )

    for value, name in (
        (consensus_config.max_jumps, "QUANTIZED_CONSENSUS_MAX_JUMPS"),
        (
            consensus_config.chatter_window_steps,
            "QUANTIZED_CONSENSUS_CHATTER_WINDOW_STEPS",
        ),
        (consensus_config.chatter_threshold, "QUANTIZED_CONSENSUS_CHATTER_THRESHOLD"),
        (consensus_config.rgg_max_attempts, "QUANTIZED_CONSENSUS_RGG_MAX_ATTEMPTS"),
    ):
        errors.extend(validate_positive_integer_setting(value, name))

    errors.extend(
        validate_log_level_setting(
            consensus_config.log_level, "QUANTIZED_CONSENSUS_LOG_LEVEL"
        )
    )

    return errors
