import logging
import math
from typing import Any, List

from django.core.checks import Error


def _is_number(value: Any) -> bool:
    return (
        isinstance(value, (int, float))
        and not isinstance(value, bool)
        and math.isfinite(value)
    )


def validate_positive_number_setting(
    setting_value: Any, setting_name: str
) -> List[Error]:
    """Helper function to validate strictly positive real settings.

    Args:
        setting_value: The value of the setting to validate.
        setting_name: The name of the setting being validated.

    Returns:
        List[Error]: A list of errors if the validation fails, or an empty list if valid.

    """
    errors: List[Error] = []
    if not _is_number(setting_value) or setting_value <= 0:
        errors.append(
            Error(
                f"{setting_name} should be a positive finite number.",
                hint=f"Set {setting_name} to a number greater than 0, e.g. 0.005.",
                id=f"quantized_consensus.E001.{setting_name}",
            )
        )
    return errors


def validate_positive_integer_setting(
    setting_value: Any, setting_name: str
) -> List[Error]:
    """Helper function to validate strictly positive integer settings.

    Args:
        setting_value: The value of the setting to validate.
        setting_name: The name of the setting being validated.

    Returns:
        List[Error]: A list of errors if the validation fails, or an empty list if valid.

    """
    errors: List[Error] = []
    if (
        not isinstance(setting_value, int)
        or isinstance(setting_value, bool)
        or setting_value < 1
    ):
        errors.append(
            Error(
                f"{setting_name} should be a positive integer.",
                hint=f"Set {setting_name} to an integer greater than or equal to 1.",
                id=f"quantized_consensus.E002.{setting_name}",
            )
        )
    return errors


def validate_epsilon_setting(setting_value: Any, setting_name: str) -> List[Error]:
    """Validates that the setting is an epsilon usable in the strip bounds.

    Args:
        setting_value (Any): The value of the setting to validate.
        setting_name (str): The name of the setting being validated.

    Returns:
        List[Error]: A list of errors if the validation fails, or an empty list if valid.

    Validation Criteria:
    - The setting must be a real number.
    - It must lie in the open interval (0, 1).

    """
    errors: List[Error] = []
    if not _is_number(setting_value) or not 0 < setting_value < 1:
        errors.append(
            Error(
                f"{setting_name} should be a number strictly between 0 and 1.",
                hint=f"Set {setting_name} to a value such as 0.5.",
                id=f"quantized_consensus.E003.{setting_name}",
            )
        )
    return errors


def validate_directory_setting(setting_value: Any, setting_name: str) -> List[Error]:
    """Helper function to validate output directory settings.

    The directory does not need to exist yet; the CLI creates it on first
    write.

    Args:
        setting_value: The value of the setting to validate.
        setting_name: The name of the setting being validated.

    Returns:
        List[Error]: A list of errors if the validation fails, or an empty list if valid.

    """
    errors: List[Error] = []
    if not isinstance(setting_value, str) or not setting_value.strip():
        errors.append(
            Error(
                f"{setting_name} should be a non-empty path string.",
                hint=f"Set {setting_name} to a directory path, e.g. 'results/'.",
                id=f"quantized_consensus.E004.{setting_name}",
            )
        )
    return errors


def validate_log_level_setting(setting_value: Any, setting_name: str) -> List[Error]:
    """Helper function to validate logging level names.

    Args:
        setting_value: The value of the setting to validate.
        setting_name: The name of the setting being validated.

    Returns:
        List[Error]: A list of errors if the validation fails, or an empty list if valid.

    """
    errors: List[Error] = []
    if not isinstance(setting_value, str) or not isinstance(
        logging.getLevelName(setting_value.upper()), int
    ):
        errors.append(
            Error(
                f"{setting_name} should be a logging level name.",
                hint=f"Set {setting_name} to one of DEBUG, INFO, WARNING, ERROR.",
                id=f"quantized_consensus.E005.{setting_name}",
            )
        )
    return errors
