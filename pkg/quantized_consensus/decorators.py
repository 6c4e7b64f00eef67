import logging
import sys
from functools import wraps
from typing import Any, Callable

from quantized_consensus.exceptions import ConsensusError, ScenarioConfigError
from quantized_consensus.exporters import dumps
from quantized_consensus.reports import error_report
from quantized_consensus.types import CommandFuncType

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG_ERROR = 2
EXIT_SOLVER_ERROR = 3


def _emit_error(message: str, errors: Any, error_code: str) -> None:
    sys.stderr.write(dumps(error_report(message, errors, error_code)) + "\n")


# Base decorator for command exit statuses
def exit_status_decorator(func: Callable[..., int]) -> CommandFuncType:
    """A decorator that wraps a CLI command and turns failures into exit
    statuses.

    Configuration problems (:class:`ScenarioConfigError`) exit with status
    2, any other :class:`ConsensusError` or an I/O failure with status 3.
    In both cases a structured error report is written to stderr.

    Args:
        func: A command function returning its exit status.

    Returns:
        A wrapped function that never raises package errors.

    """

    @wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> int:
        try:
            return func(*args, **kwargs)
        except ScenarioConfigError as exc:
            logger.debug("configuration error", exc_info=True)
            _emit_error(
                exc.message,
                {"field": exc.field, "line": exc.line},
                type(exc).__name__,
            )
            return EXIT_CONFIG_ERROR
        except (ConsensusError, OSError) as exc:
            logger.debug("command failed", exc_info=True)
            _emit_error(str(exc), None, type(exc).__name__)
            return EXIT_SOLVER_ERROR

    return wrapper
