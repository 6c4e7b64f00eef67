from typing import Optional


class ConsensusError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameterError(ConsensusError, ValueError):
    """An argument lies outside its admissible range."""


# Graph errors


class GraphError(ConsensusError):
    pass


class NonSquareError(GraphError, ValueError):
    pass


class NegativeWeightError(GraphError, ValueError):
    pass


class SelfLoopError(GraphError, ValueError):
    pass


class NotBalancedError(GraphError):
    pass


class NotConnectedError(GraphError):
    pass


class DisconnectedAfterMaxAttemptsError(GraphError):
    pass


# Quantizer errors


class QuantizerError(ConsensusError):
    pass


class NonFiniteInputError(QuantizerError, ValueError):
    pass


class PreconditionViolatedError(QuantizerError):
    pass


class TooManyVerticesError(QuantizerError):
    pass


class NotInJumpSetError(QuantizerError):
    pass


# Simulation errors


class SimulationError(ConsensusError):
    pass


class NonFiniteStateError(SimulationError):
    pass


class StateInJumpSetError(SimulationError):
    pass


class StartNotInClosureError(SimulationError):
    pass


class InvalidInitialConditionError(SimulationError, ValueError):
    pass


class EmptyTraceError(SimulationError):
    pass


class ScenarioConfigError(ConsensusError):
    """A scenario or graph document failed to parse or validate.

    Args:
        message: Human readable description of the problem.
        field: Dotted name of the offending field, when known.
        line: Line number in the source document, for JSON syntax errors.

    """

    def __init__(
        self, message: str, field: Optional[str] = None, line: Optional[int] = None
    ) -> None:
        self.message = message
        self.field = field
        self.line = line
        location = []
        if field:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
