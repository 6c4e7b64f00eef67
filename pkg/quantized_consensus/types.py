from typing import (
    Any,
    Callable,
    Dict,
    FrozenSet,
    List,
    Optional,
    Protocol,
    Sequence,
    Tuple,
    Union,
)

import numpy as np
import numpy.typing as npt

# Custom Types
FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
VectorLike = Union[Sequence[float], FloatArray]
MatrixLike = Union[Sequence[Sequence[float]], FloatArray]
HalfQuantaLike = Union[Sequence[int], IntArray]
AgentSet = FrozenSet[int]
Coordinates = Optional[FloatArray]
JsonDict = Dict[str, Any]
Witnesses = List[JsonDict]
MessageType = Optional[str]
DataType = Optional[Union[Dict, List]]
ErrorType = Optional[Union[Dict, List]]

# Command handlers return a process exit status
CommandFuncType = Callable[..., int]


class LevelTrace(Protocol):
    """Anything that exposes a time series of half-quantum levels."""

    level_step: int

    @property
    def resolution(self) -> float:
        ...

    def level_series(self) -> Tuple[FloatArray, IntArray]:
        ...
