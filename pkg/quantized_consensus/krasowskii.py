"""Time-stepped integration of the quantized and unquantized consensus flows.

The Euler step of ``x' = -L q(x)`` uses the floor convention of the uniform
quantizer on discontinuity surfaces, i.e. one particular selection of the
Krasowskii inclusion. Other selections give other discrete trajectories;
average preservation, the envelope bounds and the equilibrium set do not
depend on the selection.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from quantized_consensus.exceptions import (
    InvalidParameterError,
    NonFiniteStateError,
    StartNotInClosureError,
)
from quantized_consensus.graph import WeightedDigraph, require_balanced_connected
from quantized_consensus.quantizer import (
    QuantizerSpec,
    hysteresis_init,
    hysteresis_jump,
    hysteresis_triggers,
    uniform_quantize_vector,
)
from quantized_consensus.settings.conf import consensus_config
from quantized_consensus.types import FloatArray, IntArray, LevelTrace, VectorLike

logger = logging.getLogger(__name__)

INVARIANCE_ATOL = 1e-9


@dataclass(frozen=True)
class EulerConfig:
    horizon: float
    dt: float = field(default_factory=lambda: consensus_config.euler_dt)
    record_stride: int = 1

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise InvalidParameterError(f"dt must be positive, got {self.dt}")
        if not self.horizon >= self.dt:
            raise InvalidParameterError(
                f"horizon ({self.horizon}) must be at least dt ({self.dt})"
            )
        if self.record_stride < 1:
            raise InvalidParameterError("record_stride must be a positive integer")

    @property
    def steps(self) -> int:
        return math.ceil(self.horizon / self.dt - 1e-9)


@dataclass(frozen=True, eq=False)
class KrasowskiiTrace:
    """Recorded Euler samples.

    ``quantized`` holds half-quantum counts: uniform levels for the quantized
    flow (``level_step == 2``), hysteretic levels for the hysteretic Euler
    run (``level_step == 1``), ``None`` for the unquantized baseline.
    """

    times: FloatArray
    states: FloatArray
    quantized: Optional[IntArray]
    dt: float
    norm_inf: float
    delta: Optional[float] = None
    level_step: int = 2
    jump_count: int = 0

    @property
    def n(self) -> int:
        return int(self.states.shape[1])

    @property
    def resolution(self) -> float:
        return self.dt

    @property
    def initial_state(self) -> FloatArray:
        return self.states[0]

    @property
    def final_state(self) -> FloatArray:
        return self.states[-1]

    def sample_points(self) -> Tuple[FloatArray, FloatArray]:
        return self.times, self.states

    def level_series(self) -> Tuple[FloatArray, IntArray]:
        if self.quantized is None:
            raise InvalidParameterError("trace carries no quantized levels")
        return self.times, self.quantized

    def tail(self, start_time: float) -> "KrasowskiiTrace":
        """Samples recorded at or after ``start_time``."""
        keep = self.times >= start_time
        return replace(
            self,
            times=self.times[keep],
            states=self.states[keep],
            quantized=None if self.quantized is None else self.quantized[keep],
        )


@dataclass(frozen=True)
class ChatterReport:
    flip_counts: IntArray
    flagged: np.ndarray
    window: float

    @property
    def chattering_agents(self) -> List[int]:
        return np.flatnonzero(self.flagged).tolist()


def _as_state(x0: VectorLike, n: int) -> FloatArray:
    x = np.array(x0, dtype=float)
    if x.shape != (n,):
        raise InvalidParameterError(f"x0 must have length {n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteStateError("initial state must be finite")
    return x


def _integrate(
    x0: FloatArray,
    cfg: EulerConfig,
    advance: Callable[[FloatArray], FloatArray],
    levels: Optional[Callable[[FloatArray], IntArray]],
) -> Tuple[FloatArray, FloatArray, Optional[IntArray]]:
    steps = cfg.steps
    x = x0.copy()
    times: List[float] = [0.0]
    states: List[FloatArray] = [x.copy()]
    quantized: List[IntArray] = [levels(x)] if levels else []

    for step in range(1, steps + 1):
        x = advance(x)
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(f"state became non-finite at step {step}")
        if step % cfg.record_stride == 0 or step == steps:
            times.append(step * cfg.dt)
            states.append(x.copy())
            if levels:
                quantized.append(levels(x))

    return (
        np.array(times),
        np.array(states),
        np.array(quantized, dtype=np.int64) if levels else None,
    )


def simulate_euler_quantized(
    x0: VectorLike, g: WeightedDigraph, spec: QuantizerSpec, cfg: EulerConfig
) -> KrasowskiiTrace:
    """Explicit Euler run of ``x' = -L q(x)`` with the uniform quantizer."""
    require_balanced_connected(g)
    x = _as_state(x0, g.n)
    L = g.L
    dt = cfg.dt

    def advance(state: FloatArray) -> FloatArray:
        return state - dt * (L @ spec.level(uniform_quantize_vector(state, spec)))

    logger.debug("euler-krasowskii run: n=%d steps=%d dt=%g", g.n, cfg.steps, dt)
    times, states, quantized = _integrate(
        x, cfg, advance, lambda state: uniform_quantize_vector(state, spec)
    )
    return KrasowskiiTrace(
        times=times,
        states=states,
        quantized=quantized,
        dt=dt,
        norm_inf=g.norm_inf,
        delta=spec.delta,
    )


def simulate_euler_linear(
    x0: VectorLike, g: WeightedDigraph, cfg: EulerConfig
) -> KrasowskiiTrace:
    """Unquantized baseline ``x' = -L x``."""
    require_balanced_connected(g)
    x = _as_state(x0, g.n)
    L = g.L
    dt = cfg.dt

    logger.debug("euler-linear run: n=%d steps=%d dt=%g", g.n, cfg.steps, dt)
    times, states, _ = _integrate(x, cfg, lambda state: state - dt * (L @ state), None)
    return KrasowskiiTrace(
        times=times, states=states, quantized=None, dt=dt, norm_inf=g.norm_inf
    )


class _HystereticStepper:
    """Holds the hysteretic levels while the Euler loop advances ``x``."""

    def __init__(self, x0: FloatArray, g: WeightedDigraph, spec: QuantizerSpec, dt: float):
        self.L = g.L
        self.spec = spec
        self.dt = dt
        self.q = hysteresis_init(x0, spec)
        self.jumps = 0

    def settle(self, x: FloatArray) -> None:
        while True:
            up, down = hysteresis_triggers(x, self.q, self.spec)
            if not (up.any() or down.any()):
                return
            self.q = hysteresis_jump(x, self.q, self.spec)
            self.jumps += 1

    def advance(self, x: FloatArray) -> FloatArray:
        self.settle(x)
        return x - self.dt * (self.L @ self.spec.level(self.q))

    def levels(self, x: FloatArray) -> IntArray:
        self.settle(x)
        return self.q.copy()


def simulate_euler_hysteretic(
    x0: VectorLike, g: WeightedDigraph, spec: QuantizerSpec, cfg: EulerConfig
) -> KrasowskiiTrace:
    """Euler run of the hysteretic system with the same fixed step.

    Before every step the levels are updated while the state lies in the
    jump set; the recorded ``quantized`` column holds those levels.
    """
    require_balanced_connected(g)
    x = _as_state(x0, g.n)
    stepper = _HystereticStepper(x, g, spec, cfg.dt)

    logger.debug("euler-hysteretic run: n=%d steps=%d dt=%g", g.n, cfg.steps, cfg.dt)
    times, states, quantized = _integrate(x, cfg, stepper.advance, stepper.levels)
    return KrasowskiiTrace(
        times=times,
        states=states,
        quantized=quantized,
        dt=cfg.dt,
        norm_inf=g.norm_inf,
        delta=spec.delta,
        level_step=1,
        jump_count=stepper.jumps,
    )


def _max_flips_in_window(flip_times: List[float], window: float) -> int:
    best = 0
    start = 0
    for end, t_end in enumerate(flip_times):
        while t_end - flip_times[start] > window:
            start += 1
        best = max(best, end - start + 1)
    return best


def _alternation_runs(times: FloatArray, levels: IntArray, step: int) -> List[List[float]]:
    """Split an agent's level changes into runs between one pair of adjacent levels."""
    runs: List[List[float]] = []
    current: List[float] = []
    pair: Optional[Tuple[int, int]] = None
    for m in np.flatnonzero(np.diff(levels)) + 1:
        a, b = int(levels[m - 1]), int(levels[m])
        this_pair = (min(a, b), max(a, b))
        if abs(b - a) != step:
            if current:
                runs.append(current)
            current, pair = [], None
            continue
        if this_pair != pair:
            if current:
                runs.append(current)
            current, pair = [], this_pair
        current.append(float(times[m]))
    if current:
        runs.append(current)
    return runs


def detect_chattering(
    trace: LevelTrace,
    window: Optional[float] = None,
    flip_threshold: Optional[int] = None,
) -> ChatterReport:
    """Flag agents whose level alternates between two adjacent levels too often.

    An agent's flip count is the largest number of back-and-forth changes
    between one pair of adjacent levels inside any time window of length
    ``window``; it is flagged when the count reaches ``flip_threshold``.
    Detection only sees recorded samples, so record every step
    (``record_stride=1``) when looking for per-step chattering.

    Args:
        trace: A Euler trace or a hybrid trace (anything exposing
            ``level_series()``, ``level_step`` and ``resolution``).
        window: Window length, defaults to
            ``QUANTIZED_CONSENSUS_CHATTER_WINDOW_STEPS`` steps.
        flip_threshold: Defaults to ``QUANTIZED_CONSENSUS_CHATTER_THRESHOLD``.

    Raises:
        InvalidParameterError: If ``window`` is shorter than the time step.

    """
    times, levels = trace.level_series()
    if len(times) == 0:
        raise InvalidParameterError("cannot scan an empty trace")
    step = trace.resolution or consensus_config.euler_dt
    if window is None:
        window = consensus_config.chatter_window_steps * step
    if flip_threshold is None:
        flip_threshold = consensus_config.chatter_threshold
    if trace.resolution and window < trace.resolution:
        raise InvalidParameterError(
            f"window ({window}) must not be shorter than dt ({trace.resolution})"
        )

    counts = np.zeros(levels.shape[1], dtype=np.int64)
    for agent in range(levels.shape[1]):
        runs = _alternation_runs(times, levels[:, agent], trace.level_step)
        counts[agent] = max((_max_flips_in_window(run, window) for run in runs), default=0)
    return ChatterReport(
        flip_counts=counts, flagged=counts >= flip_threshold, window=window
    )


def _cube_distances(
    x: FloatArray, spec: QuantizerSpec
) -> Tuple[np.ndarray, np.ndarray]:
    """Candidate cells ``k`` and the distance from ``x`` to each cube around ``kΔ``."""
    k_min = math.floor(float(x.min()) / spec.delta) - 1
    k_max = math.ceil(float(x.max()) / spec.delta) + 1
    ks = np.arange(k_min, k_max + 1)
    lo = (ks - 0.5)[:, None] * spec.delta
    hi = (ks + 0.5)[:, None] * spec.delta
    gaps = np.maximum(np.maximum(lo - x[None, :], x[None, :] - hi), 0.0)
    return ks, np.sqrt(np.sum(gaps**2, axis=1))


def in_equilibria_closure(x: VectorLike, spec: QuantizerSpec) -> bool:
    """Whether every component lies in one common closed cell."""
    state = _as_state(x, len(np.atleast_1d(x)))
    _, distances = _cube_distances(state, spec)
    return bool(np.any(distances == 0.0))


def dist_to_equilibria(x: VectorLike, spec: QuantizerSpec) -> float:
    state = _as_state(x, len(np.atleast_1d(x)))
    _, distances = _cube_distances(state, spec)
    return float(distances.min())


def check_strong_invariance(
    trace: KrasowskiiTrace, spec: QuantizerSpec, tolerance: Optional[float] = None
) -> bool:
    """Whether a trace that starts in the closure of D stays there.

    One Euler step may leave the closure by at most ``‖L‖∞ Δ dt``; that
    amount (or ``1e-9`` if larger) is the default tolerance. On dense graphs
    it can exceed ``Δ/10``, so callers holding a tighter bound pass it.

    Raises:
        StartNotInClosureError: If the first sample is outside the closure.
        InvalidParameterError: If ``tolerance`` is negative.

    """
    if not in_equilibria_closure(trace.initial_state, spec):
        raise StartNotInClosureError("trace does not start in the closure of D")
    if tolerance is None:
        tolerance = max(INVARIANCE_ATOL, trace.norm_inf * spec.delta * trace.dt)
    elif not tolerance >= 0:
        raise InvalidParameterError(f"tolerance must be nonnegative, got {tolerance}")
    return all(dist_to_equilibria(state, spec) <= tolerance for state in trace.states)

