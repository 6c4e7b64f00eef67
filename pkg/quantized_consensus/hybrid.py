"""Exact event-driven simulation of the hysteretic quantized consensus system.

Between jumps ``q`` is constant, so ``x`` moves along a straight line with
velocity ``-L q`` and the next threshold crossing solves a scalar linear
equation per agent. Jumps update every triggered component at once and leave
``x`` unchanged.

Sets, for hysteretic levels ``q`` (half-quantum counts):

* flow set ``C``: ``q_i - Δ/2 < x_i < q_i + Δ/2`` for every ``i``;
* jump set ``D``: everything else;
* initial set ``X0``: ``q_i - Δ/2 <= x_i < q_i + Δ/2`` for every ``i``.
"""

import bisect
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from quantized_consensus.exceptions import (
    EmptyTraceError,
    InvalidInitialConditionError,
    InvalidParameterError,
    NonFiniteStateError,
    StateInJumpSetError,
)
from quantized_consensus.graph import WeightedDigraph, require_balanced_connected
from quantized_consensus.quantizer import (
    QuantizerSpec,
    hysteresis_jump,
    hysteresis_triggers,
    uniform_quantize_vector,
)
from quantized_consensus.settings.conf import consensus_config
from quantized_consensus.types import (
    AgentSet,
    FloatArray,
    HalfQuantaLike,
    IntArray,
    VectorLike,
    Witnesses,
)

logger = logging.getLogger(__name__)

# Crossing times within this relative distance of the earliest are simultaneous.
EVENT_GROUP_RTOL = 1e-12
CYCLE_STATE_ATOL = 1e-9
BOUND_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class HybridState:
    x: FloatArray
    q: IntArray
    t: float = 0.0
    j: int = 0


@dataclass(frozen=True, eq=False)
class FlowInterval:
    """``x(t) = x_start + velocity * (t - t_start)`` on ``[t_start, t_end] x {j}``."""

    t_start: float
    t_end: float
    j: int
    x_start: FloatArray
    q: IntArray
    velocity: FloatArray
    open_ended: bool = False

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start

    @property
    def x_end(self) -> FloatArray:
        return self.x_at(self.t_end)

    def x_at(self, t: float) -> FloatArray:
        if t == self.t_start:
            return self.x_start.copy()
        return self.x_start + self.velocity * (t - self.t_start)


@dataclass(frozen=True, eq=False)
class JumpEvent:
    t: float
    j: int
    x: FloatArray
    q_before: IntArray
    q_after: IntArray
    triggered: AgentSet


@dataclass(frozen=True, eq=False)
class HybridTrace:
    """Hybrid time domain of one run: flow intervals and the jumps between them.

    ``flows[m]`` carries jump counter ``m``; ``jumps[m]`` separates
    ``flows[m]`` from ``flows[m + 1]``. ``truncated`` is set when the run
    stopped at ``max_jumps`` before reaching the horizon.
    """

    delta: float
    horizon: float
    q_initial: IntArray
    flows: List[FlowInterval]
    jumps: List[JumpEvent]
    truncated: bool = False

    level_step: int = field(default=1, init=False)

    @property
    def resolution(self) -> float:
        return 0.0

    @property
    def n(self) -> int:
        return int(self.q_initial.shape[0])

    @property
    def jump_count(self) -> int:
        return len(self.jumps)

    @property
    def initial_state(self) -> FloatArray:
        return self.flows[0].x_start

    @property
    def final_state(self) -> FloatArray:
        return self.flows[-1].x_end

    def level_series(self) -> Tuple[FloatArray, IntArray]:
        times = [0.0] + [jump.t for jump in self.jumps]
        levels = [self.q_initial] + [jump.q_after for jump in self.jumps]
        return np.array(times), np.array(levels, dtype=np.int64)

    def sample_points(self) -> Tuple[FloatArray, FloatArray]:
        """Start and end point of every flow interval."""
        times: List[float] = []
        states: List[FloatArray] = []
        for flow in self.flows:
            times.extend((flow.t_start, flow.t_end))
            states.extend((flow.x_start, flow.x_end))
        return np.array(times), np.array(states)

    def state_at(self, t: float) -> Tuple[FloatArray, IntArray, int]:
        """``(x, q, j)`` at time ``t``; at a jump instant the post-jump value."""
        if not self.flows or not 0.0 <= t <= self.flows[-1].t_end:
            raise InvalidParameterError(f"time {t} outside the simulated range")
        starts = [flow.t_start for flow in self.flows]
        flow = self.flows[bisect.bisect_right(starts, t) - 1]
        return flow.x_at(t), flow.q.copy(), flow.j

    def sample(self, stride: float) -> List[Tuple[float, int, FloatArray, IntArray]]:
        """Evaluate the trace on the grid ``0, stride, 2 stride, ...``."""
        if not stride > 0:
            raise InvalidParameterError(f"stride must be positive, got {stride}")
        end = self.flows[-1].t_end
        rows = []
        for step in range(int(math.floor(end / stride + 1e-9)) + 1):
            t = min(step * stride, end)
            x, q, j = self.state_at(t)
            rows.append((t, j, x, q))
        return rows


@dataclass(frozen=True)
class CycleReport:
    """Recurrence found in the jump states of a trace.

    ``found`` with ``confirmed=False`` means the trace ended before a full
    further period could be compared.
    """

    found: bool
    entry_time: Optional[float] = None
    period: Optional[float] = None
    states: List[JumpEvent] = field(default_factory=list)
    confirmed: bool = False
    amplitude: Optional[IntArray] = None


@dataclass(frozen=True)
class CheckResult:
    passed: bool
    witnesses: Witnesses = field(default_factory=list)


@dataclass(frozen=True)
class DwellReport:
    dwell_bound: float
    rate_bound: float
    checks: Dict[str, CheckResult]

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks.values())


def in_flow_set(x: VectorLike, q: HalfQuantaLike, spec: QuantizerSpec) -> bool:
    up, down = hysteresis_triggers(x, q, spec)
    return not (up.any() or down.any())


def in_jump_set(x: VectorLike, q: HalfQuantaLike, spec: QuantizerSpec) -> bool:
    return not in_flow_set(x, q, spec)


def in_initial_set(x: VectorLike, q: HalfQuantaLike, spec: QuantizerSpec) -> bool:
    vector = np.asarray(x, dtype=float)
    levels = np.asarray(q, dtype=np.int64)
    return bool(
        np.all(vector >= spec.level(levels - 1)) and np.all(vector < spec.level(levels + 1))
    )


def in_hybrid_equilibria(state: HybridState, spec: QuantizerSpec) -> bool:
    """Whether all levels coincide and every agent is strictly inside its band."""
    q = np.asarray(state.q, dtype=np.int64)
    return bool(np.all(q == q[0])) and in_flow_set(state.x, q, spec)


def _start_state(
    x0: VectorLike, spec: QuantizerSpec, q0: Optional[HalfQuantaLike]
) -> HybridState:
    x = np.array(x0, dtype=float)
    if x.ndim != 1 or not np.all(np.isfinite(x)):
        raise NonFiniteStateError("initial state must be a finite vector")
    if q0 is None:
        return HybridState(x=x, q=uniform_quantize_vector(x, spec))

    q = np.array(q0, dtype=np.int64)
    if q.shape != x.shape:
        raise InvalidInitialConditionError(
            f"q0 must have length {x.shape[0]}, got shape {q.shape}"
        )
    outside = (x < spec.level(q - 1)) | (x > spec.level(q + 1))
    if outside.any():
        raise InvalidInitialConditionError(
            f"agents {np.flatnonzero(outside).tolist()} are farther than Δ/2"
            " from their level"
        )
    return HybridState(x=x, q=q)


def _jump(state: HybridState, spec: QuantizerSpec) -> Tuple[HybridState, JumpEvent]:
    up, down = hysteresis_triggers(state.x, state.q, spec)
    q_after = hysteresis_jump(state.x, state.q, spec)
    event = JumpEvent(
        t=state.t,
        j=state.j,
        x=state.x.copy(),
        q_before=state.q.copy(),
        q_after=q_after,
        triggered=frozenset(np.flatnonzero(up | down).tolist()),
    )
    return HybridState(x=state.x, q=q_after, t=state.t, j=state.j + 1), event


def hybrid_init(
    x0: VectorLike, spec: QuantizerSpec, q0: Optional[HalfQuantaLike] = None
) -> HybridState:
    """Initial hybrid state ``(x0, q0)`` at ``(0, 0)``.

    ``q0`` defaults to the uniform quantization of ``x0``. An explicit ``q0``
    may place components on either threshold; a start in the jump set is
    jumped once, giving ``j = 1``.

    Raises:
        InvalidInitialConditionError: If ``q0`` is more than ``Δ/2`` away
            from ``x0`` in some component.

    """
    state = _start_state(x0, spec, q0)
    if in_jump_set(state.x, state.q, spec):
        state, _ = _jump(state, spec)
    return state


def _velocity(g: WeightedDigraph, q: IntArray, spec: QuantizerSpec) -> FloatArray:
    return -(g.L @ spec.level(q))


def _crossings(
    x: FloatArray, q: IntArray, v: FloatArray, spec: QuantizerSpec
) -> Tuple[float, AgentSet]:
    times = np.full(x.shape, math.inf)
    rising = v > 0
    falling = v < 0
    times[rising] = (spec.level(q[rising] + 1) - x[rising]) / v[rising]
    times[falling] = (spec.level(q[falling] - 1) - x[falling]) / v[falling]
    earliest = float(times.min())
    if math.isinf(earliest):
        return math.inf, frozenset()
    group = times <= earliest + EVENT_GROUP_RTOL * (1.0 + earliest)
    return earliest, frozenset(np.flatnonzero(group).tolist())


def next_event(
    state: HybridState, g: WeightedDigraph, spec: QuantizerSpec
) -> Tuple[float, AgentSet]:
    """Time to the next threshold crossing and the agents that reach it.

    Returns:
        Tuple[float, AgentSet]: ``(dt, triggered)``, with ``dt = inf`` and an
        empty set when no component moves toward a threshold.

    Raises:
        StateInJumpSetError: If ``state`` is not in the flow set.

    """
    if in_jump_set(state.x, state.q, spec):
        raise StateInJumpSetError("next_event needs a state in the flow set")
    q = np.asarray(state.q, dtype=np.int64)
    return _crossings(np.asarray(state.x, dtype=float), q, _velocity(g, q, spec), spec)


def simulate_hybrid(
    x0: VectorLike,
    g: WeightedDigraph,
    spec: QuantizerSpec,
    horizon: float,
    max_jumps: Optional[int] = None,
    q0: Optional[HalfQuantaLike] = None,
) -> HybridTrace:
    """Alternate exact linear flow and hysteresis jumps up to ``horizon``.

    Args:
        x0: Initial continuous state.
        g: Weight-balanced, weakly connected graph.
        spec: Quantizer step.
        horizon: Final flow time.
        max_jumps: Jump cap, defaults to ``QUANTIZED_CONSENSUS_MAX_JUMPS``.
            Hitting it stops the run with ``truncated=True``.
        q0: Optional initial levels in half-quanta instead of the uniform
            quantization of ``x0``.

    Returns:
        HybridTrace: The flow intervals and jumps. Identical inputs give
        bit-identical traces.

    """
    require_balanced_connected(g)
    if not horizon > 0:
        raise InvalidParameterError(f"horizon must be positive, got {horizon}")
    cap = consensus_config.max_jumps if max_jumps is None else max_jumps
    if cap < 0:
        raise InvalidParameterError(f"max_jumps must be nonnegative, got {cap}")

    state = _start_state(x0, spec, q0)
    if state.x.shape != (g.n,):
        raise InvalidParameterError(f"x0 must have length {g.n}, got {state.x.shape}")
    q_initial = state.q.copy()
    flows: List[FlowInterval] = []
    jumps: List[JumpEvent] = []
    truncated = False
    logger.debug("hybrid-exact run: n=%d horizon=%g delta=%g", g.n, horizon, spec.delta)

    if in_jump_set(state.x, state.q, spec):
        v = _velocity(g, state.q, spec)
        flows.append(FlowInterval(0.0, 0.0, 0, state.x.copy(), state.q.copy(), v))
        state, event = _jump(state, spec)
        jumps.append(event)

    while True:
        v = _velocity(g, state.q, spec)
        dt, triggered = _crossings(state.x, state.q, v, spec)
        t_next = state.t + dt
        if t_next >= horizon:
            flows.append(
                FlowInterval(
                    state.t,
                    horizon,
                    state.j,
                    state.x.copy(),
                    state.q.copy(),
                    v,
                    open_ended=math.isinf(dt),
                )
            )
            break

        flows.append(
            FlowInterval(state.t, t_next, state.j, state.x.copy(), state.q.copy(), v)
        )
        x = state.x + v * dt
        for i in triggered:
            x[i] = spec.level(int(state.q[i]) + (1 if v[i] > 0 else -1))
        if not np.all(np.isfinite(x)):
            raise NonFiniteStateError(f"state became non-finite at t={t_next}")
        state = HybridState(x=x, q=state.q, t=t_next, j=state.j)

        if state.j >= cap:
            truncated = True
            logger.warning(
                "hybrid run stopped at t=%g after %d jumps (max_jumps reached)",
                t_next,
                state.j,
            )
            break
        state, event = _jump(state, spec)
        jumps.append(event)

    logger.debug("hybrid-exact run finished: %d jumps", len(jumps))
    return HybridTrace(
        delta=spec.delta,
        horizon=horizon,
        q_initial=q_initial,
        flows=flows,
        jumps=jumps,
        truncated=truncated,
    )


def _max_level(q0: HalfQuantaLike) -> int:
    levels = np.asarray(q0, dtype=np.int64)
    return int(np.abs(levels).max()) if levels.size else 0


def dwell_time_bound(g: WeightedDigraph, q0: HalfQuantaLike, spec: QuantizerSpec) -> float:
    """Lower bound on the time between two jumps of one agent."""
    if g.norm_inf == 0:
        raise InvalidParameterError("graph has no edges")
    q_norm = spec.level(_max_level(q0))
    return spec.half / (g.norm_inf * (q_norm + spec.half))


def bits_per_transmission(q0: HalfQuantaLike) -> int:
    """``ceil(log2(8 ‖q0‖∞/Δ + 5))``, evaluated exactly on half-quanta."""
    return (4 * _max_level(q0) + 4).bit_length()


def data_rate_bound(g: WeightedDigraph, q0: HalfQuantaLike, spec: QuantizerSpec) -> float:
    """Bits per unit time an agent needs to broadcast its level changes."""
    if g.norm_inf == 0:
        raise InvalidParameterError("graph has no edges")
    return float(bits_per_transmission(q0) * (_max_level(q0) + 1) * g.norm_inf)


def _same_state(a: JumpEvent, b: JumpEvent) -> bool:
    return bool(
        np.array_equal(a.q_after, b.q_after)
        and np.allclose(a.x, b.x, rtol=0.0, atol=CYCLE_STATE_ATOL)
    )


def _repeats_period(jumps: List[JumpEvent], i: int, m: int) -> Optional[bool]:
    """Whether ``jumps[i:m + 1]`` recurs one period later, jump by jump.

    ``None`` when the trace ends before that period is complete.
    """
    shift = m - i
    if m + shift >= len(jumps):
        return None
    period = jumps[m].t - jumps[i].t
    for k in range(i, m + 1):
        later = jumps[k + shift]
        if not _same_state(jumps[k], later) or not math.isclose(
            later.t - jumps[k].t, period, rel_tol=BOUND_RTOL, abs_tol=BOUND_RTOL
        ):
            return False
    return True


def _cycle_report(
    jumps: List[JumpEvent], i: int, m: int, confirmed: bool
) -> CycleReport:
    cycle = jumps[i:m]
    levels = np.array([jump.q_after for jump in cycle])
    return CycleReport(
        found=True,
        entry_time=jumps[i].t,
        period=jumps[m].t - jumps[i].t,
        states=cycle,
        confirmed=confirmed,
        amplitude=levels.max(axis=0) - levels.min(axis=0),
    )


def detect_limit_cycle(trace: HybridTrace) -> CycleReport:
    """First recurrence of a post-jump state that the trace does not contradict.

    Jump states are compared exactly in ``q`` and within ``1e-9`` in ``x``.
    A recurrence is ``confirmed`` when every jump of the following period
    repeats as well. A recurrence whose following period runs past the end
    of the trace is reported unconfirmed, and only when no confirmed one
    exists; recurrences that the trace refutes are skipped.
    """
    jumps = trace.jumps
    if len(jumps) < 2:
        return CycleReport(found=False)

    pending: Optional[CycleReport] = None
    seen: Dict[bytes, List[int]] = {}
    for m, event in enumerate(jumps):
        key = event.q_after.tobytes()
        # Nearest earlier match first, so the shortest period wins.
        for i in reversed(seen.get(key, [])):
            if event.t - jumps[i].t <= 0 or not _same_state(jumps[i], event):
                continue
            repeats = _repeats_period(jumps, i, m)
            if repeats:
                return _cycle_report(jumps, i, m, confirmed=True)
            if repeats is None and pending is None:
                pending = _cycle_report(jumps, i, m, confirmed=False)
        seen.setdefault(key, []).append(m)
    if pending is not None:
        logger.debug(
            "recurrence at t=%g could not be confirmed before the horizon",
            pending.entry_time,
        )
        return pending
    return CycleReport(found=False)


def _agent_jump_times(trace: HybridTrace) -> Dict[int, List[float]]:
    times: Dict[int, List[float]] = {agent: [] for agent in range(trace.n)}
    for event in trace.jumps:
        for agent in event.triggered:
            times[agent].append(event.t)
    return times


def verify_dwell_and_bounds(
    trace: HybridTrace, g: WeightedDigraph, spec: QuantizerSpec
) -> DwellReport:
    """Check dwell time, the level/state envelope and the bit rate of a trace.

    The checks are ``dwell`` (per-agent gaps between jumps), ``envelope``
    (levels within ``Δ/2`` and states within ``Δ`` of the initial level
    range, at every interval endpoint) and ``data_rate`` (observed
    per-agent bits per unit time against :func:`data_rate_bound`).

    Raises:
        EmptyTraceError: If the trace holds no flow interval.

    """
    if not trace.flows:
        raise EmptyTraceError("trace has no flow intervals")
    q0 = trace.q_initial
    dwell = dwell_time_bound(g, q0, spec)
    rate = data_rate_bound(g, q0, spec)
    bits = bits_per_transmission(q0)
    jump_times = _agent_jump_times(trace)

    gap_witnesses: Witnesses = []
    rate_witnesses: Witnesses = []
    for agent, times in jump_times.items():
        for t_prev, t in zip(times, times[1:]):
            if t - t_prev < dwell * (1 - BOUND_RTOL):
                gap_witnesses.append(
                    {"agent": agent, "t_prev": t_prev, "t": t, "gap": t - t_prev}
                )
        if len(times) >= 2 and times[-1] > times[0]:
            observed = (len(times) - 1) * bits / (times[-1] - times[0])
            if observed > rate * (1 + BOUND_RTOL):
                rate_witnesses.append({"agent": agent, "observed_rate": observed})

    q_lo, q_hi = int(q0.min()) - 1, int(q0.max()) + 1
    x_lo = spec.level(int(q0.min())) - spec.delta - BOUND_RTOL * spec.delta
    x_hi = spec.level(int(q0.max())) + spec.delta + BOUND_RTOL * spec.delta
    envelope_witnesses: Witnesses = []
    for flow in trace.flows:
        if flow.q.min() < q_lo or flow.q.max() > q_hi:
            envelope_witnesses.append(
                {"t": flow.t_start, "j": flow.j, "q": flow.q.tolist()}
            )
        for t, x in ((flow.t_start, flow.x_start), (flow.t_end, flow.x_end)):
            if x.min() < x_lo or x.max() > x_hi:
                envelope_witnesses.append({"t": t, "j": flow.j, "x": x.tolist()})

    return DwellReport(
        dwell_bound=dwell,
        rate_bound=rate,
        checks={
            "dwell": CheckResult(not gap_witnesses, gap_witnesses),
            "envelope": CheckResult(not envelope_witnesses, envelope_witnesses),
            "data_rate": CheckResult(not rate_witnesses, rate_witnesses),
        },
    )
