import math
import sys
from typing import List, Sequence
from unittest.mock import MagicMock, patch

import numpy as np
import pytest

from quantized_consensus.exceptions import (
    EmptyTraceError,
    InvalidInitialConditionError,
    InvalidParameterError,
    NotBalancedError,
    StateInJumpSetError,
)
from quantized_consensus.graph import WeightedDigraph
from quantized_consensus.hybrid import (
    HybridState,
    HybridTrace,
    JumpEvent,
    bits_per_transmission,
    data_rate_bound,
    detect_limit_cycle,
    dwell_time_bound,
    hybrid_init,
    in_flow_set,
    in_hybrid_equilibria,
    in_initial_set,
    in_jump_set,
    next_event,
    simulate_hybrid,
    verify_dwell_and_bounds,
)
from quantized_consensus.quantizer import QuantizerSpec, uniform_quantize_vector
from quantized_consensus.tests.constants import (
    FUZZ_SEED,
    PYTHON_VERSION,
    PYTHON_VERSION_REASON,
)

pytestmark = [
    pytest.mark.hybrid,
    pytest.mark.skipif(sys.version_info < PYTHON_VERSION, reason=PYTHON_VERSION_REASON),
]


def _jump_trace(levels: Sequence[Sequence[int]]) -> HybridTrace:
    """Jumps one time unit apart whose state is fully given by ``levels``."""
    jumps = []
    for index, q in enumerate(levels):
        q_after = np.array(q, dtype=np.int64)
        jumps.append(
            JumpEvent(
                t=float(index),
                j=index,
                x=q_after.astype(float) / 2,
                q_before=q_after,
                q_after=q_after,
                triggered=frozenset({0}),
            )
        )
    return HybridTrace(
        delta=1.0,
        horizon=float(len(levels)),
        q_initial=np.array(levels[0], dtype=np.int64),
        flows=[],
        jumps=jumps,
    )


class TestHybridSets:
    """
    Flow, jump and initial sets as predicates on (x, q).
    """

    def test_flow_and_jump_sets(self, unit_spec: QuantizerSpec) -> None:
        """
        Reaching either threshold leaves the flow set.

        :param unit_spec: Quantizer with Δ = 1.
        """
        assert in_flow_set([0.2, 0.9], [0, 2], unit_spec)
        assert in_jump_set([0.5, 0.9], [0, 2], unit_spec)
        assert in_jump_set([0.2, 0.5], [0, 2], unit_spec)

    def test_initial_set_allows_lower_threshold_only(self, unit_spec: QuantizerSpec) -> None:
        """
        The initial set is closed below and open above.

        :param unit_spec: Quantizer with Δ = 1.
        """
        assert in_initial_set([-0.5, 1.0], [0, 2], unit_spec)
        assert not in_initial_set([0.5, 1.0], [0, 2], unit_spec)

    def test_equilibria(self, unit_spec: QuantizerSpec) -> None:
        """
        Equilibria share one level with every agent strictly inside its band.

        :param unit_spec: Quantizer with Δ = 1.
        """
        assert in_hybrid_equilibria(HybridState(np.array([0.1, -0.4]), np.array([0, 0])), unit_spec)
        assert in_hybrid_equilibria(HybridState(np.array([0.6, 0.9]), np.array([1, 1])), unit_spec)
        assert not in_hybrid_equilibria(HybridState(np.array([0.0, 0.5]), np.array([0, 1])), unit_spec)
        assert not in_hybrid_equilibria(HybridState(np.array([0.5, 0.1]), np.array([0, 0])), unit_spec)


class TestHybridInit:
    def test_default_levels(self, unit_spec: QuantizerSpec) -> None:
        """
        Levels default to the uniform quantization of the state.

        :param unit_spec: Quantizer with Δ = 1.
        """
        state = hybrid_init([0.2, 1.3], unit_spec)
        assert state.q.tolist() == [0, 2]
        assert (state.t, state.j) == (0.0, 0)

    def test_explicit_levels(self, unit_spec: QuantizerSpec) -> None:
        """
        Explicit levels inside the bands are kept as given.

        :param unit_spec: Quantizer with Δ = 1.
        """
        state = hybrid_init([-0.25, 0.75], unit_spec, q0=[0, 2])
        assert state.q.tolist() == [0, 2]
        assert state.j == 0

    def test_start_on_threshold_jumps_once(self, unit_spec: QuantizerSpec) -> None:
        """
        ``x0_i = q_i + Δ/2`` is in the jump set: one jump, ``j = 1``.

        :param unit_spec: Quantizer with Δ = 1.
        """
        state = hybrid_init([0.5, 0.0], unit_spec, q0=[0, 0])
        assert state.j == 1
        assert state.q.tolist() == [1, 0]

    def test_rounded_tie_jumps_down(self, unit_spec: QuantizerSpec) -> None:
        """
        A tie rounded up by the uniform quantizer sits on the lower threshold.

        :param unit_spec: Quantizer with Δ = 1.
        """
        state = hybrid_init([0.5, 0.0], unit_spec)
        assert state.j == 1
        assert state.q.tolist() == [1, 0]

    def test_levels_too_far(self, unit_spec: QuantizerSpec) -> None:
        """
        Levels farther than Δ/2 from the state are refused.

        :param unit_spec: Quantizer with Δ = 1.
        """
        with pytest.raises(InvalidInitialConditionError):
            hybrid_init([0.0, 2.0], unit_spec, q0=[0, 0])

    def test_equilibrium_start(self, unit_spec: QuantizerSpec) -> None:
        """
        Equal states start in the equilibrium set.

        :param unit_spec: Quantizer with Δ = 1.
        """
        state = hybrid_init(np.full(4, 3.2), unit_spec)
        assert state.q.tolist() == [6, 6, 6, 6]
        assert in_hybrid_equilibria(state, unit_spec)


class TestNextEvent:
    """
    Exact crossing times of the constant-velocity flow.
    """

    def test_single_crossing(self, pair_graph: WeightedDigraph, unit_spec: QuantizerSpec) -> None:
        """
        One agent reaches its lower threshold first.

        :param pair_graph: The symmetric two-agent graph.
        :param unit_spec: Quantizer with Δ = 1.
        """
        state = HybridState(np.array([-0.25, 0.75]), np.array([0, 2]))
        assert next_event(state, pair_graph, unit_spec) == (0.25, frozenset({1}))

    def test_simultaneous_crossing(
        self, pair_graph: WeightedDigraph, unit_spec: QuantizerSpec
    ) -> None:
        """
        Crossings at the same instant are grouped into one event.

        :param pair_graph: The symmetric two-agent graph.
        :param unit_spec: Quantizer with Δ = 1.
        """
        state = HybridState(np.array([0.0, 0.5]), np.array([0, 1]))
        assert next_event(state, pair_graph, unit_spec) == (1.0, frozenset({0, 1}))

    def test_equilibrium_never_jumps(
        self, ring10: WeightedDigraph, ring_spec: QuantizerSpec
    ) -> None:
        """
        Zero velocity gives an infinite time to the next event.

        :param ring10: The directed ring of ten agents.
        :param ring_spec: Quantizer with Δ = 0.05.
        """
        state = HybridState(np.full(10, 0.31), np.full(10, 12))
        dt, triggered = next_event(state, ring10, ring_spec)
        assert math.isinf(dt)
        assert triggered == frozenset()

    def test_rejects_jump_set(self, pair_graph: WeightedDigraph, unit_spec: QuantizerSpec) -> None:
        """
        Events are only computed from the flow set.

        :param pair_graph: The symmetric two-agent graph.
        :param unit_spec: Quantizer with Δ = 1.
        """
        state = HybridState(np.array([0.5, 0.0]), np.array([0, 0]))
        with pytest.raises(StateInJumpSetError):
            next_event(state, pair_graph, unit_spec)


class TestSimulateHybrid:
    def test_limit_cycle_jump_times(self, limit_cycle_trace: HybridTrace) -> None:
        """
        The pair jumps once per time unit after the first quarter.

        :param limit_cycle_trace: The two-agent periodic run.
        """
        times = [jump.t for jump in limit_cycle_trace.jumps]
        assert times == [0.25, 1.25, 2.25]
        assert [sorted(jump.triggered) for jump in limit_cycle_trace.jumps] == [[1], [0, 1], [0, 1]]

    def test_limit_cycle_state_recurs(self, limit_cycle_trace: HybridTrace) -> None:
        """
        The first post-jump state comes back two jumps later.

        :param limit_cycle_trace: The two-agent periodic run.
        """
        first, _, third = limit_cycle_trace.jumps
        assert np.array_equal(first.q_after, third.q_after)
        assert np.allclose(first.x, third.x, rtol=0.0, atol=1e-12)
        assert first.q_after.tolist() == [0, 1]
        assert limit_cycle_trace.jumps[1].q_after.tolist() == [1, 0]

    def test_time_domain_tiles_horizon(self, limit_cycle_trace: HybridTrace) -> None:
        """
        Flow intervals are contiguous and separated by the recorded jumps.

        :param limit_cycle_trace: The two-agent periodic run.
        """
        flows = limit_cycle_trace.flows
        assert flows[0].t_start == 0.0
        assert flows[-1].t_end == 3.0
        for before, after in zip(flows, flows[1:]):
            assert after.t_start == before.t_end
            assert after.j == before.j + 1
        for flow, jump in zip(flows, limit_cycle_trace.jumps):
            assert np.array_equal(flow.q, jump.q_before)
            assert np.allclose(flow.x_end, jump.x, atol=1e-15)

    def test_states_stay_in_bands(self, limit_cycle_trace: HybridTrace, unit_spec: QuantizerSpec) -> None:
        """
        Every flow stays within Δ/2 of its level.

        :param limit_cycle_trace: The two-agent periodic run.
        :param unit_spec: Quantizer with Δ = 1.
        """
        for flow in limit_cycle_trace.flows:
            for x in (flow.x_start, flow.x_end):
                assert np.all(np.abs(x - unit_spec.level(flow.q)) <= unit_spec.half + 1e-12)

    def test_average_is_preserved(
        self, ring10: WeightedDigraph, ring_spec: QuantizerSpec, ring10_x0: np.ndarray
    ) -> None:
        """
        Flows on a balanced graph keep the average.

        :param ring10: The directed ring of ten agents.
        :param ring_spec: Quantizer with Δ = 0.05.
        :param ring10_x0: The reference initial state of the ring.
        """
        trace = simulate_hybrid(ring10_x0, ring10, ring_spec, 20.0)
        _, states = trace.sample_points()
        assert np.max(np.abs(states.mean(axis=1) - ring10_x0.mean())) <= 1e-12 * 20

    def test_equilibrium_start_is_fixed(
        self, ring10: WeightedDigraph, ring_spec: QuantizerSpec
    ) -> None:
        """
        A start in the equilibrium set never moves.

        :param ring10: The directed ring of ten agents.
        :param ring_spec: Quantizer with Δ = 0.05.
        """
        x0 = np.linspace(0.43, 0.47, 10)
        trace = simulate_hybrid(x0, ring10, ring_spec, 1000.0)
        assert trace.jump_count == 0
        assert len(trace.flows) == 1
        assert trace.flows[0].open_ended
        assert np.array_equal(trace.final_state, x0)

    def test_initial_jump_gives_zero_length_interval(
        self, pair_graph: WeightedDigraph, unit_spec: QuantizerSpec
    ) -> None:
        """
        A start in the jump set records an empty flow before the first jump.

        :param pair_graph: The symmetric two-agent graph.
        :param unit_spec: Quantizer with Δ = 1.
        """
        trace = simulate_hybrid([0.5, 0.0], pair_graph, unit_spec, 1.0)
        assert trace.flows[0].duration == 0.0
        assert trace.jumps[0].t == 0.0
        assert trace.q_initial.tolist() == [2, 0]
        assert all(flow.duration > 0 for flow in trace.flows[1:])

    def test_deterministic(
        self, ring10: WeightedDigraph, ring_spec: QuantizerSpec, ring10_x0: np.ndarray
    ) -> None:
        """
        Identical inputs give identical jumps.

        :param ring10: The directed ring of ten agents.
        :param ring_spec: Quantizer with Δ = 0.05.
        :param ring10_x0: The reference initial state of the ring.
        """
        first = simulate_hybrid(ring10_x0, ring10, ring_spec, 30.0)
        second = simulate_hybrid(ring10_x0, ring10, ring_spec, 30.0)
        assert [jump.t for jump in first.jumps] == [jump.t for jump in second.jumps]
        assert all(
            np.array_equal(a.x, b.x) and np.array_equal(a.q_after, b.q_after)
            for a, b in zip(first.jumps, second.jumps)
        )

    def test_max_jumps_truncates(
        self, pair_graph: WeightedDigraph, unit_spec: QuantizerSpec, caplog: pytest.LogCaptureFixture
    ) -> None:
        """
        Hitting the jump cap stops the run and logs a warning.

        :param pair_graph: The symmetric two-agent graph.
        :param unit_spec: Quantizer with Δ = 1.
        :param caplog: Pytest fixture capturing log records.
        """
        trace = simulate_hybrid([-0.25, 0.75], pair_graph, unit_spec, 100.0, max_jumps=2, q0=[0, 2])
        assert trace.truncated
        assert trace.jump_count == 2
        assert trace.flows[-1].t_end == 2.25
        assert "max_jumps" in caplog.text

    @patch("quantized_consensus.hybrid.consensus_config")
    def test_max_jumps_default_from_settings(
        self, mock_config: MagicMock, pair_graph: WeightedDigraph, unit_spec: QuantizerSpec
    ) -> None:
        """
        The jump cap falls back to ``QUANTIZED_CONSENSUS_MAX_JUMPS``.

        :param mock_config: Mock of the consensus configuration.
        :param pair_graph: The symmetric two-agent graph.
        :param unit_spec: Quantizer with Δ = 1.
        """
        mock_config.max_jumps = 1
        trace = simulate_hybrid([-0.25, 0.75], pair_graph, unit_spec, 100.0, q0=[0, 2])
        assert trace.truncated
        assert trace.jump_count == 1

    def test_requires_balanced_graph(
        self, unbalanced_pair: WeightedDigraph, unit_spec: QuantizerSpec
    ) -> None:
        """
        Unbalanced graphs are rejected before simulating.

        :param unbalanced_pair: A graph with a single directed edge.
        :param unit_spec: Quantizer with Δ = 1.
        """
        with pytest.raises(NotBalancedError):
            simulate_hybrid([0.0, 1.0], unbalanced_pair, unit_spec, 1.0)

    def test_state_at_and_sample(self, limit_cycle_trace: HybridTrace) -> None:
        """
        Point evaluation takes the post-jump state at jump instants.

        :param limit_cycle_trace: The two-agent periodic run.
        """
        x, q, j = limit_cycle_trace.state_at(0.25)
        assert j == 1
        assert q.tolist() == [0, 1]
        assert np.allclose(x, [0.0, 0.5])
        rows = limit_cycle_trace.sample(0.5)
        assert [row[0] for row in rows] == [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0]
        assert [row[1] for row in rows] == [0, 1, 1, 2, 2, 3, 3]
        with pytest.raises(InvalidParameterError):
            limit_cycle_trace.state_at(3.5)


class TestLevelEnvelope:
    """
    Jumps never widen the range of levels and cannot accumulate.
    """

    def _runs(
        self, balanced_corpus: List[WeightedDigraph], spec: QuantizerSpec
    ) -> List[HybridTrace]:
        rng = np.random.default_rng(FUZZ_SEED + 11)
        return [
            simulate_hybrid(rng.uniform(-1.0, 1.0, size=graph.n), graph, spec, 20.0)
            for graph in balanced_corpus[:25]
        ]

    def test_level_range_shrinks(self, balanced_corpus: List[WeightedDigraph]) -> None:
        """
        After time zero no jump raises the top level or lowers the bottom one.

        :param balanced_corpus: Seeded weight-balanced digraphs.
        """
        for trace in self._runs(balanced_corpus, QuantizerSpec(0.1)):
            for jump in trace.jumps:
                if jump.t > 0:
                    assert jump.q_after.max() <= jump.q_before.max()
                    assert jump.q_after.min() >= jump.q_before.min()

    def test_jump_count_within_dwell_bound(
        self, balanced_corpus: List[WeightedDigraph]
    ) -> None:
        """
        ``n (T / τ + 1)`` bounds the jumps of a run of length ``T``.

        :param balanced_corpus: Seeded weight-balanced digraphs.
        """
        spec = QuantizerSpec(0.1)
        for trace, graph in zip(self._runs(balanced_corpus, spec), balanced_corpus):
            dwell = dwell_time_bound(graph, trace.q_initial, spec)
            assert trace.jump_count <= graph.n * (trace.horizon / dwell + 1)

    def test_ring_level_range_shrinks(
        self, ring10: WeightedDigraph, ring_spec: QuantizerSpec, ring10_x0: np.ndarray
    ) -> None:
        """
        The ring's level range never widens on its way to the cycle.

        :param ring10: The directed ring of ten agents.
        :param ring_spec: Quantizer with Δ = 0.05.
        :param ring10_x0: The reference initial state of the ring.
        """
        trace = simulate_hybrid(ring10_x0, ring10, ring_spec, 120.0)
        _, levels = trace.level_series()
        assert np.all(np.diff(levels.max(axis=1)) <= 0)
        assert np.all(np.diff(levels.min(axis=1)) >= 0)


class TestBounds:
    """
    Dwell-time and data-rate bounds.
    """

    def test_pair_bounds(self, pair_graph: WeightedDigraph, unit_spec: QuantizerSpec) -> None:
        """
        Closed-form bounds of the two-agent example.

        :param pair_graph: The symmetric two-agent graph.
        :param unit_spec: Quantizer with Δ = 1.
        """
        assert dwell_time_bound(pair_graph, [0, 2], unit_spec) == pytest.approx(1 / 6)
        assert data_rate_bound(pair_graph, [0, 2], unit_spec) == 24.0

    def test_zero_levels(self, pair_graph: WeightedDigraph, unit_spec: QuantizerSpec) -> None:
        """
        All-zero levels still need one level bit and a sign bit.

        :param pair_graph: The symmetric two-agent graph.
        :param unit_spec: Quantizer with Δ = 1.
        """
        assert dwell_time_bound(pair_graph, [0, 0], unit_spec) == pytest.approx(1 / pair_graph.norm_inf)
        assert data_rate_bound(pair_graph, [0, 0], unit_spec) == 3 * pair_graph.norm_inf
        assert bits_per_transmission([0, 0]) == 3

    def test_ring_bounds(
        self, ring10: WeightedDigraph, ring_spec: QuantizerSpec, ring10_x0: np.ndarray
    ) -> None:
        """
        Bounds of the ten-agent ring from its reference state.

        :param ring10: The directed ring of ten agents.
        :param ring_spec: Quantizer with Δ = 0.05.
        :param ring10_x0: The reference initial state of the ring.
        """
        q0 = uniform_quantize_vector(ring10_x0, ring_spec)
        assert dwell_time_bound(ring10, q0, ring_spec) == pytest.approx(0.025 / (2 * 0.925))
        assert data_rate_bound(ring10, q0, ring_spec) == 592.0


class TestLimitCycle:
    def test_pair_cycle(self, limit_cycle_trace: HybridTrace) -> None:
        """
        Three jumps show the period but cannot confirm it.

        :param limit_cycle_trace: The two-agent periodic run.
        """
        report = detect_limit_cycle(limit_cycle_trace)
        assert report.found
        assert report.entry_time == 0.25
        assert report.period == pytest.approx(2.0, abs=1e-12)
        assert len(report.states) == 2
        assert report.amplitude.tolist() == [1, 1]
        assert not report.confirmed

    def test_longer_run_confirms(self, pair_graph: WeightedDigraph, unit_spec: QuantizerSpec) -> None:
        """
        A further full period confirms the recurrence.

        :param pair_graph: The symmetric two-agent graph.
        :param unit_spec: Quantizer with Δ = 1.
        """
        trace = simulate_hybrid([-0.25, 0.75], pair_graph, unit_spec, 7.0, q0=[0, 2])
        report = detect_limit_cycle(trace)
        assert report.confirmed
        assert report.entry_time == 0.25
        assert report.period == pytest.approx(2.0, abs=1e-12)

    def test_equilibrium_has_no_cycle(
        self, ring10: WeightedDigraph, ring_spec: QuantizerSpec
    ) -> None:
        """
        A run without jumps has no cycle.

        :param ring10: The directed ring of ten agents.
        :param ring_spec: Quantizer with Δ = 0.05.
        """
        trace = simulate_hybrid(np.full(10, 0.31), ring10, ring_spec, 50.0)
        assert not detect_limit_cycle(trace).found

    def test_transient_recurrence_is_skipped(self) -> None:
        """
        A recurrence the next period contradicts gives way to a later cycle.
        """
        trace = _jump_trace([[0], [2], [0], [4], [6], [4], [6], [4], [6]])
        report = detect_limit_cycle(trace)
        assert report.found
        assert report.confirmed
        assert report.entry_time == 3.0
        assert report.period == 2.0
        assert report.amplitude.tolist() == [2]

    def test_contradicted_recurrence_is_not_a_cycle(self) -> None:
        """
        Only a recurrence with room left to verify is reported unconfirmed.
        """
        assert not detect_limit_cycle(_jump_trace([[0], [2], [0], [4], [6]])).found
        report = detect_limit_cycle(_jump_trace([[0], [2], [0], [4], [6], [4]]))
        assert report.found
        assert not report.confirmed
        assert report.entry_time == 3.0

    def test_ring_cycle_amplitude(
        self, ring10: WeightedDigraph, ring_spec: QuantizerSpec, ring10_x0: np.ndarray
    ) -> None:
        """
        The ring settles on a confirmed cycle of one jump per time unit.

        :param ring10: The directed ring of ten agents.
        :param ring_spec: Quantizer with Δ = 0.05.
        :param ring10_x0: The reference initial state of the ring.
        """
        trace = simulate_hybrid(ring10_x0, ring10, ring_spec, 400.0)
        report = detect_limit_cycle(trace)
        assert report.found
        assert report.confirmed
        assert report.entry_time > 45.0
        assert abs(len(report.states) - report.period) <= max(2.0, 0.1 * report.period)
        assert int(report.amplitude.max()) == 4


class TestVerifyDwell:
    def test_limit_cycle_passes(
        self, limit_cycle_trace: HybridTrace, pair_graph: WeightedDigraph, unit_spec: QuantizerSpec
    ) -> None:
        """
        The pair run respects dwell, envelope and data-rate bounds.

        :param limit_cycle_trace: The two-agent periodic run.
        :param pair_graph: The symmetric two-agent graph.
        :param unit_spec: Quantizer with Δ = 1.
        """
        report = verify_dwell_and_bounds(limit_cycle_trace, pair_graph, unit_spec)
        assert report.passed
        assert report.dwell_bound == pytest.approx(1 / 6)
        assert set(report.checks) == {"dwell", "envelope", "data_rate"}

    def test_equilibrium_passes_vacuously(
        self, ring10: WeightedDigraph, ring_spec: QuantizerSpec
    ) -> None:
        """
        A run without jumps passes every check.

        :param ring10: The directed ring of ten agents.
        :param ring_spec: Quantizer with Δ = 0.05.
        """
        trace = simulate_hybrid(np.full(10, 0.31), ring10, ring_spec, 5.0)
        assert verify_dwell_and_bounds(trace, ring10, ring_spec).passed

    def test_ring_run_passes(
        self, ring10: WeightedDigraph, ring_spec: QuantizerSpec, ring10_x0: np.ndarray
    ) -> None:
        """
        The ring run respects every bound.

        :param ring10: The directed ring of ten agents.
        :param ring_spec: Quantizer with Δ = 0.05.
        :param ring10_x0: The reference initial state of the ring.
        """
        trace = simulate_hybrid(ring10_x0, ring10, ring_spec, 80.0)
        assert verify_dwell_and_bounds(trace, ring10, ring_spec).passed

    def test_empty_trace(self, pair_graph: WeightedDigraph, unit_spec: QuantizerSpec) -> None:
        """
        A trace without flows cannot be verified.

        :param pair_graph: The symmetric two-agent graph.
        :param unit_spec: Quantizer with Δ = 1.
        """
        trace = HybridTrace(delta=1.0, horizon=1.0, q_initial=np.zeros(2, dtype=np.int64), flows=[], jumps=[])
        with pytest.raises(EmptyTraceError):
            verify_dwell_and_bounds(trace, pair_graph, unit_spec)
