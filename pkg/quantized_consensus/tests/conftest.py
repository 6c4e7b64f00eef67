from typing import Iterator, List

import numpy as np
import pytest

from quantized_consensus.tests.setup import configure_django_settings
from django.test import override_settings
from quantized_consensus.graph import (
    WeightedDigraph,
    build_graph,
    gen_directed_ring,
    gen_path,
)
from quantized_consensus.hybrid import HybridTrace, simulate_hybrid
from quantized_consensus.presets import RING10_X0
from quantized_consensus.quantizer import QuantizerSpec
from quantized_consensus.tests.constants import (
    FUZZ_GRAPHS,
    FUZZ_SEED,
    SYMMETRIC_GRAPHS,
)


@pytest.fixture
def pair_graph() -> WeightedDigraph:
    """
    Fixture for the symmetric two-agent graph.

    :return: A graph with one undirected unit edge.
    """
    return build_graph([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def path3() -> WeightedDigraph:
    """
    Fixture for the undirected three-agent path.

    :return: The path 1 - 2 - 3 with unit weights.
    """
    return gen_path(3)


@pytest.fixture
def ring10() -> WeightedDigraph:
    """
    Fixture for the directed ring of ten agents.

    :return: The ring where agent i listens to agent i+1.
    """
    return gen_directed_ring(10)


@pytest.fixture
def unbalanced_pair() -> WeightedDigraph:
    """
    Fixture for a two-agent graph with a single directed edge.

    :return: A weakly connected graph that is not weight-balanced.
    """
    return build_graph([[0.0, 1.0], [0.0, 0.0]])


@pytest.fixture
def unit_spec() -> QuantizerSpec:
    """
    Fixture for the quantizer of unit step.

    :return: A quantizer with Δ = 1.
    """
    return QuantizerSpec(1.0)


@pytest.fixture
def ring_spec() -> QuantizerSpec:
    """
    Fixture for the quantizer used with the ten-agent ring.

    :return: A quantizer with Δ = 0.05.
    """
    return QuantizerSpec(0.05)


@pytest.fixture
def ring10_x0() -> np.ndarray:
    """
    Fixture for the reference initial state of the ten-agent ring.

    :return: A fresh copy of the ten initial values.
    """
    return np.array(RING10_X0)


@pytest.fixture
def limit_cycle_trace(pair_graph: WeightedDigraph, unit_spec: QuantizerSpec) -> HybridTrace:
    """
    Fixture for the two-agent hybrid run that enters a periodic orbit.

    Starts at x = (-0.25, 0.75) with levels (0, Δ), horizon 3.

    :param pair_graph: The symmetric two-agent graph.
    :param unit_spec: Quantizer with Δ = 1.
    :return: The simulated trace.
    """
    return simulate_hybrid([-0.25, 0.75], pair_graph, unit_spec, 3.0, q0=[0, 2])


def _random_balanced_graph(rng: np.random.Generator, n: int) -> WeightedDigraph:
    adjacency = np.zeros((n, n))
    for _ in range(int(rng.integers(1, 4))):
        order = rng.permutation(n)
        weight = float(rng.integers(1, 4))
        for k in range(n):
            adjacency[order[(k + 1) % n], order[k]] += weight
    return build_graph(adjacency)


def _random_symmetric_graph(rng: np.random.Generator, n: int) -> WeightedDigraph:
    adjacency = np.zeros((n, n))
    order = rng.permutation(n)
    for k in range(1, n):
        parent = order[int(rng.integers(0, k))]
        adjacency[order[k], parent] = adjacency[parent, order[k]] = 1.0
    for _ in range(int(rng.integers(0, n))):
        i, j = rng.choice(n, size=2, replace=False)
        adjacency[i, j] = adjacency[j, i] = 1.0
    return build_graph(adjacency)


@pytest.fixture(scope="session")
def balanced_corpus() -> List[WeightedDigraph]:
    """
    Fixture for seeded weight-balanced, strongly connected digraphs.

    Each graph is a sum of one to three random Hamiltonian cycles with
    integer weights, so in-degrees equal out-degrees exactly.

    :return: Graphs with 2 to 20 agents.
    """
    rng = np.random.default_rng(FUZZ_SEED)
    return [_random_balanced_graph(rng, int(rng.integers(2, 21))) for _ in range(FUZZ_GRAPHS)]


@pytest.fixture(scope="session")
def symmetric_corpus() -> List[WeightedDigraph]:
    """
    Fixture for seeded connected undirected graphs.

    :return: Random spanning trees plus extra edges, 2 to 15 agents.
    """
    rng = np.random.default_rng(FUZZ_SEED + 1)
    return [
        _random_symmetric_graph(rng, int(rng.integers(2, 16)))
        for _ in range(SYMMETRIC_GRAPHS)
    ]


@pytest.fixture
def settings_override() -> Iterator[None]:
    """
    Fixture overriding the Euler step through Django settings.

    :return: Nothing; settings are restored on teardown.
    """
    with override_settings(QUANTIZED_CONSENSUS_EULER_DT=0.01):
        yield
