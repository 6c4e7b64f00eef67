"""Weighted directed graphs, their Laplacians and spectral quantities.

Convention: ``adjacency[i][j] > 0`` iff agent ``i`` receives information from
agent ``j`` (edge ``(j, i)``), so ``in_degree`` are row sums and
``out_degree`` column sums. Degree sums are exactly rounded (``math.fsum``)
so that weight balance can be decided by exact comparison.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import networkx as nx
import numpy as np
from scipy.spatial.distance import pdist, squareform

from quantized_consensus.exceptions import (
    DisconnectedAfterMaxAttemptsError,
    InvalidParameterError,
    NegativeWeightError,
    NonSquareError,
    NotBalancedError,
    NotConnectedError,
    SelfLoopError,
)
from quantized_consensus.settings.conf import consensus_config
from quantized_consensus.types import Coordinates, FloatArray, JsonDict, MatrixLike

logger = logging.getLogger(__name__)

# Eigenvalues below this fraction of trace(Sym(L)) count as zero.
ZERO_EIGENVALUE_RTOL = 1e-9


def _readonly(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class LaplacianData:
    L: FloatArray
    in_degree: FloatArray
    out_degree: FloatArray


@dataclass(frozen=True)
class SpectralData:
    lambda2_sym: float
    norm_L_spectral: float
    norm_L_inf: float


@dataclass(frozen=True, eq=False)
class WeightedDigraph:
    """An immutable weighted digraph without self-loops.

    Build instances with :func:`build_graph` (or the generators), which
    validate the adjacency matrix.
    """

    adjacency: FloatArray
    coords: Coordinates = field(default=None)

    @property
    def n(self) -> int:
        return int(self.adjacency.shape[0])

    @cached_property
    def laplacian(self) -> LaplacianData:
        in_degree = np.array([math.fsum(row) for row in self.adjacency])
        out_degree = np.array([math.fsum(col) for col in self.adjacency.T])
        L = np.diag(in_degree) - self.adjacency
        return LaplacianData(
            L=_readonly(L),
            in_degree=_readonly(in_degree),
            out_degree=_readonly(out_degree),
        )

    @property
    def L(self) -> FloatArray:
        return self.laplacian.L

    @cached_property
    def norm_inf(self) -> float:
        """Max absolute row sum of L, i.e. twice the largest in-degree."""
        return float(np.abs(self.L).sum(axis=1).max())

    def in_neighbors(self, i: int) -> np.ndarray:
        return np.flatnonzero(self.adjacency[i])

    def is_symmetric(self) -> bool:
        return bool(np.array_equal(self.adjacency, self.adjacency.T))

    def to_networkx(self) -> nx.DiGraph:
        # networkx reads A[u][v] as edge u -> v, so transpose to get j -> i.
        return nx.from_numpy_array(self.adjacency.T, create_using=nx.DiGraph)

    def to_document(self) -> JsonDict:
        document: JsonDict = {
            "n": self.n,
            "adjacency": self.adjacency.tolist(),
        }
        if self.coords is not None:
            document["coords"] = self.coords.tolist()
        return document


def build_graph(
    adjacency: MatrixLike, coords: Optional[MatrixLike] = None
) -> WeightedDigraph:
    """Validate an adjacency matrix and wrap it in a :class:`WeightedDigraph`.

    Args:
        adjacency: Square matrix of nonnegative weights with a zero diagonal.
        coords: Optional ``n x 2`` node coordinates kept for export.

    Returns:
        WeightedDigraph: The validated, read-only graph.

    Raises:
        NonSquareError: If the matrix is not square (or is empty).
        NegativeWeightError: If an entry is negative or not finite.
        SelfLoopError: If a diagonal entry is nonzero.

    """
    try:
        matrix = np.array(adjacency, dtype=float)
    except ValueError as exc:
        raise NonSquareError(f"adjacency is not a rectangular matrix: {exc}") from exc
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.size == 0:
        raise NonSquareError(
            f"adjacency must be a non-empty square matrix, got {matrix.shape}"
        )
    if not np.all(np.isfinite(matrix)) or np.any(matrix < 0):
        raise NegativeWeightError("adjacency entries must be finite and nonnegative")
    if np.any(np.diag(matrix) != 0):
        raise SelfLoopError("adjacency diagonal must be zero (no self-loops)")

    points = None
    if coords is not None:
        points = np.array(coords, dtype=float)
        if points.shape != (matrix.shape[0], 2):
            raise NonSquareError(
                f"coords must have shape ({matrix.shape[0]}, 2), got {points.shape}"
            )
        points = _readonly(points)
    return WeightedDigraph(adjacency=_readonly(matrix), coords=points)


def is_weight_balanced(g: WeightedDigraph) -> bool:
    lap = g.laplacian
    return bool(np.array_equal(lap.in_degree, lap.out_degree))


def is_weakly_connected(g: WeightedDigraph) -> bool:
    return bool(nx.is_weakly_connected(g.to_networkx()))


def is_strongly_connected(g: WeightedDigraph) -> bool:
    return bool(nx.is_strongly_connected(g.to_networkx()))


def require_balanced_connected(g: WeightedDigraph) -> None:
    """Raise unless ``g`` is weight-balanced and weakly connected."""
    if not is_weight_balanced(g):
        raise NotBalancedError("graph is not weight-balanced (in-degree != out-degree)")
    if not is_weakly_connected(g):
        raise NotConnectedError("graph is not weakly connected")


def jacobi_eigenvalues(
    matrix: MatrixLike, tol: float = 1e-13, max_sweeps: int = 100
) -> FloatArray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps over every off-diagonal pair ``(p, q)`` and annihilates it with a
    plane rotation, until the off-diagonal Frobenius norm drops below
    ``tol`` times the Frobenius norm of the input.

    Args:
        matrix: Symmetric square matrix.
        tol: Relative stopping threshold on the off-diagonal mass.
        max_sweeps: Upper bound on full sweeps.

    Returns:
        FloatArray: Eigenvalues in ascending order.

    """
    a = np.array(matrix, dtype=float)
    n = a.shape[0]
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return np.sort(np.diag(a))

    for _ in range(max_sweeps):
        off = math.sqrt(2.0 * float(np.sum(np.triu(a, 1) ** 2)))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
    return np.sort(np.diag(a))


def spectral_data(g: WeightedDigraph) -> SpectralData:
    """λ₂(Sym(L)), ‖L‖ and ‖L‖∞ of a balanced, weakly connected graph.

    Raises:
        NotBalancedError: If the graph is not weight-balanced.
        NotConnectedError: If the graph is not weakly connected.
        InvalidParameterError: For a single agent (no nonzero eigenvalue).

    """
    require_balanced_connected(g)
    if g.n < 2:
        raise InvalidParameterError("spectral data needs at least two agents")

    L = g.L
    sym = (L + L.T) / 2.0
    eigenvalues = jacobi_eigenvalues(sym)
    threshold = ZERO_EIGENVALUE_RTOL * float(np.trace(sym))
    nonzero = eigenvalues[eigenvalues > threshold]
    singular_squares = jacobi_eigenvalues(L.T @ L)
    return SpectralData(
        lambda2_sym=float(nonzero[0]),
        norm_L_spectral=math.sqrt(max(float(singular_squares[-1]), 0.0)),
        norm_L_inf=g.norm_inf,
    )


def _require_agents(n: int, minimum: int) -> None:
    if n < minimum:
        raise InvalidParameterError(f"need at least {minimum} agents, got {n}")


def gen_directed_ring(n: int) -> WeightedDigraph:
    """Directed ring: agent i listens to agent i+1, the last one to the first."""
    _require_agents(n, 2)
    adjacency = np.zeros((n, n))
    for i in range(n):
        adjacency[i, (i + 1) % n] = 1.0
    return build_graph(adjacency)


def gen_path(n: int) -> WeightedDigraph:
    """Undirected path 1 - 2 - ... - n with unit weights."""
    _require_agents(n, 2)
    adjacency = np.zeros((n, n))
    for i in range(n - 1):
        adjacency[i, i + 1] = adjacency[i + 1, i] = 1.0
    return build_graph(adjacency)


def gen_complete(n: int) -> WeightedDigraph:
    _require_agents(n, 2)
    return build_graph(np.ones((n, n)) - np.eye(n))


def gen_random_geometric(
    n: int, radius: float, seed: Optional[int] = None, max_attempts: Optional[int] = None
) -> WeightedDigraph:
    """Connected random geometric graph on the unit square.

    Points are drawn i.i.d. uniform in ``[0, 1]^2`` and joined by a symmetric
    unit-weight edge when their distance is at most ``radius``. Disconnected
    draws are discarded and redrawn from the same seeded stream.

    Args:
        n: Number of agents.
        radius: Connectivity radius.
        seed: Seed of the ``numpy`` generator; equal seeds give equal graphs.
        max_attempts: Draw cap, defaults to ``QUANTIZED_CONSENSUS_RGG_MAX_ATTEMPTS``.

    Returns:
        WeightedDigraph: A connected graph carrying its node coordinates.

    Raises:
        DisconnectedAfterMaxAttemptsError: If no draw was connected.

    """
    _require_agents(n, 1)
    if not radius > 0:
        raise InvalidParameterError(f"radius must be positive, got {radius}")
    attempts = (
        max_attempts if max_attempts is not None else consensus_config.rgg_max_attempts
    )
    rng = np.random.default_rng(seed)

    for attempt in range(1, attempts + 1):
        points = rng.uniform(0.0, 1.0, size=(n, 2))
        if n == 1:
            adjacency = np.zeros((1, 1))
        else:
            adjacency = (squareform(pdist(points)) <= radius).astype(float)
            np.fill_diagonal(adjacency, 0.0)
        graph = build_graph(adjacency, coords=points)
        if is_weakly_connected(graph):
            logger.debug("random geometric graph connected after %d draw(s)", attempt)
            return graph

    raise DisconnectedAfterMaxAttemptsError(
        f"no connected graph with n={n}, radius={radius} in {attempts} attempts"
    )
