"""Uniform and hysteretic quantizers of step Δ.

Every discrete level is kept as an exact integer count of half-quanta
(``k`` stands for ``k * Δ/2``): uniform-quantizer outputs are even counts,
hysteretic levels may be odd. Floats appear only when a level is turned into
a velocity or compared against a state, and always through
:meth:`QuantizerSpec.level`, so thresholds are computed identically everywhere.

The Krasowskii regularization of ``x -> -L q(x)`` is the closed convex hull of
``-L q`` over shrinking balls around ``x``. The uniform quantizer is piecewise
constant and acts componentwise, so those values form a finite Cartesian
product of per-component level sets, whose hull is the product of the
per-component hulls (the :class:`KrasowskiiBox`). Its image under the linear
map ``-L`` is the polytope spanned by the images of the box vertices.
"""

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Tuple, Union

import numpy as np

from quantized_consensus.exceptions import (
    InvalidParameterError,
    NonFiniteInputError,
    NotInJumpSetError,
    PreconditionViolatedError,
    TooManyVerticesError,
)
from quantized_consensus.graph import WeightedDigraph, is_weight_balanced
from quantized_consensus.types import FloatArray, HalfQuantaLike, IntArray, VectorLike

# Boundary detection tolerance, relative to Δ.
BOUNDARY_RTOL = 1e-12
MAX_BOX_BOUNDARY_COMPONENTS = 20


@dataclass(frozen=True)
class QuantizerSpec:
    delta: float

    def __post_init__(self) -> None:
        if not (isinstance(self.delta, (int, float)) and math.isfinite(self.delta)):
            raise InvalidParameterError(
                f"delta must be a finite number, got {self.delta!r}"
            )
        if self.delta <= 0:
            raise InvalidParameterError(f"delta must be positive, got {self.delta}")

    @property
    def half(self) -> float:
        return self.delta / 2

    def level(self, k: Union[int, HalfQuantaLike]) -> Union[float, FloatArray]:
        """Real value of a half-quantum count (scalar or array)."""
        if isinstance(k, (int, np.integer)):
            return int(k) * self.delta / 2
        return np.asarray(k, dtype=np.int64).astype(float) * self.delta / 2


@dataclass(frozen=True, order=True)
class HalfQuantum:
    k: int

    def value(self, spec: QuantizerSpec) -> float:
        return float(spec.level(self.k))


@dataclass(frozen=True, eq=False)
class KrasowskiiBox:
    """Per-component closed intervals ``[lo_i, hi_i]`` in half-quanta."""

    lo: IntArray
    hi: IntArray

    @property
    def boundary_components(self) -> IntArray:
        return np.flatnonzero(self.lo != self.hi)

    def vertices(self) -> Iterator[IntArray]:
        boundary = self.boundary_components
        for choice in itertools.product((False, True), repeat=len(boundary)):
            vertex = self.lo.copy()
            picks = boundary[np.array(choice, dtype=bool)] if len(boundary) else boundary
            vertex[picks] = self.hi[picks]
            yield vertex


class SurfaceCrossing(enum.Enum):
    SAME_SIGN = "SameSign"
    BLOCKING = "Blocking"
    TANGENT = "Tangent"


@dataclass(frozen=True)
class CaratheodoryReport:
    verdict: SurfaceCrossing
    agent: int
    f_plus: float
    f_minus: float


def _finite_vector(x: VectorLike) -> FloatArray:
    vector = np.asarray(x, dtype=float)
    if vector.ndim != 1:
        raise NonFiniteInputError(f"expected a state vector, got shape {vector.shape}")
    if not np.all(np.isfinite(vector)):
        raise NonFiniteInputError("state vector must be finite")
    return vector


def uniform_quantize(x: float, spec: QuantizerSpec) -> HalfQuantum:
    """``floor(x/Δ + 1/2) * Δ``; ties at ``(k+1/2)Δ`` round up."""
    if not math.isfinite(x):
        raise NonFiniteInputError(f"cannot quantize {x!r}")
    return HalfQuantum(2 * math.floor(x / spec.delta + 0.5))


def uniform_quantize_vector(x: VectorLike, spec: QuantizerSpec) -> IntArray:
    vector = _finite_vector(x)
    return 2 * np.floor(vector / spec.delta + 0.5).astype(np.int64)


def krasowskii_box(x: VectorLike, spec: QuantizerSpec) -> KrasowskiiBox:
    """Krasowskii set of the uniform quantizer, component by component.

    Interior components map to their single level; a component lying on a
    surface ``(k+1/2)Δ`` (up to ``1e-12 Δ``) maps to ``[kΔ, (k+1)Δ]``.
    """
    vector = _finite_vector(x)
    cell = np.floor(vector / spec.delta).astype(np.int64)
    surface = (cell.astype(float) + 0.5) * spec.delta
    on_surface = np.abs(vector - surface) <= BOUNDARY_RTOL * spec.delta
    level = uniform_quantize_vector(vector, spec)
    lo = np.where(on_surface, 2 * cell, level)
    hi = np.where(on_surface, 2 * cell + 2, level)
    return KrasowskiiBox(lo=lo, hi=hi)


def krasowskii_velocity_polytope(
    x: VectorLike, g: WeightedDigraph, spec: QuantizerSpec
) -> FloatArray:
    """Vertices of ``K(-L q(x))`` as rows, deduplicated, in enumeration order.

    Raises:
        TooManyVerticesError: If more than 20 components sit on a surface.

    """
    box = krasowskii_box(x, spec)
    if len(box.boundary_components) > MAX_BOX_BOUNDARY_COMPONENTS:
        raise TooManyVerticesError(
            f"{len(box.boundary_components)} components on quantization surfaces "
            f"(limit {MAX_BOX_BOUNDARY_COMPONENTS})"
        )
    levels = np.array([spec.level(vertex) for vertex in box.vertices()])
    velocities = -(levels @ g.L.T)
    # Velocities are weighted sums of half-quanta; key them at that scale.
    keys = np.round(velocities / spec.half, 6)
    _, first = np.unique(keys, axis=0, return_index=True)
    return velocities[np.sort(first)]


def caratheodory_blocking_test(
    x: VectorLike, j: int, g: WeightedDigraph, spec: QuantizerSpec
) -> CaratheodoryReport:
    """Sign test of the vector field on both sides of the surface through ``x_j``.

    ``f_plus`` is the ``j``-th velocity component just above the surface
    (``q_j = (k+1)Δ``), ``f_minus`` just below it (``f_plus + d_in(j) Δ``).
    Both pointing at the surface means no Caratheodory solution leaves ``x``.

    Raises:
        PreconditionViolatedError: If ``x_j`` is not on a surface, another
            component is, or the graph is not weight-balanced.

    """
    box = krasowskii_box(x, spec)
    boundary = box.boundary_components.tolist()
    if not 0 <= j < g.n:
        raise PreconditionViolatedError(f"agent {j} out of range for n={g.n}")
    if boundary != [j]:
        raise PreconditionViolatedError(
            f"expected exactly agent {j} on a quantization surface, found {boundary}"
        )
    if not is_weight_balanced(g):
        raise PreconditionViolatedError("graph must be weight-balanced")

    upper = box.lo.copy()
    upper[j] = box.hi[j]
    f_plus = float(-(g.L[j] @ spec.level(upper)))
    f_minus = f_plus + float(g.laplacian.in_degree[j]) * spec.delta

    if f_plus == 0 or f_minus == 0:
        verdict = SurfaceCrossing.TANGENT
    elif f_plus < 0 < f_minus:
        verdict = SurfaceCrossing.BLOCKING
    else:
        verdict = SurfaceCrossing.SAME_SIGN
    return CaratheodoryReport(verdict=verdict, agent=j, f_plus=f_plus, f_minus=f_minus)


def hysteresis_init(x: VectorLike, spec: QuantizerSpec) -> IntArray:
    return uniform_quantize_vector(x, spec)


def hysteresis_triggers(
    x: VectorLike, q: HalfQuantaLike, spec: QuantizerSpec
) -> Tuple[np.ndarray, np.ndarray]:
    """Masks of components at or beyond their upper / lower threshold."""
    vector = np.asarray(x, dtype=float)
    levels = np.asarray(q, dtype=np.int64)
    up = vector >= spec.level(levels + 1)
    down = vector <= spec.level(levels - 1)
    return up, down


def hysteresis_jump(x: VectorLike, q: HalfQuantaLike, spec: QuantizerSpec) -> IntArray:
    """Discrete update of the hysteretic quantizer.

    Every component with ``x_i >= q_i + Δ/2`` moves up half a quantum and
    every component with ``x_i <= q_i - Δ/2`` moves down, all in one jump.

    Raises:
        NotInJumpSetError: If no component meets a threshold.

    """
    up, down = hysteresis_triggers(x, q, spec)
    if not (up.any() or down.any()):
        raise NotInJumpSetError("state is not in the jump set")
    return np.asarray(q, dtype=np.int64) + up.astype(np.int64) - down.astype(np.int64)
