"""Disagreement, convergence strips and convergence-time bounds."""

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Tuple, Union

import numpy as np

from quantized_consensus.exceptions import InvalidParameterError, NonFiniteInputError
from quantized_consensus.graph import WeightedDigraph, spectral_data
from quantized_consensus.hybrid import HybridTrace
from quantized_consensus.krasowskii import KrasowskiiTrace
from quantized_consensus.quantizer import QuantizerSpec
from quantized_consensus.settings.conf import consensus_config
from quantized_consensus.types import FloatArray, JsonDict, VectorLike, Witnesses

# Slack added to the strip radius when checking recorded samples.
STRIP_ATOL = 1e-6
LYAPUNOV_RTOL = 1e-9

Trace = Union[KrasowskiiTrace, HybridTrace]


def omega(x: VectorLike) -> FloatArray:
    """Projection onto the disagreement subspace, ``x - mean(x) 1``."""
    vector = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(vector)):
        raise NonFiniteInputError("state vector must be finite")
    return vector - math.fsum(vector) / vector.size


def disagreement(x: VectorLike) -> float:
    return float(np.linalg.norm(omega(x)))


def _check_epsilon(epsilon: float, open_at_zero: bool) -> None:
    low_ok = epsilon > 0 if open_at_zero else epsilon >= 0
    if not (low_ok and epsilon < 1):
        interval = "(0, 1)" if open_at_zero else "[0, 1)"
        raise InvalidParameterError(f"epsilon must lie in {interval}, got {epsilon}")


@dataclass(frozen=True)
class BoundsReport:
    """Strip radii and convergence times of one graph and quantizer step."""

    n: int
    delta: float
    lambda2: float
    norm_L: float
    norm_L_inf: float

    @property
    def radius_M(self) -> float:
        return (self.norm_L / self.lambda2) * (self.delta / 2) * math.sqrt(self.n)

    def radius_M_eps(self, epsilon: float) -> float:
        _check_epsilon(epsilon, open_at_zero=False)
        return self.radius_M / (1 - epsilon)

    def T_eps(self, epsilon: float, y0_norm: float) -> float:
        """Time after which the disagreement stays within ``radius_M_eps``."""
        _check_epsilon(epsilon, open_at_zero=True)
        if not y0_norm > 0:
            raise InvalidParameterError(f"y0_norm must be positive, got {y0_norm}")
        ratio = self.radius_M_eps(epsilon) / y0_norm
        return max(0.0, -math.log(ratio) / (epsilon * self.lambda2))

    def to_document(
        self, epsilons: Iterable[float] = (0.0, 0.5), y0_norm: Optional[float] = None
    ) -> JsonDict:
        document: JsonDict = {
            "n": self.n,
            "delta": self.delta,
            "lambda2": self.lambda2,
            "norm_L": self.norm_L,
            "norm_L_inf": self.norm_L_inf,
            "strip_radius": {str(eps): self.radius_M_eps(eps) for eps in epsilons},
        }
        if y0_norm is not None:
            document["y0_norm"] = y0_norm
            document["convergence_time"] = {
                str(eps): self.T_eps(eps, y0_norm) for eps in epsilons if eps > 0
            }
        return document


def bounds_report(g: WeightedDigraph, spec: QuantizerSpec) -> BoundsReport:
    data = spectral_data(g)
    return BoundsReport(
        n=g.n,
        delta=spec.delta,
        lambda2=data.lambda2_sym,
        norm_L=data.norm_L_spectral,
        norm_L_inf=data.norm_L_inf,
    )


def strip_radius(g: WeightedDigraph, spec: QuantizerSpec, epsilon: float = 0.0) -> float:
    """Bound ``(1/(1-ε)) (‖L‖/λ₂) (Δ/2) √N`` on the long-run ``‖x - x_ave 1‖``."""
    _check_epsilon(epsilon, open_at_zero=False)
    return bounds_report(g, spec).radius_M_eps(epsilon)


def convergence_time(
    g: WeightedDigraph, spec: QuantizerSpec, epsilon: float, y0_norm: float
) -> float:
    _check_epsilon(epsilon, open_at_zero=True)
    return bounds_report(g, spec).T_eps(epsilon, y0_norm)


def disagreement_profile(trace: Trace) -> Tuple[FloatArray, FloatArray]:
    """``(times, ‖Ωx‖)`` at the recorded points of a trace."""
    times, states = trace.sample_points()
    centered = states - states.mean(axis=1, keepdims=True)
    return times, np.linalg.norm(centered, axis=1)


@dataclass(frozen=True)
class StripReport:
    epsilon: float
    radius: float
    initial_disagreement: float
    convergence_time: float
    trivially_satisfied: bool
    entry_time: Optional[float]
    violations: Witnesses = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_document(self) -> JsonDict:
        return {
            "epsilon": self.epsilon,
            "radius": self.radius,
            "initial_disagreement": self.initial_disagreement,
            "convergence_time": self.convergence_time,
            "trivially_satisfied": self.trivially_satisfied,
            "entry_time": self.entry_time,
            "passed": self.passed,
            "violations": self.violations,
        }


def check_strip_entry(
    trace: Trace,
    g: WeightedDigraph,
    spec: QuantizerSpec,
    epsilon: Optional[float] = None,
) -> StripReport:
    """Verify that the disagreement stays in the ε-strip from ``T(ε)`` on.

    Only recorded points are checked (interval endpoints for hybrid
    traces, where the extremes of linear motion lie). A trace that starts
    inside the strip is reported as trivially satisfied.

    Args:
        trace: Euler or hybrid trace.
        g: The graph the trace was simulated on.
        spec: Its quantizer step.
        epsilon: Defaults to ``QUANTIZED_CONSENSUS_DEFAULT_EPSILON``.

    """
    if epsilon is None:
        epsilon = consensus_config.default_epsilon
    _check_epsilon(epsilon, open_at_zero=True)
    bounds = bounds_report(g, spec)
    radius = bounds.radius_M_eps(epsilon)
    times, values = disagreement_profile(trace)
    initial = float(values[0])

    if initial <= radius:
        return StripReport(
            epsilon=epsilon,
            radius=radius,
            initial_disagreement=initial,
            convergence_time=0.0,
            trivially_satisfied=True,
            entry_time=0.0,
        )

    deadline = bounds.T_eps(epsilon, initial)
    inside = np.flatnonzero(values <= radius)
    late = (times >= deadline) & (values > radius + STRIP_ATOL)
    violations = [
        {"t": float(t), "disagreement": float(value)}
        for t, value in zip(times[late], values[late])
    ]
    return StripReport(
        epsilon=epsilon,
        radius=radius,
        initial_disagreement=initial,
        convergence_time=deadline,
        trivially_satisfied=False,
        entry_time=float(times[inside[0]]) if inside.size else None,
        violations=violations,
    )


@dataclass(frozen=True)
class LyapunovReport:
    radius: float
    intervals_checked: int
    violations: Witnesses = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


def check_lyapunov_decrease(
    trace: HybridTrace, g: WeightedDigraph, spec: QuantizerSpec
) -> LyapunovReport:
    """Check that ``‖Ωx‖`` does not grow on flow intervals that start outside ``M``.

    Along a flow ``d/dt ½‖y‖² <= -λ₂ ‖y‖ (‖y‖ - R)`` with ``y = Ωx`` and
    ``R`` the ε = 0 strip radius, and ``‖y‖`` is convex along a line, so
    comparing interval endpoints is enough. Jumps leave ``y`` unchanged.
    """
    radius = bounds_report(g, spec).radius_M
    checked = 0
    violations: Witnesses = []
    for flow in trace.flows:
        if flow.duration <= 0:
            continue
        start = disagreement(flow.x_start)
        if start <= radius:
            continue
        checked += 1
        end = disagreement(flow.x_end)
        if end > start * (1 + LYAPUNOV_RTOL):
            violations.append(
                {"j": flow.j, "t_start": flow.t_start, "start": start, "end": end}
            )
    return LyapunovReport(radius=radius, intervals_checked=checked, violations=violations)
