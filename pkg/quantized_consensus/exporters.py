import csv
import json
from pathlib import Path
from typing import Any, Iterable, List, Optional, Sequence, Union

import numpy as np

from quantized_consensus.graph import WeightedDigraph
from quantized_consensus.hybrid import HybridTrace
from quantized_consensus.krasowskii import KrasowskiiTrace
from quantized_consensus.settings.conf import consensus_config
from quantized_consensus.types import JsonDict

PathLike = Union[str, Path]


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def resolve_output_path(path: PathLike) -> Path:
    """Relative paths are taken from ``QUANTIZED_CONSENSUS_OUTPUT_DIR``."""
    target = Path(path)
    if not target.is_absolute():
        target = Path(consensus_config.output_dir) / target
    target.parent.mkdir(parents=True, exist_ok=True)
    return target


def _header(n: int, with_levels: bool, with_jumps: bool = False) -> List[str]:
    header = ["t"] + (["j"] if with_jumps else []) + [f"x{i + 1}" for i in range(n)]
    if with_levels:
        header += [f"q{i + 1}" for i in range(n)]
    return header


def _write_rows(
    path: PathLike,
    header: Sequence[str],
    rows: Iterable[Sequence[Any]],
    comments: Sequence[str],
) -> Path:
    target = resolve_output_path(path)
    with target.open("w", newline="", encoding="utf-8") as handle:
        for comment in comments:
            handle.write(f"# {comment}\n")
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return target


def write_euler_csv(
    trace: KrasowskiiTrace, path: PathLike, comments: Sequence[str] = ()
) -> Path:
    """One row per recorded step: ``t,x1..xn[,q1..qn]`` (levels as real values)."""
    with_levels = trace.quantized is not None and trace.delta is not None
    rows = []
    for index, t in enumerate(trace.times):
        row = [format_float(t)] + [format_float(v) for v in trace.states[index]]
        if with_levels:
            levels = trace.quantized[index].astype(float) * trace.delta / 2
            row += [format_float(v) for v in levels]
        rows.append(row)
    return _write_rows(path, _header(trace.n, with_levels), rows, comments)


def write_hybrid_csv(
    trace: HybridTrace,
    path: PathLike,
    stride: Optional[float] = None,
    comments: Sequence[str] = (),
) -> Path:
    """Sample a hybrid trace on a uniform grid: ``t,j,x1..xn,q1..qn``.

    ``stride`` defaults to ``QUANTIZED_CONSENSUS_EULER_DT``.
    """
    step = stride if stride is not None else consensus_config.euler_dt
    rows = []
    for t, j, x, q in trace.sample(step):
        levels = q.astype(float) * trace.delta / 2
        rows.append(
            [format_float(t), str(j)]
            + [format_float(v) for v in x]
            + [format_float(v) for v in levels]
        )
    return _write_rows(path, _header(trace.n, True, with_jumps=True), rows, comments)


def euler_trace_document(trace: KrasowskiiTrace) -> JsonDict:
    return {
        "delta": trace.delta,
        "dt": trace.dt,
        "times": trace.times.tolist(),
        "states": trace.states.tolist(),
        "quantized": None if trace.quantized is None else trace.quantized.tolist(),
        "jump_count": trace.jump_count,
    }


def hybrid_trace_document(trace: HybridTrace) -> JsonDict:
    """Flows and jumps; levels in half-quanta."""
    return {
        "delta": trace.delta,
        "horizon": trace.horizon,
        "truncated": trace.truncated,
        "q_initial": trace.q_initial.tolist(),
        "flows": [
            {
                "t0": flow.t_start,
                "t1": flow.t_end,
                "j": flow.j,
                "x0": flow.x_start.tolist(),
                "q": flow.q.tolist(),
            }
            for flow in trace.flows
        ],
        "jumps": [
            {
                "t": jump.t,
                "j": jump.j,
                "triggered": sorted(jump.triggered),
                "q_before": jump.q_before.tolist(),
                "q_after": jump.q_after.tolist(),
            }
            for jump in trace.jumps
        ],
    }


def _default(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"{type(value).__name__} is not JSON serializable")


def dumps(document: Any) -> str:
    return json.dumps(document, indent=2, default=_default)


def write_json(document: Any, path: PathLike) -> Path:
    target = resolve_output_path(path)
    target.write_text(dumps(document) + "\n", encoding="utf-8")
    return target


def write_graph_json(
    graph: WeightedDigraph, path: PathLike, seed: Optional[int] = None
) -> Path:
    """Graph file readable back by ``analyze`` and ``graph.generator = "file"``.

    Floats are written with ``repr`` precision, so adjacency and coordinates
    reload bit for bit.
    """
    document = graph.to_document()
    if seed is not None:
        document["seed"] = seed
    return write_json(document, path)
