"""Command line entry point: ``run``, ``analyze`` and ``presets``."""

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from django.core.checks import run_checks

from quantized_consensus import __version__
from quantized_consensus.decorators import (
    EXIT_CONFIG_ERROR,
    EXIT_OK,
    exit_status_decorator,
)
from quantized_consensus.exceptions import (
    NegativeWeightError,
    NonSquareError,
    ScenarioConfigError,
    SelfLoopError,
)
from quantized_consensus.exporters import (
    dumps,
    euler_trace_document,
    hybrid_trace_document,
    write_euler_csv,
    write_graph_json,
    write_hybrid_csv,
    write_json,
)
from quantized_consensus.graph import (
    WeightedDigraph,
    build_graph,
    gen_complete,
    gen_directed_ring,
    gen_path,
    gen_random_geometric,
)
from quantized_consensus.hybrid import (
    HybridTrace,
    detect_limit_cycle,
    in_initial_set,
    simulate_hybrid,
    verify_dwell_and_bounds,
)
from quantized_consensus.krasowskii import (
    EulerConfig,
    KrasowskiiTrace,
    detect_chattering,
    dist_to_equilibria,
    simulate_euler_hysteretic,
    simulate_euler_linear,
    simulate_euler_quantized,
)
from quantized_consensus.metrics import (
    check_lyapunov_decrease,
    check_strip_entry,
    disagreement,
)
from quantized_consensus.presets import RING10_X0, PRESETS, get_preset, list_presets
from quantized_consensus.quantizer import QuantizerSpec, caratheodory_blocking_test
from quantized_consensus.reports import batch_report, bounds_report_payload, success_report
from quantized_consensus.serializers import (
    load_json,
    parse_graph_document,
    parse_scenarios,
)
from quantized_consensus.settings.conf import consensus_config
from quantized_consensus.settings.setup import configure_django_settings
from quantized_consensus.types import FloatArray, JsonDict

logger = logging.getLogger(__name__)

Trace = Union[KrasowskiiTrace, HybridTrace]


def _build_checked(adjacency: object, coords: object = None) -> WeightedDigraph:
    try:
        return build_graph(adjacency, coords)
    except (NonSquareError, NegativeWeightError, SelfLoopError) as exc:
        raise ScenarioConfigError(str(exc), field="graph.adjacency") from exc


def resolve_graph(source: JsonDict) -> Tuple[WeightedDigraph, Optional[int]]:
    """Build the graph a validated scenario describes, with its RGG seed."""
    generator = source["generator"]
    if generator == "ring":
        return gen_directed_ring(source["n"]), None
    if generator == "path":
        return gen_path(source["n"]), None
    if generator == "complete":
        return gen_complete(source["n"]), None
    if generator == "rgg":
        graph = gen_random_geometric(
            source["n"],
            source["radius"],
            seed=source["seed"],
            max_attempts=source.get("max_attempts"),
        )
        return graph, source["seed"]
    if generator == "inline":
        return _build_checked(source["adjacency"], source.get("coords")), None
    document = parse_graph_document(load_json(source["path"]))
    return _build_checked(document["adjacency"], document.get("coords")), None


def resolve_x0(value: object, n: int) -> FloatArray:
    x0 = RING10_X0 if value == "ring10" else value
    vector = np.array(x0, dtype=float)
    if vector.shape != (n,):
        raise ScenarioConfigError(
            f"expected {n} initial values, got {vector.size}", field="x0"
        )
    return vector


def graph_from_source(source: str) -> Tuple[WeightedDigraph, Optional[int]]:
    """Parse ``ring:N``, ``path:N``, ``complete:N``, ``rgg:N:RADIUS:SEED`` or a file."""
    kind, _, rest = source.partition(":")
    if kind in ("ring", "path", "complete", "rgg") and rest:
        parts = rest.split(":")
        try:
            if kind == "rgg":
                n, radius, seed = int(parts[0]), float(parts[1]), int(parts[2])
                graph = {"generator": kind, "n": n, "radius": radius, "seed": seed}
            else:
                graph = {"generator": kind, "n": int(parts[0])}
        except (ValueError, IndexError) as exc:
            raise ScenarioConfigError(
                f"malformed graph source '{source}'", field="source"
            ) from exc
        if graph["n"] < 2:
            raise ScenarioConfigError("at least 2 agents are required", field="source")
        return resolve_graph(graph)
    if not Path(source).exists():
        raise ScenarioConfigError(
            f"no such graph file or generator: {source}", field="source"
        )
    return resolve_graph({"generator": "file", "path": source})


def _parse_x0_argument(value: Optional[str], n: int) -> Optional[FloatArray]:
    if value is None:
        return None
    if value == "ring10":
        return resolve_x0(value, n)
    text = value if value.lstrip().startswith("[") else f"[{value}]"
    try:
        parsed = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioConfigError(f"cannot parse --x0: {exc.msg}", field="x0") from exc
    return resolve_x0(parsed, n)


def _write_outputs(
    scenario: JsonDict,
    g: WeightedDigraph,
    trace: Trace,
    payload: JsonDict,
    seed: Optional[int],
) -> None:
    comments = [f"seed={seed}"] if seed is not None else []
    for output in scenario.get("outputs", []):
        kind, path = output["kind"], output["path"]
        if kind == "trace-csv":
            if isinstance(trace, HybridTrace):
                write_hybrid_csv(trace, path, output.get("stride"), comments)
            else:
                write_euler_csv(trace, path, comments)
        elif kind == "trace-json":
            document = (
                hybrid_trace_document(trace)
                if isinstance(trace, HybridTrace)
                else euler_trace_document(trace)
            )
            document["seed"] = seed
            write_json(document, path)
        elif kind == "bounds-json":
            write_json(payload.get("bounds"), path)
        elif kind == "graph-json":
            write_graph_json(g, path, seed)
        else:
            write_json(success_report(payload["summary"], payload), path)
        logger.info("wrote %s to %s", kind, path)


def _summarize_euler(
    trace: KrasowskiiTrace,
    g: WeightedDigraph,
    spec: Optional[QuantizerSpec],
    epsilon: Optional[float] = None,
) -> JsonDict:
    data: JsonDict = {"jumps": trace.jump_count if trace.level_step == 1 else None}
    if spec is None:
        return data
    chatter = detect_chattering(trace)
    data["chattering_agents"] = chatter.chattering_agents
    data["flip_counts"] = chatter.flip_counts.tolist()
    data["final_dist_to_equilibria"] = dist_to_equilibria(trace.final_state, spec)
    if g.n >= 2:
        data["strip"] = check_strip_entry(trace, g, spec, epsilon).to_document()
    return data


def _summarize_hybrid(
    trace: HybridTrace,
    g: WeightedDigraph,
    spec: QuantizerSpec,
    epsilon: Optional[float] = None,
) -> JsonDict:
    cycle = detect_limit_cycle(trace)
    dwell = verify_dwell_and_bounds(trace, g, spec)
    lyapunov = check_lyapunov_decrease(trace, g, spec)
    return {
        "jumps": trace.jump_count,
        "truncated": trace.truncated,
        "starts_in_initial_set": in_initial_set(
            trace.initial_state, trace.q_initial, spec
        ),
        "jump_times": [jump.t for jump in trace.jumps[:100]],
        "cycle": {
            "found": cycle.found,
            "entry_time": cycle.entry_time,
            "period": cycle.period,
            "confirmed": cycle.confirmed,
            "amplitude": None if cycle.amplitude is None else cycle.amplitude.tolist(),
        },
        "dwell": {
            "dwell_time_bound": dwell.dwell_bound,
            "data_rate_bound": dwell.rate_bound,
            "checks": {
                name: {"passed": check.passed, "witnesses": check.witnesses[:10]}
                for name, check in dwell.checks.items()
            },
        },
        "lyapunov": {"passed": lyapunov.passed, "intervals": lyapunov.intervals_checked},
        "strip": check_strip_entry(trace, g, spec, epsilon).to_document(),
    }


def _summary_line(name: str, solver: str, data: JsonDict) -> str:
    jumps = data.get("jumps")
    cycle = data.get("cycle")
    if cycle is None:
        verdict = "n/a"
    elif cycle["found"] and cycle["confirmed"]:
        verdict = f"period={cycle['period']:.6g}"
    elif cycle["found"]:
        verdict = f"unconfirmed-period={cycle['period']:.6g}"
    else:
        verdict = "none"
    line = (
        f"{name}: solver={solver} "
        f"disagreement={data['final_disagreement']:.6g} "
        f"jumps={'n/a' if jumps is None else jumps} cycle={verdict}"
    )
    if "blocking" in data:
        blocking = data["blocking"]
        line += (
            f" blocking={blocking['verdict']}"
            f"(agent={blocking['agent']}, f+={blocking['f_plus']:g},"
            f" f-={blocking['f_minus']:g})"
        )
    return line


def execute_scenario(scenario: JsonDict) -> JsonDict:
    """Run one validated scenario and write its declared outputs.

    Returns:
        JsonDict: A success report whose message is the one-line summary.

    """
    name, solver = scenario["name"], scenario["solver"]
    g, seed = resolve_graph(scenario["graph"])
    x0 = resolve_x0(scenario["x0"], g.n)
    spec = QuantizerSpec(scenario["delta"]) if "delta" in scenario else None
    logger.debug("running scenario %s with %s", name, solver)

    data: JsonDict = {"name": name, "solver": solver, "n": g.n, "seed": seed}
    if "blocking_agent" in scenario and spec is not None:
        report = caratheodory_blocking_test(x0, scenario["blocking_agent"], g, spec)
        data["blocking"] = {
            "verdict": report.verdict.value,
            "agent": report.agent,
            "f_plus": report.f_plus,
            "f_minus": report.f_minus,
        }

    trace: Trace
    if solver == "hybrid-exact":
        trace = simulate_hybrid(
            x0,
            g,
            spec,
            scenario["horizon"],
            max_jumps=scenario.get("max_jumps"),
            q0=scenario.get("q0"),
        )
        data.update(_summarize_hybrid(trace, g, spec, scenario.get("epsilon")))
    else:
        cfg = EulerConfig(
            horizon=scenario["horizon"],
            dt=scenario.get("dt", consensus_config.euler_dt),
            record_stride=scenario["record_stride"],
        )
        if solver == "euler-linear":
            trace = simulate_euler_linear(x0, g, cfg)
        elif solver == "euler-hysteretic":
            trace = simulate_euler_hysteretic(x0, g, spec, cfg)
        else:
            trace = simulate_euler_quantized(x0, g, spec, cfg)
        data.update(_summarize_euler(trace, g, spec, scenario.get("epsilon")))

    data["final_disagreement"] = disagreement(trace.final_state)
    if spec is not None and g.n >= 2:
        data["bounds"] = bounds_report_payload(g, spec, x0)
    data["summary"] = _summary_line(name, solver, data)
    _write_outputs(scenario, g, trace, data, seed)
    return success_report(data["summary"], data)


def _load_scenarios(config: str) -> List[JsonDict]:
    if Path(config).exists():
        return parse_scenarios(load_json(config))
    if config in PRESETS:
        return parse_scenarios(get_preset(config))
    raise ScenarioConfigError(f"no such config file or preset: {config}", field="config")


@exit_status_decorator
def run_scenario(config: str, jobs: int = 1, report_path: Optional[str] = None) -> int:
    """Run every scenario of a config file or preset and print one line each.

    Args:
        config: Path of a JSON scenario (or list of scenarios), or a preset name.
        jobs: Scenarios executed concurrently.
        report_path: Optional path of a JSON batch report.

    Returns:
        int: The process exit status.

    """
    scenarios = _load_scenarios(config)
    if jobs > 1 and len(scenarios) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as executor:
            results = list(executor.map(execute_scenario, scenarios))
    else:
        results = [execute_scenario(scenario) for scenario in scenarios]

    for result in results:
        print(result["message"])
    if report_path is not None:
        summary = f"{len(results)} scenario(s) from {config}"
        write_json(batch_report(results, summary), report_path)
    return EXIT_OK


@exit_status_decorator
def analyze_graph(
    source: str,
    delta: float = 0.05,
    x0: Optional[str] = None,
    output: Optional[str] = None,
    graph_output: Optional[str] = None,
) -> int:
    """Print graph verdicts and closed-form bounds as JSON.

    ``graph_output`` also saves the resolved graph, so a seeded RGG can be
    analyzed again from the file.
    """
    if not delta > 0:
        raise ScenarioConfigError("delta must be positive", field="delta")
    g, seed = graph_from_source(source)
    spec = QuantizerSpec(delta)
    payload = bounds_report_payload(g, spec, _parse_x0_argument(x0, g.n))
    if seed is not None:
        payload["seed"] = seed
    report = success_report(f"analysis of {source}", payload)
    print(dumps(report))
    if output is not None:
        write_json(report, output)
    if graph_output is not None:
        write_graph_json(g, graph_output, seed)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="quantized-consensus",
        description="Simulate and analyze quantized average consensus.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log at DEBUG level")
    commands = parser.add_subparsers(dest="command", required=True)

    run = commands.add_parser("run", help="run a scenario file or preset")
    run.add_argument("config", help="JSON scenario file or preset name")
    run.add_argument("--jobs", type=int, default=1, help="scenarios run in parallel")
    run.add_argument("--report", help="write a JSON report of the batch")

    analyze = commands.add_parser("analyze", help="report bounds for a graph")
    analyze.add_argument(
        "source", help="graph JSON file, ring:N, path:N, complete:N or rgg:N:R:SEED"
    )
    analyze.add_argument("--delta", type=float, default=0.05, help="quantizer step")
    analyze.add_argument("--x0", help="initial state: 'ring10' or comma separated values")
    analyze.add_argument("--output", help="also write the JSON report to this path")
    analyze.add_argument("--graph-output", help="also write the graph as a JSON file")

    commands.add_parser("presets", help="list the built-in scenario presets")
    return parser


def configure_logging(verbose: bool = False) -> None:
    level = logging.DEBUG if verbose else str(consensus_config.log_level).upper()
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_django_settings()

    errors = [message for message in run_checks() if message.is_serious()]
    if errors:
        for error in errors:
            sys.stderr.write(f"{error}\n")
        return EXIT_CONFIG_ERROR
    configure_logging(args.verbose)

    if args.command == "run":
        return run_scenario(args.config, jobs=args.jobs, report_path=args.report)
    if args.command == "analyze":
        return analyze_graph(
            args.source,
            delta=args.delta,
            x0=args.x0,
            output=args.output,
            graph_output=args.graph_output,
        )
    print(list_presets())
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
