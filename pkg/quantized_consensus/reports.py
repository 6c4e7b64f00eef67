from typing import Iterable, Optional

from quantized_consensus.graph import (
    WeightedDigraph,
    is_strongly_connected,
    is_weakly_connected,
    is_weight_balanced,
)
from quantized_consensus.hybrid import data_rate_bound, dwell_time_bound
from quantized_consensus.metrics import bounds_report, disagreement
from quantized_consensus.quantizer import QuantizerSpec, uniform_quantize_vector
from quantized_consensus.types import (
    DataType,
    ErrorType,
    FloatArray,
    JsonDict,
    MessageType,
)

# Report builders


def success_report(message: MessageType = None, data: DataType = None) -> JsonDict:
    """Constructs a standard report structure for a finished command.

    :param message: A message describing the result.
    :param data: Data to be reported.
    :return: A dict with the structured report.

    """
    return {
        "status": "success",
        "message": message,
        "data": data,
        "errors": None,
    }


def error_report(
    message: MessageType = None,
    errors: ErrorType = None,
    error_code: Optional[str] = None,
) -> JsonDict:
    """Constructs an error report structure.

    :param message: Error message.
    :param errors: Detailed errors, e.g. the offending field.
    :param error_code: Optional error code (the exception class name).
    :return: A dict with the error structure.

    """
    return {
        "status": "error",
        "message": message,
        "data": None,
        "errors": errors,
        "error_code": error_code,
    }


def batch_report(results: Iterable[JsonDict], message: MessageType = None) -> JsonDict:
    """Constructs a report for a batch of scenario runs.

    :param results: One report per scenario, in input order.
    :param message: A message describing the batch.
    :return: A dict whose status is an error if any run failed.

    """
    results = list(results)
    failed = [result for result in results if result["status"] != "success"]
    return {
        "status": "error" if failed else "success",
        "message": message,
        "data": results,
        "errors": [result["errors"] for result in failed] or None,
    }


def bounds_report_payload(
    g: WeightedDigraph,
    spec: QuantizerSpec,
    x0: Optional[FloatArray] = None,
    epsilons: Iterable[float] = (0.0, 0.5),
) -> JsonDict:
    """Graph verdicts and every closed-form bound that applies to ``g``.

    Spectral fields, strip radii and convergence times are only present
    for weight-balanced, weakly connected graphs with at least two agents;
    dwell-time and data-rate bounds only when ``x0`` is given.

    :param g: The graph to analyze.
    :param spec: Quantizer step used by the radii and bounds.
    :param x0: Optional initial state; ``q0`` is its uniform quantization.
    :param epsilons: Strip parameters to report radii for.
    :return: A JSON-serializable dict.

    """
    balanced = is_weight_balanced(g)
    weakly = is_weakly_connected(g)
    payload: JsonDict = {
        "n": g.n,
        "delta": spec.delta,
        "weight_balanced": balanced,
        "weakly_connected": weakly,
        "strongly_connected": is_strongly_connected(g),
        "symmetric": g.is_symmetric(),
        "norm_L_inf": g.norm_inf,
    }
    if balanced and weakly and g.n >= 2:
        epsilons = tuple(epsilons)
        y0_norm = disagreement(x0) if x0 is not None else None
        document = bounds_report(g, spec).to_document(
            epsilons, y0_norm if y0_norm else None
        )
        for key in ("n", "delta", "norm_L_inf"):
            document.pop(key)
        payload.update(document)
    if x0 is not None and g.norm_inf > 0:
        q0 = uniform_quantize_vector(x0, spec)
        payload["q0"] = q0.tolist()
        payload["dwell_time_bound"] = dwell_time_bound(g, q0, spec)
        payload["data_rate_bound"] = data_rate_bound(g, q0, spec)
    return payload
