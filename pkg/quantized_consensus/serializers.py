import json
from pathlib import Path
from typing import Any, List, Optional, Tuple, Union

from quantized_consensus.settings.setup import configure_django_settings

configure_django_settings()

from rest_framework import serializers  # noqa: E402
from rest_framework.settings import api_settings  # noqa: E402

from quantized_consensus.exceptions import ScenarioConfigError  # noqa: E402
from quantized_consensus.types import JsonDict  # noqa: E402

GRAPH_GENERATORS = ("ring", "path", "complete", "rgg", "inline", "file")
SOLVERS = ("euler-krasowskii", "euler-linear", "euler-hysteretic", "hybrid-exact")
OUTPUT_KINDS = (
    "trace-csv",
    "trace-json",
    "bounds-json",
    "report-json",
    "graph-json",
)
NAMED_INITIAL_STATES = ("ring10",)


def _join(field: Optional[str], key: str) -> str:
    return f"{field}.{key}" if field else key


def extract_first_error(
    error_data: Any, field: Optional[str] = None
) -> Tuple[Optional[str], str]:
    """Extract the first error message from nested serializer errors.

    Walks dicts, lists and strings depth first and stops at the first
    message, keeping the dotted path of the field it belongs to.

    Args:
        error_data: ``serializer.errors`` or any part of it.
        field: Dotted path of ``error_data`` itself.

    Returns:
        Tuple[Optional[str], str]: The field path (``None`` for
        object-level errors) and the message.

    """
    if isinstance(error_data, str):
        return field, str(error_data)
    if isinstance(error_data, list):
        for index, item in enumerate(error_data):
            if not item:
                continue
            child = field if isinstance(item, str) else _join(field, str(index))
            return extract_first_error(item, child)
    elif isinstance(error_data, dict):
        for key, value in error_data.items():
            if key == api_settings.NON_FIELD_ERRORS_KEY:
                return extract_first_error(value, field)
            return extract_first_error(value, _join(field, str(key)))
    return field, str(error_data)


def _square_matrix(value: Any, n: Optional[int] = None) -> None:
    if not isinstance(value, list) or not value:
        raise serializers.ValidationError("adjacency must be a non-empty list of rows")
    size = len(value)
    if any(not isinstance(row, list) or len(row) != size for row in value):
        raise serializers.ValidationError("adjacency must be a square matrix")
    if n is not None and n != size:
        raise serializers.ValidationError(f"n ({n}) does not match adjacency size ({size})")


class GraphDocumentSerializer(serializers.Serializer):
    n = serializers.IntegerField(required=False, min_value=1)
    adjacency = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(min_value=0))
    )
    coords = serializers.ListField(
        child=serializers.ListField(
            child=serializers.FloatField(), min_length=2, max_length=2
        ),
        required=False,
    )

    def validate(self, attrs: JsonDict) -> JsonDict:
        _square_matrix(attrs["adjacency"], attrs.get("n"))
        coords = attrs.get("coords")
        if coords is not None and len(coords) != len(attrs["adjacency"]):
            raise serializers.ValidationError({"coords": "one point per agent is required"})
        return attrs


class GraphSourceSerializer(serializers.Serializer):
    generator = serializers.ChoiceField(choices=GRAPH_GENERATORS)
    n = serializers.IntegerField(required=False, min_value=1)
    radius = serializers.FloatField(required=False)
    seed = serializers.IntegerField(required=False, min_value=0)
    max_attempts = serializers.IntegerField(required=False, min_value=1)
    adjacency = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField(min_value=0)),
        required=False,
    )
    coords = serializers.ListField(
        child=serializers.ListField(child=serializers.FloatField()), required=False
    )
    path = serializers.CharField(required=False)

    def validate_radius(self, value: float) -> float:
        if value <= 0:
            raise serializers.ValidationError("radius must be positive")
        return value

    def validate(self, attrs: JsonDict) -> JsonDict:
        generator = attrs["generator"]
        required = {
            "ring": ("n",),
            "path": ("n",),
            "complete": ("n",),
            "rgg": ("n", "radius", "seed"),
            "inline": ("adjacency",),
            "file": ("path",),
        }[generator]
        missing = [name for name in required if name not in attrs]
        if missing:
            raise serializers.ValidationError(
                {missing[0]: f"required for generator '{generator}'"}
            )
        if generator in ("ring", "path", "complete") and attrs["n"] < 2:
            raise serializers.ValidationError({"n": "at least 2 agents are required"})
        if generator == "inline":
            try:
                _square_matrix(attrs["adjacency"], attrs.get("n"))
            except serializers.ValidationError as exc:
                raise serializers.ValidationError({"adjacency": exc.detail}) from exc
        return attrs


class OutputSerializer(serializers.Serializer):
    kind = serializers.ChoiceField(choices=OUTPUT_KINDS)
    path = serializers.CharField()
    stride = serializers.FloatField(required=False)

    def validate_stride(self, value: float) -> float:
        if value <= 0:
            raise serializers.ValidationError("stride must be positive")
        return value


class ScenarioSerializer(serializers.Serializer):
    name = serializers.CharField(default="scenario")
    graph = GraphSourceSerializer()
    delta = serializers.FloatField(required=False)
    x0 = serializers.JSONField()
    q0 = serializers.ListField(child=serializers.IntegerField(), required=False)
    solver = serializers.ChoiceField(choices=SOLVERS)
    dt = serializers.FloatField(required=False)
    horizon = serializers.FloatField()
    max_jumps = serializers.IntegerField(required=False, min_value=0)
    record_stride = serializers.IntegerField(default=1, min_value=1)
    epsilon = serializers.FloatField(required=False)
    blocking_agent = serializers.IntegerField(required=False, min_value=0)
    outputs = OutputSerializer(many=True, required=False, default=list)

    def validate_delta(self, value: float) -> float:
        if value <= 0:
            raise serializers.ValidationError("delta must be positive")
        return value

    def validate_dt(self, value: float) -> float:
        if value <= 0:
            raise serializers.ValidationError("dt must be positive")
        return value

    def validate_horizon(self, value: float) -> float:
        if value <= 0:
            raise serializers.ValidationError("horizon must be positive")
        return value

    def validate_epsilon(self, value: float) -> float:
        if not 0 < value < 1:
            raise serializers.ValidationError("epsilon must lie in (0, 1)")
        return value

    def validate_x0(self, value: Any) -> Union[str, List[float]]:
        if isinstance(value, str):
            if value not in NAMED_INITIAL_STATES:
                raise serializers.ValidationError(
                    f"unknown initial state '{value}', expected one of {NAMED_INITIAL_STATES}"
                )
            return value
        if not isinstance(value, list) or not value:
            raise serializers.ValidationError("x0 must be a non-empty list or a preset name")
        field = serializers.ListField(child=serializers.FloatField())
        return field.run_validation(value)

    def validate(self, attrs: JsonDict) -> JsonDict:
        solver = attrs["solver"]
        if solver != "euler-linear" and "delta" not in attrs:
            raise serializers.ValidationError({"delta": f"required for solver '{solver}'"})
        if "q0" in attrs and solver != "hybrid-exact":
            raise serializers.ValidationError({"q0": "only used by the hybrid-exact solver"})
        if "max_jumps" in attrs and solver != "hybrid-exact":
            raise serializers.ValidationError(
                {"max_jumps": "only used by the hybrid-exact solver"}
            )
        if "dt" in attrs and solver == "hybrid-exact":
            raise serializers.ValidationError({"dt": "not used by the hybrid-exact solver"})
        kinds = [output["kind"] for output in attrs.get("outputs", [])]
        if solver == "euler-linear" and "bounds-json" in kinds:
            raise serializers.ValidationError(
                {"outputs": "bounds-json needs a quantized solver (delta)"}
            )

        n = self._agent_count(attrs["graph"])
        x0 = attrs["x0"]
        if n is not None and isinstance(x0, list) and len(x0) != n:
            raise serializers.ValidationError(
                {"x0": f"expected {n} initial values, got {len(x0)}"}
            )
        if n is not None and "q0" in attrs and len(attrs["q0"]) != n:
            raise serializers.ValidationError(
                {"q0": f"expected {n} levels, got {len(attrs['q0'])}"}
            )
        if n is not None and attrs.get("blocking_agent", 0) >= n:
            raise serializers.ValidationError({"blocking_agent": f"must be below {n}"})
        return attrs

    @staticmethod
    def _agent_count(graph: JsonDict) -> Optional[int]:
        if graph["generator"] == "inline":
            return len(graph["adjacency"])
        return graph.get("n")


def _raise_first_error(errors: Any, prefix: Optional[str] = None) -> None:
    field, message = extract_first_error(errors, prefix)
    raise ScenarioConfigError(message, field=field)


def load_json(path: Union[str, Path]) -> Any:
    """Read a JSON document, reporting syntax errors with their line.

    Raises:
        ScenarioConfigError: If the file cannot be read or parsed.

    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioConfigError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioConfigError(
            f"invalid JSON in {path}: {exc.msg}", line=exc.lineno
        ) from exc


def parse_scenarios(document: Any) -> List[JsonDict]:
    """Validate one scenario object or a list of them."""
    batch = document if isinstance(document, list) else [document]
    if not batch:
        raise ScenarioConfigError("scenario list is empty")
    scenarios = []
    for index, item in enumerate(batch):
        if not isinstance(item, dict):
            raise ScenarioConfigError(
                "scenario must be a JSON object",
                field=str(index) if isinstance(document, list) else None,
            )
        serializer = ScenarioSerializer(data=item)
        if not serializer.is_valid():
            _raise_first_error(
                serializer.errors, str(index) if isinstance(document, list) else None
            )
        scenarios.append(dict(serializer.validated_data))
    return scenarios


def parse_graph_document(document: Any) -> JsonDict:
    if not isinstance(document, dict):
        raise ScenarioConfigError("graph document must be a JSON object")
    serializer = GraphDocumentSerializer(data=document)
    if not serializer.is_valid():
        _raise_first_error(serializer.errors)
    return dict(serializer.validated_data)
