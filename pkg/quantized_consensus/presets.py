"""Named scenario batches reproducing the reference experiments."""

import copy
from dataclasses import dataclass
from typing import Dict, List

from quantized_consensus.types import JsonDict

# Published initial condition of the ten-agent experiments.
RING10_X0 = [
    0.91728,
    0.26898,
    0.76538,
    0.18858,
    0.28738,
    0.09098,
    0.57608,
    0.68328,
    0.54648,
    0.42558,
]

RGG10_SEED = 2009


@dataclass(frozen=True)
class Preset:
    name: str
    description: str
    scenarios: List[JsonDict]

    def summary(self) -> str:
        first = self.scenarios[0]
        solvers = ", ".join(scenario["solver"] for scenario in self.scenarios)
        graph = ", ".join(
            f"{key}={value}"
            for key, value in first["graph"].items()
            if key in ("generator", "n", "radius", "seed")
        )
        params = [f"graph({graph})"]
        if "delta" in first:
            params.append(f"delta={first['delta']}")
        if "dt" in first:
            params.append(f"dt={first['dt']}")
        params.append(f"horizon={first['horizon']}")
        x0 = first["x0"] if isinstance(first["x0"], str) else "custom"
        params.append(f"x0={x0}")
        return f"{self.name}: {self.description} [{solvers}; {'; '.join(params)}]"


_RING10 = {"generator": "ring", "n": 10}
_RGG10 = {
    "generator": "rgg",
    "n": 10,
    "radius": 0.2,
    "seed": RGG10_SEED,
    "max_attempts": 100_000,
}

PRESETS: Dict[str, Preset] = {
    preset.name: preset
    for preset in (
        Preset(
            name="example1-blocking",
            description="three-agent path started on a quantization surface (sliding mode)",
            scenarios=[
                {
                    "name": "example1-blocking",
                    "graph": {"generator": "path", "n": 3},
                    "delta": 1.0,
                    "x0": [1.0, 1.5, 2.0],
                    "solver": "euler-krasowskii",
                    "dt": 0.005,
                    "horizon": 0.5,
                    "blocking_agent": 1,
                }
            ],
        ),
        Preset(
            name="limit-cycle-n2",
            description="two agents whose hysteretic levels enter a periodic orbit",
            scenarios=[
                {
                    "name": "limit-cycle-n2",
                    "graph": {"generator": "inline", "adjacency": [[0, 1], [1, 0]]},
                    "delta": 1.0,
                    "x0": [-0.25, 0.75],
                    "q0": [0, 2],
                    "solver": "hybrid-exact",
                    "horizon": 3.0,
                }
            ],
        ),
        Preset(
            name="rgg10",
            description="random geometric graph on the unit square, both quantizers",
            scenarios=[
                {
                    "name": "rgg10-euler-krasowskii",
                    "graph": dict(_RGG10),
                    "delta": 0.05,
                    "x0": "ring10",
                    "solver": "euler-krasowskii",
                    "dt": 0.005,
                    "horizon": 50.0,
                },
                {
                    "name": "rgg10-hybrid-exact",
                    "graph": dict(_RGG10),
                    "delta": 0.05,
                    "x0": "ring10",
                    "solver": "hybrid-exact",
                    "horizon": 50.0,
                },
            ],
        ),
        Preset(
            name="ring10",
            description="directed ring of ten agents, both quantizers",
            scenarios=[
                {
                    "name": "ring10-euler-krasowskii",
                    "graph": dict(_RING10),
                    "delta": 0.05,
                    "x0": "ring10",
                    "solver": "euler-krasowskii",
                    "dt": 0.005,
                    "horizon": 80.0,
                },
                {
                    "name": "ring10-hybrid-exact",
                    "graph": dict(_RING10),
                    "delta": 0.05,
                    "x0": "ring10",
                    "solver": "hybrid-exact",
                    "horizon": 400.0,
                },
            ],
        ),
        Preset(
            name="linear-baseline",
            description="unquantized consensus on the directed ring of ten agents",
            scenarios=[
                {
                    "name": "linear-baseline",
                    "graph": dict(_RING10),
                    "x0": "ring10",
                    "solver": "euler-linear",
                    "dt": 0.005,
                    "horizon": 80.0,
                }
            ],
        ),
    )
}


def get_preset(name: str) -> List[JsonDict]:
    """Fresh copy of a preset's scenario batch; ``KeyError`` if unknown."""
    return copy.deepcopy(PRESETS[name].scenarios)


def list_presets() -> str:
    return "\n".join(preset.summary() for preset in PRESETS.values())
