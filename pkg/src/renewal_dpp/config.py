"""Run configuration and the scenario registry."""

from __future__ import annotations

import copy
import json
import os
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigurationError
from .scenario import FiniteScenario
from .tasknet import TaskNetConfig, TaskNetwork

ALGORITHMS = ("dpp-ratio", "alt-form", "alt-timeavg", "utility")
OUTPUT_ENV = "RENEWAL_DPP_OUTPUT"

# Small finite systems with known optima, shared by tests and ``verify``.
BUILTIN_FINITE = {
    # ratio optimum 1.5 and per-frame optimum 2.0, both at p_A = 2/3.
    "ab": {"y": [[1.0, 1.0], [4.0, 0.0]], "t": [1.0, 2.0], "targets": [0.5]},
    # log1p utility optimum ln(2.375) at p = 2/3.
    "utility-pair": {
        "y": [[0.0, 1.0], [0.0, 0.0]],
        "t": [1.0, 2.0],
        "targets": [0.5],
        "x": [[2.0], [1.5]],
    },
}


@dataclass
class RunConfig:
    scenario: dict = field(default_factory=lambda: {"name": "task-network"})
    algorithm: str = "dpp-ratio"
    frames: int = 1000
    v: float = 100.0
    w: int = 10
    seed: int = 0
    decay: float = 1.0
    utility: str = "log1p"
    bisection: dict = field(default_factory=dict)
    output: str | None = None
    verbosity: int = 0
    checkpoints: list | None = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigurationError(f"unknown algorithm {self.algorithm!r}; pick from {ALGORITHMS}")
        if int(self.frames) < 1:
            raise ConfigurationError("frames must be >= 1")
        if int(self.w) < 1:
            raise ConfigurationError("w must be >= 1")
        if float(self.v) < 0:
            raise ConfigurationError("v must be non-negative")
        if not isinstance(self.scenario, dict) or "name" not in self.scenario:
            raise ConfigurationError("scenario must be an object with a 'name'")
        name = self.scenario["name"]
        if name not in ("task-network", "finite") and name not in BUILTIN_FINITE:
            raise ConfigurationError(f"unknown scenario {name!r}")
        self.frames, self.w, self.seed = int(self.frames), int(self.w), int(self.seed)
        self.v = float(self.v)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigurationError(f"unknown config fields: {sorted(extra)}")
        return cls(**copy.deepcopy(data))

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_overrides(self, **kw) -> "RunConfig":
        data = self.to_dict()
        for key, value in kw.items():
            if value is None:
                continue
            set_path(data, key, value)
        return RunConfig.from_dict(data)

    def checkpoint_frames(self) -> list[int]:
        if self.checkpoints is not None:
            return sorted(int(c) for c in self.checkpoints if 0 < int(c) <= self.frames)
        out, k = [], 10
        while k <= self.frames:
            out.append(k)
            k *= 10
        return out

    def output_dir(self):
        return self.output or os.environ.get(OUTPUT_ENV)


def set_path(data: dict, path: str, value):
    """Assign ``value`` at a dotted path such as ``scenario.i_max``."""
    keys = path.split(".")
    node = data
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigurationError(f"cannot set {path}: {k} is not an object")
    node[keys[-1]] = value


def build_scenario(entry: dict):
    """Scenario from a config entry ``{"name": ..., **parameters}``."""
    params = dict(entry)
    name = params.pop("name")
    if name == "task-network":
        return TaskNetwork(TaskNetConfig(**params))
    if name in BUILTIN_FINITE:
        params = {**BUILTIN_FINITE[name], **params}
    elif name != "finite":
        raise ConfigurationError(f"unknown scenario {name!r}")
    try:
        return FiniteScenario(**params)
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for scenario {name!r}: {exc}") from exc
