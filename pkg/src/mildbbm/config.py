"""Experiment configuration: a YAML file plus command-line overrides.

Flags win over the file.  The validated configuration is echoed verbatim
(as YAML, one ``#`` comment line per line) at the top of every CSV written,
excluding the two settings that cannot change the data: the worker count
and the output path.
"""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Optional

import yaml

from .asymptotics import ModelParams
from .bbm import DEFAULT_CAP, DEFAULT_H

EXPERIMENTS = (
    "constants", "env-gen", "env-clearing", "simulate", "yule-coalescence", "fk-moment",
    "exit-survival", "lln", "speed", "local-growth", "product-bound", "check",
)

_PARAM_KEYS = ("nu", "a", "beta1", "beta2")


@dataclass
class ExperimentConfig:
    experiment: str
    dim: int = 1
    params: dict = field(default_factory=lambda: {"nu": 1.0, "a": 0.5, "beta1": 0.0,
                                                  "beta2": 1.0})
    box: float = 20.0
    t_grid: list = field(default_factory=lambda: [1.0])
    reps: int = 100
    seed: int = 0
    cap: int = DEFAULT_CAP
    h: float = DEFAULT_H
    n_paths: int = 10_000
    out: Optional[str] = None
    options: dict = field(default_factory=dict)

    @property
    def model(self) -> ModelParams:
        return ModelParams(**{k: float(self.params[k]) for k in _PARAM_KEYS})

    @property
    def t(self) -> float:
        return float(self.t_grid[-1])

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}; "
                             f"choose from {', '.join(EXPERIMENTS)}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("dim must be a positive integer")
        self.dim = int(self.dim)
        missing = [k for k in _PARAM_KEYS if k not in self.params]
        if missing:
            raise ValueError(f"params missing {missing}")
        extra = set(self.params) - set(_PARAM_KEYS)
        if extra:
            raise ValueError(f"unknown params {sorted(extra)}")
        self.params = {k: float(self.params[k]) for k in _PARAM_KEYS}
        if self.experiment != "constants":
            self.model  # raises on invalid rates
        self.t_grid = [float(x) for x in self.t_grid]
        if not self.t_grid or any(x < 0 or not math.isfinite(x) for x in self.t_grid):
            raise ValueError("t_grid must be non-empty, finite and non-negative")
        if any(b <= a for a, b in zip(self.t_grid, self.t_grid[1:])):
            raise ValueError("t_grid must be strictly increasing")
        for name in ("reps", "cap", "n_paths", "seed"):
            v = getattr(self, name)
            if int(v) != v or v < 0:
                raise ValueError(f"{name} must be a non-negative integer")
            setattr(self, name, int(v))
        if not self.box > 0:
            raise ValueError("box must be > 0")
        self.box = float(self.box)
        if not self.h > 0:
            raise ValueError("h must be > 0")
        self.h = float(self.h)
        if not isinstance(self.options, dict):
            raise ValueError("options must be a mapping")
        return self

    def to_dict(self, echo: bool = False) -> dict:
        d = asdict(self)
        if echo:
            d.pop("out")
        return d

    def header_lines(self) -> list[str]:
        text = yaml.safe_dump(self.to_dict(echo=True), sort_keys=True, default_flow_style=None)
        return text.rstrip("\n").split("\n")


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if v is None:
            continue
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, overrides: Optional[dict] = None,
                experiment: Optional[str] = None) -> ExperimentConfig:
    """Read ``path`` (YAML mapping, optional) and apply ``overrides``."""
    data: dict[str, Any] = {}
    if path is not None:
        loaded = yaml.safe_load(Path(path).read_text())
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ValueError(f"{path}: top level must be a mapping")
        data = loaded
    base = {"params": ExperimentConfig.__dataclass_fields__["params"].default_factory()}
    data = _merge(_merge(base, data), overrides or {})
    if experiment is not None:
        data["experiment"] = experiment
    if "experiment" not in data:
        raise ValueError("no experiment named in config or on the command line")
    known = set(ExperimentConfig.__dataclass_fields__)
    unknown = set(data) - known
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    return ExperimentConfig(**data).validate()
