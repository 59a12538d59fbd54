"""Experiment configuration: built-in default grids plus an INI-style file.

A config file holds one section per experiment. Every key is a parameter
taking a comma-separated list of values; ``grid = product`` (the default)
takes the cartesian product of the lists, ``grid = zip`` pairs them up
position by position (length-1 lists broadcast)::

    [distinct-accuracy]
    grid = zip
    k = 10, 50, 50
    n = 50, 200, 200
    eps = 1, 1, 0.5
    beta = 0.1, 0.1, 0.3
"""

from __future__ import annotations

import configparser
import itertools
from dataclasses import dataclass, field
from typing import Optional

EXPERIMENTS = (
    "distinct-accuracy",
    "hde-accuracy",
    "ut-power",
    "zsum-error",
    "histogram-error",
    "audit-de",
    "audit-ut",
    "audit-zsum",
    "mod2-security",
    "lemma-suite",
)

RESERVED_KEYS = ("grid", "seed", "out")


@dataclass
class ExperimentConfig:
    name: str
    points: list = field(default_factory=list)
    seed: int = 0
    out: Optional[str] = None
    trials: Optional[int] = None
    jobs: int = 1
    timing: bool = False
    seed_given: bool = False

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.name!r}; choose from {', '.join(EXPERIMENTS)}")


def parse_value(text: str):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def expand_grid(params: dict, mode: str = "product") -> list[dict]:
    """Grid points from lists of values per parameter."""
    if not params:
        return []
    keys = list(params)
    values = [params[k] for k in keys]
    if mode == "product":
        return [dict(zip(keys, combo)) for combo in itertools.product(*values)]
    if mode != "zip":
        raise ValueError(f"grid mode must be 'product' or 'zip', got {mode!r}")
    size = max(len(v) for v in values)
    if any(len(v) not in (1, size) for v in values):
        raise ValueError("zip grids need lists of equal length (or length 1)")
    return [{k: (v[i] if len(v) > 1 else v[0]) for k, v in zip(keys, values)} for i in range(size)]


def load_config(path: str, name: str) -> ExperimentConfig:
    parser = configparser.ConfigParser()
    # keep parameter names case-sensitive
    parser.optionxform = str
    if not parser.read(path):
        raise FileNotFoundError(path)
    if not parser.has_section(name):
        raise KeyError(f"config {path} has no [{name}] section")
    section = parser[name]
    params = {
        key: [parse_value(v) for v in raw.split(",") if v.strip()]
        for key, raw in section.items()
        if key not in RESERVED_KEYS
    }
    params = {k: v for k, v in params.items() if v}
    cfg = ExperimentConfig(name=name, points=expand_grid(params, section.get("grid", "product").strip()))
    if "seed" in section:
        cfg.seed = int(section["seed"])
        cfg.seed_given = True
    if "out" in section:
        cfg.out = section["out"].strip()
    return cfg
