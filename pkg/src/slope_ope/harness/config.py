"""Experiment configuration and condition-grid expansion.

A config file is YAML with one or more ``grid`` blocks. Each block maps an
axis name to a list of values; the block expands to the cross product of its
axes, and blocks are concatenated in file order. Axis values that are the
same for every condition can go in ``fixed`` instead.

Example::

    domain: rl
    replicates: 100
    master_seed: 0
    methods: [slope, dm, wdr, ips]
    grid:
      - env: [graph]
        stochastic_reward: [false, true]
        n: [128, 256]
"""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

DEFAULT_METHODS = {"cb": ["slope", "fixed"], "rl": ["slope", "dm", "wdr", "ips"]}
DEFAULT_REPLICATES = {"cb": 30, "rl": 100}


@dataclass(frozen=True)
class Condition:
    """One point of the grid. ``params`` holds every axis value, including ``n``."""

    condition_id: str
    params: dict

    def world_key(self) -> dict:
        """Parameters that define the environment and policies, i.e. all but ``n``."""
        return {k: v for k, v in self.params.items() if k != "n"}


@dataclass
class ExperimentConfig:
    domain: str
    grid: list
    replicates: int
    master_seed: int = 0
    methods: list = field(default_factory=list)
    cnf_mode: str = "empirical"
    delta: float = 0.05
    fixed: dict = field(default_factory=dict)
    settings: dict = field(default_factory=dict)
    record_wall_time: bool = True
    output: str | None = None

    def __post_init__(self):
        if self.domain not in ("cb", "rl"):
            raise ValueError(f"domain must be 'cb' or 'rl', got {self.domain!r}")
        if isinstance(self.grid, dict):
            self.grid = [self.grid]
        if not self.grid:
            raise ValueError("grid must contain at least one block")
        for block in self.grid:
            if not block:
                raise ValueError("grid block has no axes")
            for axis, values in block.items():
                if not isinstance(values, list) or not values:
                    raise ValueError(f"axis {axis!r} must be a non-empty list")
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if not self.methods:
            self.methods = list(DEFAULT_METHODS[self.domain])
        if self.cnf_mode not in ("empirical", "theoretical"):
            raise ValueError(f"unknown cnf mode {self.cnf_mode!r}")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        domain = raw.pop("domain")
        raw.setdefault("replicates", DEFAULT_REPLICATES.get(domain, 1))
        known = set(cls.__dataclass_fields__)
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(domain=domain, **raw)

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "grid": self.grid,
            "replicates": self.replicates,
            "master_seed": self.master_seed,
            "methods": self.methods,
            "cnf_mode": self.cnf_mode,
            "delta": self.delta,
            "fixed": self.fixed,
            "settings": self.settings,
            "record_wall_time": self.record_wall_time,
            "output": self.output,
        }


def load_config(path: str | Path) -> ExperimentConfig:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config must be a mapping")
    return ExperimentConfig.from_dict(raw)


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _format_value(v: Any) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "(" + "_".join(_format_value(x) for x in v) + ")"
    return str(v)


def condition_id(params: dict) -> str:
    """Readable, stable id: ``key=value`` pairs in sorted key order joined by ``/``."""
    return "/".join(f"{k}={_format_value(params[k])}" for k in sorted(params))


def expand_grid(config: ExperimentConfig) -> list[Condition]:
    """Cross product of each grid block, concatenated across blocks.

    Duplicate conditions (same parameters from two blocks) are dropped after
    their first appearance.
    """
    seen = set()
    out = []
    for block in config.grid:
        axes = list(block)
        for combo in itertools.product(*(block[a] for a in axes)):
            params = dict(config.fixed)
            params.update(zip(axes, combo))
            cid = condition_id(params)
            if cid in seen:
                continue
            seen.add(cid)
            out.append(Condition(condition_id=cid, params=params))
    return out


def derive_seed(*parts: Any) -> int:
    """63-bit seed from a SHA-256 digest of the canonical JSON of ``parts``."""
    digest = hashlib.sha256(canonical_json(list(parts)).encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1
