"""Seeded, resumable execution of an experiment grid.

Each condition is one work item. Its environment, policies and ground truth
come from a seed that ignores the sample size, so a learning curve over ``n``
shares one world. Every replicate then draws one logged dataset from its own
seed and hands that same dataset to every method.

Output layout in ``out_dir``:

``records.csv``
    One row per (condition, replicate, method) with the columns in
    :data:`CSV_COLUMNS`, ordered by grid position, replicate, method.
``manifest.json``
    The config, the method list, and per-condition parameters, seeds and
    ground truth values.
"""
from __future__ import annotations

import csv
import hashlib
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from ..cb import (
    BandwidthGrid,
    CbWorld,
    Kernel,
    kernel_ips,
    log_data,
    monte_carlo_value,
    slope_bandwidth,
    soften,
    train_policy,
)
from ..rl import (
    WeightProfile,
    direct_estimate,
    epsilon_greedy_policy,
    exact_value,
    fit_fqe,
    fit_mle_model,
    fit_qpi_lambda,
    graph_env,
    graph_pomdp_env,
    gridworld_env,
    hybrid_env,
    hybrid_policies,
    ips,
    sample_trajectories,
    slope_horizon,
    static_policy,
    wdr,
)
from .config import Condition, ExperimentConfig, derive_seed, expand_grid

CSV_COLUMNS = [
    "condition_id",
    "method",
    "replicate",
    "seed",
    "estimate",
    "truth",
    "sq_error",
    "chosen_param",
    "wall_ms",
]
RECORDS_FILE = "records.csv"
MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class RunRecord:
    condition_id: str
    method: str
    replicate: int
    seed: int
    estimate: float
    truth: float
    chosen_param: float | None = None
    wall_ms: float = 0.0
    data_digest: str = ""

    @property
    def sq_error(self) -> float:
        return (self.estimate - self.truth) ** 2

    def csv_row(self) -> list[str]:
        return [
            self.condition_id,
            self.method,
            str(self.replicate),
            str(self.seed),
            repr(float(self.estimate)),
            repr(float(self.truth)),
            repr(float(self.sq_error)),
            "" if self.chosen_param is None else repr(float(self.chosen_param)),
            repr(float(self.wall_ms)),
        ]


def _digest(*arrays: np.ndarray) -> str:
    h = hashlib.sha256()
    for arr in arrays:
        h.update(np.ascontiguousarray(arr).tobytes())
    return h.hexdigest()[:16]


# --------------------------------------------------------------------------
# contextual bandit conditions

_MODEL_ALIASES = {"linear": "linear_sigmoid", "linear_sigmoid": "linear_sigmoid", "tree": "tree"}


def cb_bandwidths(config: ExperimentConfig) -> np.ndarray:
    hs = config.settings.get("bandwidths")
    grid = BandwidthGrid.dyadic(7) if hs is None else BandwidthGrid([float(h) for h in hs])
    return grid.bandwidths


def cb_method_names(config: ExperimentConfig) -> list[str]:
    names = []
    for m in config.methods:
        if m == "slope":
            names.append("slope")
        elif m == "fixed":
            names.extend(f"fixed_h({h:g})" for h in cb_bandwidths(config)[::-1])
        else:
            raise ValueError(f"unknown CB method {m!r}")
    return names


@dataclass
class CbSetup:
    world: CbWorld
    pi_t: object
    pi_l: object
    kernel: Kernel
    truth: float
    truth_se: float


def build_cb(config: ExperimentConfig, cond: Condition, world_seed: int) -> CbSetup:
    p = cond.params
    s = config.settings
    rng = np.random.default_rng(world_seed)
    world = CbWorld(
        context_dim=int(s.get("context_dim", 5)),
        lipschitz=float(p["lipschitz"]),
        reward_kind=p["reward_kind"],
        seed=int(rng.integers(2**32)),
    )
    pi_t = train_policy(world, _MODEL_ALIASES[p["target"]], rng)
    logging = p["logging"]
    if logging == "uniform":
        pi_l = soften(None, "uniform")
    else:
        model, kind = logging.split("_", 1)
        base = train_policy(world, _MODEL_ALIASES[model], rng)
        pi_l = soften(
            base,
            kind,
            alpha=float(s.get("alpha", 0.9)),
            beta_soft=float(s.get("beta_soft", 0.1)),
            m=int(s.get("bins", 10)),
        )
    truth, se = monte_carlo_value(pi_t, world, int(s.get("mc_samples", 100_000)), rng)
    return CbSetup(world, pi_t, pi_l, Kernel(p["kernel"]), truth, se)


def run_cb_replicate(
    config: ExperimentConfig, cond: Condition, setup: CbSetup, replicate: int, seed: int
) -> list[RunRecord]:
    rng = np.random.default_rng(seed)
    data = log_data(setup.pi_l, setup.world, int(cond.params["n"]), rng)
    digest = _digest(data.contexts, data.actions, data.rewards, data.logging_density)
    hs = cb_bandwidths(config)
    out = []

    def emit(method, fn):
        t0 = time.perf_counter()
        est, chosen = fn()
        ms = (time.perf_counter() - t0) * 1e3 if config.record_wall_time else 0.0
        out.append(RunRecord(cond.condition_id, method, replicate, seed, float(est),
                             setup.truth, chosen, ms, digest))

    for m in config.methods:
        if m == "slope":
            p_min = min(1.0, float(data.logging_density.min()))
            emit("slope", lambda: slope_bandwidth(
                data, setup.pi_t, hs, setup.kernel, config.cnf_mode, config.delta, p_min)[:2])
        elif m == "fixed":
            for h in hs[::-1]:
                emit(f"fixed_h({h:g})", lambda h=h: (kernel_ips(data, setup.pi_t, h, setup.kernel), h))
    return out


# --------------------------------------------------------------------------
# reinforcement learning conditions

DEFAULT_DIRECT_MODEL = {
    "graph": "fqe",
    "graph_pomdp": "fqe",
    "gridworld": "qpi_lambda",
    "hybrid": "mle",
}


@dataclass
class RlSetup:
    env: object
    pi_l: object
    pi_t: object
    truth: float
    model_kind: str
    lam: float


def build_rl(config: ExperimentConfig, cond: Condition) -> RlSetup:
    p = cond.params
    s = config.settings
    name = p["env"]
    if name in ("graph", "graph_pomdp"):
        kw = dict(
            stochastic_reward=bool(p.get("stochastic_reward", False)),
            sparse=bool(p.get("sparse", False)),
        )
        env = graph_env(**kw) if name == "graph" else graph_pomdp_env(**kw)
        p_l, p_t = p.get("policy", [0.2, 0.8])
        pi_l, pi_t = static_policy(p_l, env.num_obs), static_policy(p_t, env.num_obs)
    elif name == "gridworld":
        env = gridworld_env(slip=float(p.get("slip", 0.0)))
        eps_l, eps_t = p.get("policy", [0.2, 0.1])
        pi_l, pi_t = epsilon_greedy_policy(env, eps_l), epsilon_greedy_policy(env, eps_t)
    elif name == "hybrid":
        env = hybrid_env(
            fail_a1_reward=float(s.get("fail_a1_reward", -1.0)),
            fail_reward_step=int(s.get("fail_reward_step", 1)),
        )
        pi_l, pi_t = hybrid_policies()
    else:
        raise ValueError(f"unknown environment {name!r}")
    model_kind = p.get("model", s.get("model", DEFAULT_DIRECT_MODEL[name]))
    return RlSetup(env, pi_l, pi_t, exact_value(env, pi_t), model_kind, float(s.get("lambda", 0.9)))


def fit_direct_model(setup: RlSetup, data):
    env = setup.env
    args = (data, setup.pi_t, env.num_obs, env.num_actions, env.gamma)
    if setup.model_kind == "fqe":
        return fit_fqe(*args)
    if setup.model_kind == "qpi_lambda":
        return fit_qpi_lambda(*args, lam=setup.lam)
    if setup.model_kind == "mle":
        return fit_mle_model(*args)
    raise ValueError(f"unknown direct model {setup.model_kind!r}")


def run_rl_replicate(
    config: ExperimentConfig, cond: Condition, setup: RlSetup, replicate: int, seed: int
) -> list[RunRecord]:
    rng = np.random.default_rng(seed)
    env = setup.env
    data = sample_trajectories(env, setup.pi_l, int(cond.params["n"]), rng)
    digest = _digest(data.observations, data.actions, data.rewards, data.propensities)
    model = fit_direct_model(setup, data)
    gamma = env.gamma
    profile = None
    if config.cnf_mode == "theoretical":
        profile = WeightProfile.from_policies(setup.pi_t, setup.pi_l, gamma, env.horizon)
    fns: dict[str, Callable] = {
        "slope": lambda: slope_horizon(data, setup.pi_t, model, gamma, config.cnf_mode,
                                       config.delta, profile)[:2],
        "dm": lambda: (direct_estimate(data, model), None),
        "wdr": lambda: (wdr(data, setup.pi_t, model, gamma), None),
        "ips": lambda: (ips(data, setup.pi_t, gamma), None),
    }
    out = []
    for m in config.methods:
        if m not in fns:
            raise ValueError(f"unknown RL method {m!r}")
        t0 = time.perf_counter()
        est, chosen = fns[m]()
        ms = (time.perf_counter() - t0) * 1e3 if config.record_wall_time else 0.0
        out.append(RunRecord(cond.condition_id, m, replicate, seed, float(est), setup.truth,
                             chosen, ms, digest))
    return out


# --------------------------------------------------------------------------
# driver


def method_names(config: ExperimentConfig) -> list[str]:
    return cb_method_names(config) if config.domain == "cb" else list(config.methods)


def replicate_seed(config: ExperimentConfig, cond: Condition, replicate: int) -> int:
    return derive_seed(config.master_seed, cond.condition_id, replicate)


def world_seed(config: ExperimentConfig, cond: Condition) -> int:
    return derive_seed(config.master_seed, cond.world_key(), "world")


def run_condition(config: ExperimentConfig, cond: Condition) -> tuple[dict, list[RunRecord]]:
    """Run every replicate of one condition. Returns ``(summary, records)``."""
    wseed = world_seed(config, cond)
    if config.domain == "cb":
        setup = build_cb(config, cond, wseed)
        step = run_cb_replicate
    else:
        setup = build_rl(config, cond)
        step = run_rl_replicate
    records = []
    for r in range(config.replicates):
        records.extend(step(config, cond, setup, r, replicate_seed(config, cond, r)))
    summary = {
        "condition_id": cond.condition_id,
        "params": cond.params,
        "world_seed": wseed,
        "truth": setup.truth,
    }
    return summary, records


def _run_condition_packed(args):
    return run_condition(*args)


def _read_existing(path: Path) -> dict[str, list[list[str]]]:
    rows: dict[str, list[list[str]]] = {}
    if not path.exists():
        return rows
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_COLUMNS:
            raise ValueError(f"{path} has an unexpected header {header}")
        for row in reader:
            rows.setdefault(row[0], []).append(row)
    return rows


def _resume_key(cfg: dict) -> str:
    # the output location does not affect results, everything else does
    return json.dumps({k: v for k, v in cfg.items() if k != "output"}, sort_keys=True)


def _write_manifest(out: Path, config: ExperimentConfig, summaries: dict, ordered_ids: list, done: bool):
    from .. import __version__

    manifest = {
        "package_version": __version__,
        "columns": CSV_COLUMNS,
        "config": config.to_dict(),
        "methods": method_names(config),
        "complete": done,
        "conditions": [summaries[c] for c in ordered_ids if c in summaries],
    }
    tmp = out / (MANIFEST_FILE + ".tmp")
    tmp.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, out / MANIFEST_FILE)


def run(
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    workers: int = 1,
    conditions: Iterable[Condition] | None = None,
) -> list[RunRecord]:
    """Run the grid, persisting to ``out_dir`` when given, and return new records.

    Conditions already complete in an existing ``records.csv`` are skipped, so
    an interrupted run can be restarted with the same arguments. On completion
    the CSV is rewritten in grid order, which makes a resumed run's files
    identical to an uninterrupted one.
    """
    conds = list(conditions) if conditions is not None else expand_grid(config)
    out_dir = out_dir if out_dir is not None else config.output
    per_condition = config.replicates * len(method_names(config))
    ordered_ids = [c.condition_id for c in conds]

    existing: dict[str, list[list[str]]] = {}
    summaries: dict[str, dict] = {}
    out = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        existing = _read_existing(out / RECORDS_FILE)
        existing = {k: v for k, v in existing.items() if len(v) == per_condition}
        mpath = out / MANIFEST_FILE
        if mpath.exists():
            previous = json.loads(mpath.read_text())
            if _resume_key(previous.get("config", {})) != _resume_key(config.to_dict()):
                raise ValueError(
                    f"{out} holds results of a different config; use a fresh output directory")
            for entry in previous.get("conditions", []):
                if entry["condition_id"] in existing:
                    summaries[entry["condition_id"]] = entry
        existing = {k: v for k, v in existing.items() if k in summaries}
        # keep only complete conditions, then append the rest
        with open(out / RECORDS_FILE, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for cid in ordered_ids:
                for row in existing.get(cid, []):
                    w.writerow(row)

    pending = [c for c in conds if c.condition_id not in existing]
    new_records: list[RunRecord] = []

    def consume(results):
        fh = open(out / RECORDS_FILE, "a", newline="") if out is not None else None
        try:
            w = csv.writer(fh, lineterminator="\n") if fh is not None else None
            for summary, recs in results:
                new_records.extend(recs)
                summaries[summary["condition_id"]] = summary
                if w is not None:
                    for rec in recs:
                        w.writerow(rec.csv_row())
                    fh.flush()
                    _write_manifest(out, config, summaries, ordered_ids, False)
        finally:
            if fh is not None:
                fh.close()

    if workers > 1 and len(pending) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            consume(pool.map(_run_condition_packed, [(config, c) for c in pending]))
    else:
        consume(run_condition(config, c) for c in pending)

    if out is not None:
        rows = _read_existing(out / RECORDS_FILE)
        with open(out / RECORDS_FILE, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for cid in ordered_ids:
                for row in rows.get(cid, []):
                    w.writerow(row)
        _write_manifest(out, config, summaries, ordered_ids, True)
    return new_records
