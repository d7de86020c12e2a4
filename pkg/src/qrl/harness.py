"""Experiment configuration, seeded orchestration and report files.

Configs are YAML mappings. Per-run seeds come from a master seed by a counter
scheme: run ``i`` uses the first word of ``SeedSequence([master_seed, i])``,
so extending the seed count never changes the seeds of earlier runs.
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import numpy as np
import yaml

from .agents import PSAgent
from .environments import EnvSpec, MazeFormatError, load_maze
from .hybrid import (
    ArmResult,
    HybridAgent,
    QUANTUM_STREAM,
    explore,
    matched_budget,
    run_classical,
    run_hybrid,
    stream,
)
from .metalearn import (
    EvalTable,
    MetaParamGrid,
    SeedPolicy,
    eval_bin,
    grid_search,
    is_unimodal,
    linspace_axis,
    quantum_meta_opt,
    single_axis,
    unimodal_search,
)
from .oracle import OracleConstructionError, oracularize, verify_equivalence
from .quantum import QueryLedger, uniform_state

KINDS = ("verify-oracle", "explore", "learn", "metalearn")
METHODS = ("grid", "unimodal", "quantum")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str) -> None:
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


class VerificationFailure(RuntimeError):
    pass


def derive_seeds(master_seed: int, count: int) -> list[int]:
    return [int(np.random.SeedSequence([master_seed, i]).generate_state(1)[0]) for i in range(count)]


@dataclass
class ExperimentConfig:
    kind: str
    maze: Path
    seeds: list[int] = field(default_factory=list)
    master_seed: int = 0
    gamma: float = 0.0
    eta: float = 1.0
    replay_count: int = 10
    total_steps: int | None = None
    tested_epochs: int = 200
    explore_fraction: float | None = None
    c_stop: float = 30.0
    c_dh: float = 22.5
    grid: dict[str, list[float]] = field(default_factory=dict)
    train_epochs: int = 30
    eval_epochs: int = 30
    replicates: int = 32
    methods: tuple[str, ...] = METHODS
    out: Path | None = None
    workers: int = 1
    raw: dict = field(default_factory=dict)

    def load_env(self) -> EnvSpec:
        try:
            return load_maze(self.maze)
        except FileNotFoundError as exc:
            raise ConfigError("maze", f"file not found: {self.maze}") from exc
        except MazeFormatError as exc:
            raise ConfigError("maze", str(exc)) from exc


def _num(data: dict, key: str, cast: Callable, default: Any, *, positive: bool = False) -> Any:
    if key not in data or data[key] is None:
        return default
    try:
        value = cast(data[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(key, f"expected {cast.__name__}, got {data[key]!r}") from exc
    if positive and value <= 0:
        raise ConfigError(key, "must be positive")
    return value


def _axis(name: str, value: Any) -> list[float]:
    if isinstance(value, dict):
        try:
            return list(linspace_axis(float(value["start"]), float(value["stop"]), int(value["num"])))
        except KeyError as exc:
            raise ConfigError(f"grid.{name}", f"range needs start/stop/num, missing {exc}") from exc
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    return [float(value)]


def config_from_dict(data: dict, base_dir: Path | None = None) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "config must be a mapping")
    kind = data.get("experiment")
    if kind not in KINDS:
        raise ConfigError("experiment", f"must be one of {', '.join(KINDS)}, got {kind!r}")
    if "maze" not in data:
        raise ConfigError("maze", "missing")
    maze = Path(data["maze"])
    if base_dir is not None and not maze.is_absolute():
        maze = base_dir / maze
    agent = data.get("agent") or {}
    budget = data.get("budget") or {}
    tester = data.get("tester") or {}
    master_seed = _num(data, "master_seed", int, 0)
    seeds_field = data.get("seeds", 1)
    if isinstance(seeds_field, list):
        seeds = [int(s) for s in seeds_field]
    else:
        count = _num(data, "seeds", int, 1, positive=True)
        seeds = derive_seeds(master_seed, count)
    cfg = ExperimentConfig(
        kind=kind,
        maze=maze,
        seeds=seeds,
        master_seed=master_seed,
        gamma=_num(agent, "gamma", float, 0.0),
        eta=_num(agent, "eta", float, 1.0),
        replay_count=_num(agent, "replay_count", int, 10),
        total_steps=_num(budget, "total_steps", int, None, positive=True),
        explore_fraction=_num(budget, "explore_fraction", float, None),
        c_stop=_num(budget, "c_stop", float, 30.0, positive=True),
        c_dh=_num(budget, "c_dh", float, 22.5, positive=True),
        tested_epochs=_num(tester, "tested_epochs", int, 200),
        train_epochs=_num(data, "train_epochs", int, 30),
        eval_epochs=_num(data, "eval_epochs", int, 30, positive=True),
        replicates=_num(data, "replicates", int, 32, positive=True),
        workers=_num(data, "workers", int, 1, positive=True),
        raw=data,
    )
    for name in ("gamma", "eta"):
        if not 0.0 <= getattr(cfg, name) <= 1.0:
            raise ConfigError(f"agent.{name}", "must lie in [0, 1]")
    if cfg.tested_epochs < 0:
        raise ConfigError("tester.tested_epochs", "must be non-negative")
    if kind == "metalearn":
        grid = data.get("grid")
        if not isinstance(grid, dict) or not grid:
            raise ConfigError("grid", "metalearn needs a grid mapping of gamma/eta axes")
        cfg.grid = {name: _axis(name, v) for name, v in grid.items()}
        methods = data.get("methods", list(METHODS))
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise ConfigError("methods", f"unknown method(s) {bad}")
        cfg.methods = tuple(methods)
        try:
            MetaParamGrid.from_dict(cfg.grid)
        except ValueError as exc:
            raise ConfigError("grid", str(exc)) from exc
    if "out" in data and data["out"] is not None:
        cfg.out = Path(data["out"])
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError as exc:
        raise ConfigError("config", f"file not found: {path}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError("config", f"not valid YAML: {exc}") from exc
    return config_from_dict(data, base_dir=path.parent)


@dataclass
class Report:
    tables: dict[str, tuple[Sequence[str], list[list[Any]]]]
    summary: dict
    config: dict
    lines: list[str] = field(default_factory=list)

    def csv_text(self, name: str) -> str:
        header, rows = self.tables[name]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([[_cell(v) for v in row] for row in rows])
        return buf.getvalue()

    def write(self, out: Path) -> None:
        out.mkdir(parents=True, exist_ok=True)
        for name in self.tables:
            (out / f"{name}.csv").write_text(self.csv_text(name))
        (out / "summary.json").write_text(json.dumps(self.summary, indent=2, sort_keys=True) + "\n")
        (out / "config.yaml").write_text(yaml.safe_dump(self.config, sort_keys=True))


def _cell(v: Any) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list)):
        return "".join(map(str, v))
    return str(v)


def _mean_se(values: Iterable[float]) -> tuple[float, float]:
    x = np.asarray(list(values), dtype=float)
    if x.size == 0:
        return 0.0, 0.0
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


def _map(fn: Callable, items: list, workers: int) -> list:
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def run_verify_oracle(cfg: ExperimentConfig, spec: EnvSpec) -> Report:
    try:
        ok, problems = verify_equivalence(spec)
    except OracleConstructionError as exc:
        raise VerificationFailure(f"construction failed on {exc}") from exc
    oracle = oracularize(spec)
    ledger = QueryLedger(M=spec.M)
    oracle(uniform_state(spec.N), ledger)
    direct = np.where(spec.reward_mask, -1, 1)
    rows = [[",".join(r.branch), r.phase, int(d), int(r.restored)] for r, d in zip(oracle.records, direct)]
    agree = sum(1 for r, d in zip(oracle.records, direct) if r.phase == d and r.restored)
    verdict = "EQUIVALENT" if ok else "NOT EQUIVALENT"
    headline = f"{verdict}, {agree}/{spec.N} branches, 2M={2 * spec.M} steps/call"
    lines = [f"{row[0]}\t{row[1]:+d}" for row in rows]
    lines += problems
    lines.append(headline)
    lines.append(f"ledger: oracle_calls={ledger.oracle_calls} interaction_steps={ledger.interaction_steps}")
    summary = {
        "verdict": verdict,
        "branches": spec.N,
        "agreeing_branches": agree,
        "steps_per_call": 2 * spec.M,
        "k": spec.k,
        "oracle_calls": ledger.oracle_calls,
        "interaction_steps": ledger.interaction_steps,
    }
    report = Report({"branches": (("branch", "phase", "direct_phase", "restored"), rows)}, summary, {}, lines)
    if not ok:
        report.summary["failing_branches"] = problems
        raise VerificationFailure("; ".join(problems))
    return report


@dataclass(frozen=True)
class _ExploreJob:
    maze: str
    budget: int
    seed: int
    c_stop: float


def _explore_one(job: _ExploreJob) -> list[Any]:
    spec = load_maze(job.maze)
    hybrid = HybridAgent(PSAgent(), job.budget, ledger=QueryLedger(M=spec.M))
    explore(hybrid, spec, stream(job.seed, QUANTUM_STREAM), c_stop=job.c_stop)
    seq = ",".join(hybrid.found[0][0]) if hybrid.found else ""
    return [job.seed, int(bool(hybrid.found)), seq, hybrid.ledger.oracle_calls, hybrid.ledger.interaction_steps]


def run_explore(cfg: ExperimentConfig, spec: EnvSpec) -> Report:
    budget = cfg.total_steps or 2 * spec.M * math.ceil(8 * math.sqrt(spec.N))
    jobs = [_ExploreJob(str(cfg.maze), budget, s, cfg.c_stop) for s in cfg.seeds]
    rows = _map(_explore_one, jobs, cfg.workers)
    found = [r[1] for r in rows]
    calls_mean, calls_se = _mean_se(r[3] for r in rows)
    summary = {
        "budget_steps": budget,
        "runs": len(rows),
        "found_rate": float(np.mean(found)) if rows else 0.0,
        "oracle_calls_mean": calls_mean,
        "oracle_calls_se": calls_se,
        "interaction_steps_total": int(sum(r[4] for r in rows)),
        "N": spec.N,
        "k": spec.k,
    }
    header = ("seed", "found", "sequence", "oracle_calls", "interaction_steps")
    lines = [f"found {sum(found)}/{len(rows)} within {budget} steps; mean oracle calls {calls_mean:.2f}"]
    return Report({"explore": (header, rows)}, summary, {}, lines)


@dataclass(frozen=True)
class _LearnJob:
    maze: str
    gamma: float
    eta: float
    total_steps: int
    tested_epochs: int
    seed: int
    replay_count: int
    explore_fraction: float | None
    c_stop: float


def _learn_one(job: _LearnJob) -> list[ArmResult]:
    spec = load_maze(job.maze)
    agent = PSAgent(job.gamma, job.eta, spec.actions)
    classical = run_classical(agent, spec, job.total_steps, job.tested_epochs, job.seed)
    hybrid = run_hybrid(agent, spec, job.total_steps, job.tested_epochs, job.seed,
                        replay_count=job.replay_count, explore_fraction=job.explore_fraction,
                        c_stop=job.c_stop)
    for arm in (classical, hybrid):
        QueryLedger(spec.M, arm.oracle_calls, arm.classical_epochs, arm.interaction_steps).check()
        if arm.interaction_steps > job.total_steps:
            raise VerificationFailure(f"seed {job.seed} {arm.arm} arm overspent its budget")
    return [classical, hybrid]


def run_learn(cfg: ExperimentConfig, spec: EnvSpec) -> Report:
    total = cfg.total_steps or matched_budget(spec, cfg.tested_epochs)
    jobs = [
        _LearnJob(str(cfg.maze), cfg.gamma, cfg.eta, total, cfg.tested_epochs, s,
                  cfg.replay_count, cfg.explore_fraction, cfg.c_stop)
        for s in cfg.seeds
    ]
    results = [arm for pair in _map(_learn_one, jobs, cfg.workers) for arm in pair]
    rows = [[r.seed, r.arm, r.merit, r.oracle_calls, r.interaction_steps] for r in results]
    summary: dict[str, Any] = {"total_steps": total, "tested_epochs": cfg.tested_epochs, "N": spec.N, "k": spec.k}
    lines = []
    for arm in ("classical", "hybrid"):
        arm_rows = [r for r in results if r.arm == arm]
        mean, se = _mean_se(r.merit for r in arm_rows)
        summary[arm] = {
            "merit_mean": mean,
            "merit_se": se,
            "merit_ci95": [mean - 1.96 * se, mean + 1.96 * se],
            "first_reward_rate": float(np.mean([r.first_reward for r in arm_rows])) if arm_rows else 0.0,
            "oracle_calls_total": int(sum(r.oracle_calls for r in arm_rows)),
            "interaction_steps_total": int(sum(r.interaction_steps for r in arm_rows)),
        }
        lines.append(f"{arm:9s} merit {mean:.4f} +- {1.96 * se:.4f}")
    header = ("seed", "arm", "merit", "oracle_calls", "interaction_steps")
    return Report({"learn": (header, rows)}, summary, {}, lines)


def run_metalearn(cfg: ExperimentConfig, spec: EnvSpec) -> Report:
    grid = MetaParamGrid.from_dict(cfg.grid)
    seeds = SeedPolicy(cfg.master_seed, cfg.replicates)
    table = EvalTable.for_grid(grid, spec, cfg.train_epochs, cfg.eval_epochs, seeds)
    rows: list[list[Any]] = []
    summary: dict[str, Any] = {"grid_shape": list(grid.shape), "N_meta": len(grid), "provenance": table.provenance}
    lines = []
    if "grid" in cfg.methods:
        idx, queries = grid_search(table)
        rows.append(["", "grid", idx, table[idx], queries, 0])
    if "unimodal" in cfg.methods:
        try:
            single_axis(grid)
        except ValueError as exc:
            raise ConfigError("grid", str(exc)) from exc
        res = unimodal_search(table)
        rows.append(["", "unimodal", res.index, table[res.index], res.queries, 0])
    values = table.values()
    if "quantum" in cfg.methods:
        best = float(values.max())
        hits = 0
        for s in cfg.seeds:
            ext = quantum_meta_opt(table, np.random.default_rng([s, QUANTUM_STREAM]), c_dh=cfg.c_dh)
            rows.append([s, "quantum", ext.index, table[ext.index], len(table), ext.ledger.oracle_calls])
            hits += table[ext.index] == best
        summary["quantum_argmax_rate"] = hits / len(cfg.seeds) if cfg.seeds else 0.0
    try:
        single_axis(grid)
        summary["unimodal_audit"] = is_unimodal(values)
    except ValueError:
        summary["unimodal_audit"] = None
    for method in ("grid", "unimodal"):
        for r in rows:
            if r[1] == method:
                summary[method] = {"best_k": r[2], "best_eval": r[3], "queries": r[4]}
                lines.append(f"{method:8s} best_k={r[2]} eval={r[3]:.4f} queries={r[4]}")
    if "quantum" in cfg.methods:
        lines.append(f"quantum  argmax rate {summary['quantum_argmax_rate']:.3f} over {len(cfg.seeds)} seeds")
    names = [name for name, _ in grid.axes]
    eval_rows = []
    for i in range(len(grid)):
        k = grid.config(i)
        eval_rows.append([i, k["gamma"], k["eta"], float(values[i]), eval_bin(float(values[i]))])
    tables = {
        "metalearn": (("seed", "method", "best_k", "best_eval", "queries", "oracle_calls"), rows),
        "eval_table": (("k", "gamma", "eta", "eval", "eval_bin"), eval_rows),
    }
    summary["axes"] = names
    return Report(tables, summary, {}, lines)


RUNNERS = {
    "verify-oracle": run_verify_oracle,
    "explore": run_explore,
    "learn": run_learn,
    "metalearn": run_metalearn,
}


def config_echo(cfg: ExperimentConfig) -> dict:
    echo = {
        "experiment": cfg.kind,
        "maze": str(cfg.maze),
        "master_seed": cfg.master_seed,
        "seeds": list(cfg.seeds),
        "agent": {"gamma": cfg.gamma, "eta": cfg.eta, "replay_count": cfg.replay_count},
        "budget": {"total_steps": cfg.total_steps, "explore_fraction": cfg.explore_fraction,
                   "c_stop": cfg.c_stop, "c_dh": cfg.c_dh},
        "tester": {"tested_epochs": cfg.tested_epochs},
        "workers": cfg.workers,
    }
    if cfg.kind == "metalearn":
        echo.update(grid=cfg.grid, methods=list(cfg.methods), train_epochs=cfg.train_epochs,
                    eval_epochs=cfg.eval_epochs, replicates=cfg.replicates)
    if cfg.raw:
        echo["source"] = cfg.raw
    return echo


def run(cfg: ExperimentConfig) -> Report:
    spec = cfg.load_env()
    report = RUNNERS[cfg.kind](cfg, spec)
    report.config = config_echo(cfg)
    report.lines.insert(0, f"{spec.name}: N={spec.N} k={spec.k} k/N={spec.k / spec.N:.6g}")
    if cfg.out is not None:
        report.write(cfg.out)
    return report
