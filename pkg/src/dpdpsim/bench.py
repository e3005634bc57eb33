"""Benchmark harness: run policies over seed batches and tabulate results.

A benchmark names a scenario source (a saved scenario file, or a synthetic
preset regenerated per seed), a policy, and a list of seeds.  Each
(scenario, seed) pair yields one table row with the episode objective,
completion rate, and wall time; mean and standard deviation rows close the
table.  Objective and completion columns are reproducible bit for bit given
the same seeds; only timing varies between runs.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import generate, sim
from .core import Scenario
from .priors import PriorConfig, PriorPolicy
from .solvers.anneal import SAParams
from .solvers.exact import ExactLimits
from .solvers.genetic import GAParams
from .solvers.nearest import NearestPolicy
from .solvers.rolling import RollingHorizonConfig, RollingHorizonPolicy, config_for

POLICY_NAMES = ("nearest", "prior", "sa-rh", "ga-rh", "exact-rh")

COLUMNS = ("scenario", "seed", "policy", "obj", "comp", "seconds", "status")


@dataclass
class BenchConfig:
    policy: str
    seeds: list[int]
    preset: str | None = None
    scenario_path: str | None = None
    output: str | None = None
    jobs: int = 1
    time_limit: float | None = None
    overrides: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.policy not in POLICY_NAMES:
            raise ValueError(
                f"unknown policy {self.policy!r}; choose from {', '.join(POLICY_NAMES)}"
            )
        if not self.seeds:
            raise ValueError("need at least one seed")
        if (self.preset is None) == (self.scenario_path is None):
            raise ValueError("give exactly one of preset or scenario file")


@dataclass
class ResultRow:
    scenario: str
    seed: int
    policy: str
    obj: float
    comp: float
    seconds: float
    status: str = "ok"


@dataclass
class ResultTable:
    rows: list[ResultRow]
    mean_obj: float
    mean_comp: float
    mean_seconds: float
    std_obj: float
    std_comp: float


def _float_override(overrides: dict[str, str], key: str, default: float) -> float:
    return float(overrides[key]) if key in overrides else default


def _int_override(overrides: dict[str, str], key: str, default: int) -> int:
    return int(overrides[key]) if key in overrides else default


def build_policy(name: str, scenario: Scenario, seed: int, overrides: dict[str, str]):
    """Instantiate one episode's policy, applying any config overrides."""
    if name == "nearest":
        return NearestPolicy()
    if name == "prior":
        cfg = PriorConfig(
            defer_weight=_float_override(overrides, "prior.defer_weight", 0.03),
            pickup_scale=_float_override(overrides, "prior.pickup_scale", 0.1),
        )
        return PriorPolicy(cfg)
    solver = {"sa-rh": "sa", "ga-rh": "ga", "exact-rh": "exact"}[name]
    base = config_for(scenario.name)
    rh = RollingHorizonConfig(
        horizon=_int_override(overrides, "rh.horizon", base.horizon),
        replan_interval=_int_override(overrides, "rh.replan", base.replan_interval),
    )
    sa = SAParams(
        initial_temp=_float_override(overrides, "sa.initial_temp", 1000.0),
        final_temp=_float_override(overrides, "sa.final_temp", 1.0),
        cooling=_float_override(overrides, "sa.cooling", 0.99),
        max_iters=_int_override(overrides, "sa.max_iters", 5000),
    )
    ga = GAParams(
        population=_int_override(overrides, "ga.population", 10),
        generations=_int_override(overrides, "ga.generations", 500),
        mutation_rate=_float_override(overrides, "ga.mutation_rate", 0.2),
        scale=float(overrides["ga.scale"]) if "ga.scale" in overrides else None,
    )
    return RollingHorizonPolicy(
        solver=solver,
        config=rh,
        sa_params=sa,
        ga_params=ga,
        exact_limits=ExactLimits(),
        seed=seed,
    )


def _scenario_for(config: BenchConfig, seed: int) -> Scenario:
    if config.preset is not None:
        return generate.generate_synthetic(config.preset, seed=seed)
    return generate.load_scenario(config.scenario_path)


def _run_one(args) -> ResultRow:
    config, seed = args
    scenario = _scenario_for(config, seed)
    policy = build_policy(config.policy, scenario, seed, config.overrides)
    start = time.perf_counter()
    summary = sim.run_episode(scenario, policy, seed=seed)
    elapsed = time.perf_counter() - start
    status = "ok"
    if config.time_limit is not None and elapsed > config.time_limit:
        status = "timeout"
    return ResultRow(
        scenario=scenario.name,
        seed=seed,
        policy=config.policy,
        obj=summary.objective,
        comp=summary.completion,
        seconds=elapsed,
        status=status,
    )


def run_benchmark(config: BenchConfig) -> ResultTable:
    """One row per seed, merged in seed order regardless of worker timing."""
    jobs = [(config, seed) for seed in config.seeds]
    if config.jobs > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            rows = list(pool.map(_run_one, jobs))
    else:
        rows = [_run_one(j) for j in jobs]
    rows.sort(key=lambda r: config.seeds.index(r.seed))

    objs = [r.obj for r in rows]
    comps = [r.comp for r in rows]
    secs = [r.seconds for r in rows]
    n = len(rows)
    mean_obj = sum(objs) / n
    mean_comp = sum(comps) / n
    std_obj = math.sqrt(sum((o - mean_obj) ** 2 for o in objs) / n)
    std_comp = math.sqrt(sum((c - mean_comp) ** 2 for c in comps) / n)
    return ResultTable(
        rows=rows,
        mean_obj=mean_obj,
        mean_comp=mean_comp,
        mean_seconds=sum(secs) / n,
        std_obj=std_obj,
        std_comp=std_comp,
    )


def _cells(row: ResultRow) -> list[str]:
    return [
        row.scenario,
        str(row.seed),
        row.policy,
        repr(row.obj),
        repr(row.comp),
        f"{row.seconds:.3f}",
        row.status,
    ]


def _aggregate_cells(table: ResultTable) -> list[list[str]]:
    policy = table.rows[0].policy if table.rows else ""
    return [
        [
            "all",
            "mean",
            policy,
            repr(table.mean_obj),
            repr(table.mean_comp),
            f"{table.mean_seconds:.3f}",
            "",
        ],
        ["all", "std", policy, repr(table.std_obj), repr(table.std_comp), "", ""],
    ]


def emit_table(table: ResultTable, fmt: str = "csv", path: str | None = None) -> str:
    """Render the table as csv or markdown; optionally write it to a file."""
    if not table.rows:
        raise ValueError("refusing to emit an empty result table")
    lines_of_cells = [list(COLUMNS)]
    lines_of_cells += [_cells(r) for r in table.rows]
    lines_of_cells += _aggregate_cells(table)

    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerows(lines_of_cells)
        text = buf.getvalue()
    elif fmt == "markdown":
        header, *body = lines_of_cells
        parts = ["| " + " | ".join(header) + " |"]
        parts.append("|" + "|".join(" --- " for _ in header) + "|")
        parts += ["| " + " | ".join(cells) + " |" for cells in body]
        text = "\n".join(parts) + "\n"
    else:
        raise ValueError(f"unknown table format {fmt!r}")

    if path is not None:
        Path(path).write_text(text)
    return text


def parse_config_file(path: str) -> dict[str, str]:
    """key=value lines; blank lines and # comments ignored."""
    overrides: dict[str, str] = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, value = line.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides
