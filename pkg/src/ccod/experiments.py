"""Experiment harness: static and dynamic topology studies over many seeds.

Each scenario runs one controller experiment per (agent, seed), optionally in
parallel across processes (experiments are fully independent), then reduces
the results into trace and summary CSV files with 95% confidence intervals
over seeds. Row order and float formatting are fixed, so identical inputs
produce byte-identical files.
"""

from __future__ import annotations

import csv
import math
import multiprocessing
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .controller import (
    AgentKind,
    ControllerConfig,
    ExperimentResult,
    run_experiment,
)
from .medium import ConfigurationError, MediumConfig, default_success_duration_us
from .pipeline import HISTORY_LENGTH

STATIC_N_VALUES = tuple(range(5, 51, 5))
DYNAMIC_RANGE = (5, 50)


@dataclass(frozen=True)
class RunSettings:
    """Flat experiment settings; mirrors the key=value config file."""

    interaction_period_ms: float = 10.0
    round_duration_s: float = 60.0
    rounds_total: int = 15
    learning_rounds: int = 14
    history_length: int = HISTORY_LENGTH
    gamma: float = 0.7
    batch_size: int = 32
    replay_buffer_size: int = 18_000
    soft_update_tau: float = 4e-3
    dqn_lr: float = 4e-4
    ddpg_actor_lr: float = 4e-4
    ddpg_critic_lr: float = 4e-3
    epsilon_initial: float = 1.0
    epsilon_final: float = 0.001
    sigma_initial: float = 0.4
    sigma_final: float = 0.001
    slot_us: float = 9.0
    t_success_us: float = default_success_duration_us()
    t_collision_us: float = default_success_duration_us() + 30.0
    payload_bits: int = 12_000
    baseline_rounds: int = 1   # untrained agents are stationary; one round suffices

    def medium_config(self, n_stations: int) -> MediumConfig:
        return MediumConfig(n_stations=n_stations, slot_us=self.slot_us,
                            t_success_us=self.t_success_us,
                            t_collision_us=self.t_collision_us,
                            payload_bits=self.payload_bits)

    def controller_config(self, agent: AgentKind, n_stations: int, seed: int, *,
                          ramp: tuple[int, int] | None = None,
                          lookup_table: dict[int, int] | None = None) -> ControllerConfig:
        agent = AgentKind(agent)
        rounds = self.rounds_total if agent.trainable else self.baseline_rounds
        learning = self.learning_rounds if agent.trainable else 0
        return ControllerConfig(
            agent=agent,
            medium=self.medium_config(n_stations),
            seed=seed,
            interaction_period_us=self.interaction_period_ms * 1000.0,
            round_duration_us=self.round_duration_s * 1e6,
            rounds_total=rounds,
            learning_rounds=learning,
            history_length=self.history_length,
            gamma=self.gamma,
            batch_size=self.batch_size,
            replay_capacity=self.replay_buffer_size,
            soft_update_tau=self.soft_update_tau,
            dqn_lr=self.dqn_lr,
            ddpg_actor_lr=self.ddpg_actor_lr,
            ddpg_critic_lr=self.ddpg_critic_lr,
            epsilon_range=(self.epsilon_initial, self.epsilon_final),
            sigma_range=(self.sigma_initial, self.sigma_final),
            ramp=ramp,
            lookup_table=lookup_table,
        )


class ResultRow(NamedTuple):
    """One per-interaction trace record of the delimited output."""

    scenario: str
    agent: str
    seed: int
    round: int
    interaction: int
    n_stations: int
    cw: float
    p_col: float
    throughput_mbps: float


TRACE_HEADER = list(ResultRow._fields)
SUMMARY_HEADER = ["scenario", "agent", "n_stations", "mean_throughput_mbps",
                  "ci95_mbps", "seeds"]
ROUNDS_HEADER = ["scenario", "agent", "n_stations", "seed", "round",
                 "mean_throughput_mbps", "mean_cw", "mean_p_col"]


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def emit_csv(rows: Iterable[tuple], path, header: list[str] | None = None) -> Path:
    """Write rows as UTF-8 CSV in deterministic order.

    Trace rows sort by (scenario, agent, seed, round, interaction); rows of
    other schemas are written in the (already deterministic) given order.
    An empty input yields a header-only file.
    """
    rows = list(rows)
    if header is None:
        header = TRACE_HEADER
    if rows and isinstance(rows[0], ResultRow):
        rows.sort(key=lambda r: (r.scenario, r.agent, r.seed, r.round, r.interaction))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def read_csv_rows(path) -> list[dict]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def mean_ci95(values) -> tuple[float, float]:
    """Sample mean and half-width of the 95% interval (1.96 * sem)."""
    arr = np.asarray(list(values), dtype=float)
    if arr.size <= 1:
        return float(arr.mean()) if arr.size else 0.0, 0.0
    sem = arr.std(ddof=1) / math.sqrt(arr.size)
    return float(arr.mean()), float(1.96 * sem)


def run_many(configs: list[ControllerConfig], processes: int | None = None) -> list[ExperimentResult]:
    """Run independent experiments, in input order, forking when it helps."""
    if processes is None:
        processes = min(os.cpu_count() or 1, len(configs))
    if processes <= 1 or len(configs) <= 1:
        return [run_experiment(c) for c in configs]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=min(processes, len(configs))) as pool:
        return pool.map(run_experiment, configs)


def trace_rows(scenario: str, result: ExperimentResult,
               rounds: Iterable[int] | None = None) -> list[ResultRow]:
    """Flatten an experiment trace (optionally only some rounds) into rows."""
    keep = None if rounds is None else set(rounds)
    out = []
    tr = result.trace
    for i in range(len(tr)):
        if keep is not None and tr.round_index[i] not in keep:
            continue
        out.append(ResultRow(scenario, result.agent.value, result.seed,
                             tr.round_index[i], tr.interaction[i], tr.n_stations[i],
                             tr.cw[i], tr.p_col[i], tr.throughput_mbps[i]))
    return out


def rounds_rows(scenario: str, n_stations: int, result: ExperimentResult) -> list[tuple]:
    return [(scenario, result.agent.value, n_stations, result.seed, r.round_index,
             _f6(r.mean_throughput_mbps), _f6(r.mean_cw), _f6(r.mean_p_col))
            for r in result.rounds]


def _f6(x: float) -> float:
    # pre-round to the emitted precision so in-memory and CSV views agree
    return float(f"{x:.6f}")


@dataclass
class StaticSweepResult:
    summary: list[tuple]          # SUMMARY_HEADER schema
    rounds: list[tuple]           # ROUNDS_HEADER schema
    throughput: dict[tuple[str, int], float]   # (agent, n) -> mean op throughput
    results: dict[tuple[str, int, int], ExperimentResult]


def run_static_sweep(n_values, agents, settings: RunSettings, seeds,
                     lookup_table: dict[int, int] | None = None,
                     processes: int | None = None) -> StaticSweepResult:
    """Fixed-topology study: per (agent, n), mean operational throughput
    with a 95% confidence interval over seeds."""
    agents = [AgentKind(a) for a in agents]
    n_values = sorted(set(int(n) for n in n_values))
    seeds = list(seeds)
    if AgentKind.LOOKUP in agents:
        if lookup_table is None:
            raise ConfigurationError("static sweep with the lookup agent needs a table")
        for n in n_values:
            if not any(k <= n for k in lookup_table):
                raise ConfigurationError(f"look-up table has no entry usable for n={n}")

    jobs, keys = [], []
    for agent in agents:
        for n in n_values:
            for seed in seeds:
                jobs.append(settings.controller_config(agent, n, seed,
                                                       lookup_table=lookup_table))
                keys.append((agent.value, n, seed))
    results = run_many(jobs, processes)

    by_key = dict(zip(keys, results))
    summary, rounds, throughput = [], [], {}
    for agent in agents:
        for n in n_values:
            per_seed = [by_key[(agent.value, n, s)].operational_throughput() for s in seeds]
            mean, ci = mean_ci95(per_seed)
            summary.append(("static", agent.value, n, _f6(mean), _f6(ci), len(seeds)))
            throughput[(agent.value, n)] = mean
            for s in seeds:
                rounds.extend(rounds_rows("static", n, by_key[(agent.value, n, s)]))
    return StaticSweepResult(summary, rounds, throughput, by_key)


@dataclass
class DynamicResult:
    trace: list[ResultRow]        # operational-round interactions
    rounds: list[tuple]
    summary: list[tuple]          # per station-count segment means
    segment_throughput: dict[tuple[str, int], float]
    results: dict[tuple[str, int], ExperimentResult]


def run_dynamic(agents, settings: RunSettings, seeds,
                lookup_table: dict[int, int] | None = None,
                n_range: tuple[int, int] = DYNAMIC_RANGE,
                processes: int | None = None) -> DynamicResult:
    """Ramp study: station count climbs n_start -> n_end within every round.

    Emits the operational-round per-interaction trace and, per agent and
    station count, the mean instantaneous throughput over seeds.
    """
    agents = [AgentKind(a) for a in agents]
    seeds = list(seeds)
    if AgentKind.LOOKUP in agents and lookup_table is None:
        raise ConfigurationError("dynamic run with the lookup agent needs a table")

    jobs, keys = [], []
    for agent in agents:
        for seed in seeds:
            jobs.append(settings.controller_config(agent, n_range[0], seed,
                                                   ramp=n_range, lookup_table=lookup_table))
            keys.append((agent.value, seed))
    results = run_many(jobs, processes)
    by_key = dict(zip(keys, results))

    trace, rounds = [], []
    segment_values: dict[tuple[str, int], list[float]] = {}
    for (agent, seed), result in by_key.items():
        op_round = result.rounds[-1].round_index
        rows = trace_rows("dynamic", result, rounds=[op_round])
        trace.extend(rows)
        rounds.extend(rounds_rows("dynamic", n_range[1], result))
        by_n: dict[int, list[float]] = {}
        for row in rows:
            by_n.setdefault(row.n_stations, []).append(row.throughput_mbps)
        for n, vals in by_n.items():
            segment_values.setdefault((agent, n), []).append(float(np.mean(vals)))

    summary, segment_throughput = [], {}
    for (agent, n) in sorted(segment_values):
        mean, ci = mean_ci95(segment_values[(agent, n)])
        summary.append(("dynamic", agent, n, _f6(mean), _f6(ci), len(seeds)))
        segment_throughput[(agent, n)] = mean
    return DynamicResult(trace, rounds, summary, segment_throughput, by_key)


def write_static_products(sweep: StaticSweepResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    return {
        "summary": emit_csv(sweep.summary, out / "static_summary.csv", SUMMARY_HEADER),
        "rounds": emit_csv(sweep.rounds, out / "static_rounds.csv", ROUNDS_HEADER),
    }


def write_dynamic_products(dyn: DynamicResult, out_dir) -> dict[str, Path]:
    out = Path(out_dir)
    return {
        "trace": emit_csv(dyn.trace, out / "dynamic_trace.csv", TRACE_HEADER),
        "rounds": emit_csv(dyn.rounds, out / "dynamic_rounds.csv", ROUNDS_HEADER),
        "summary": emit_csv(dyn.summary, out / "dynamic_summary.csv", SUMMARY_HEADER),
    }


def parse_seeds(spec) -> list[int]:
    """Seed list from an int count ('5' -> 0..4) or explicit '1,2,7' list."""
    if isinstance(spec, int):
        return list(range(spec))
    text = str(spec)
    if "," in text:
        return [int(s) for s in text.split(",") if s.strip()]
    return list(range(int(text)))


__all__ = [
    "DYNAMIC_RANGE",
    "DynamicResult",
    "ResultRow",
    "ROUNDS_HEADER",
    "RunSettings",
    "STATIC_N_VALUES",
    "SUMMARY_HEADER",
    "StaticSweepResult",
    "TRACE_HEADER",
    "emit_csv",
    "mean_ci95",
    "parse_seeds",
    "read_csv_rows",
    "run_dynamic",
    "run_many",
    "run_static_sweep",
    "trace_rows",
    "write_dynamic_products",
    "write_static_products",
]
