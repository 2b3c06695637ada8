"""Command-line harness.

Subcommands
-----------
static          fixed-topology sweep over station counts and agents
dynamic         station ramp (5 -> 50 by default) per round
lookup-build    derive the best-fixed-CW table with simulator sweeps
validate-oracle compare simulated and analytic saturation throughput
grad-check      verify network gradients against finite differences

A flat ``key=value`` config file (via --config) overrides the built-in
defaults; command-line flags override both. Results land in --out as CSV
files plus rendered PNG figures (disable with --no-figures).
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

import numpy as np

from . import figures
from .bianchi import (
    DcfModelInput,
    build_lookup_table,
    read_lookup_csv,
    saturation_throughput,
    write_lookup_csv,
)
from .controller import AgentKind
from .experiments import (
    DYNAMIC_RANGE,
    STATIC_N_VALUES,
    RunSettings,
    parse_seeds,
    run_dynamic,
    run_static_sweep,
    write_dynamic_products,
    write_static_products,
    emit_csv,
)
from .medium import AccessMode, ConfigurationError, Medium, MediumConfig
from .nn import gradient_check

ORACLE_GRID_N = (5, 10, 20, 30, 50)
ORACLE_GRID_CW = (15, 63, 255)

_SETTING_TYPES = {f.name: f.type for f in dataclasses.fields(RunSettings)}


def load_config_file(path) -> dict:
    """Parse ``key=value`` lines; '#' starts a comment, blanks are skipped."""
    values = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _SETTING_TYPES:
            raise ConfigurationError(f"{path}:{lineno}: unknown setting {key!r}")
        values[key] = value.strip()
    return values


def build_settings(args) -> RunSettings:
    overrides = {}
    if getattr(args, "config", None):
        overrides.update(load_config_file(args.config))
    if getattr(args, "rounds", None) is not None:
        overrides["rounds_total"] = args.rounds
        overrides.setdefault("learning_rounds", max(args.rounds - 1, 0))
    if getattr(args, "round_duration", None) is not None:
        overrides["round_duration_s"] = args.round_duration
    if getattr(args, "interaction_ms", None) is not None:
        overrides["interaction_period_ms"] = args.interaction_ms
    typed = {}
    for key, value in overrides.items():
        caster = {"int": int, "float": float}.get(str(_SETTING_TYPES[key]), float)
        typed[key] = caster(value)
    return RunSettings(**typed)


def _agents(args) -> list[AgentKind]:
    return [AgentKind(a.strip()) for a in args.agent.split(",") if a.strip()]


def _load_table(args, agents, settings, n_values) -> dict[int, int] | None:
    if AgentKind.LOOKUP not in agents:
        return None
    if args.lookup_table:
        return read_lookup_csv(args.lookup_table)
    print("building look-up table (no --lookup-table given)...", flush=True)
    return build_lookup_table(n_values, settings.medium_config(max(n_values)),
                              duration_us=settings.round_duration_s * 1e6)


def cmd_static(args) -> int:
    settings = build_settings(args)
    agents = _agents(args)
    n_values = [int(n) for n in args.n.split(",")] if args.n else list(STATIC_N_VALUES)
    seeds = parse_seeds(args.seeds)
    table = _load_table(args, agents, settings, n_values)
    t0 = time.time()
    sweep = run_static_sweep(n_values, agents, settings, seeds, lookup_table=table,
                             processes=args.processes)
    paths = write_static_products(sweep, args.out)
    if args.figures:
        figures.render_static(args.out)
    for (agent, n), thr in sorted(sweep.throughput.items()):
        print(f"static agent={agent:6s} n={n:3d}  mean operational throughput "
              f"{thr:7.3f} Mb/s")
    print(f"wrote {paths['summary']} and {paths['rounds']} in {time.time()-t0:.1f}s")
    return 0


def cmd_dynamic(args) -> int:
    settings = build_settings(args)
    agents = _agents(args)
    seeds = parse_seeds(args.seeds)
    n_range = (args.n_start, args.n_end)
    table = _load_table(args, agents, settings, list(range(n_range[0], n_range[1] + 1, 5)))
    t0 = time.time()
    dyn = run_dynamic(agents, settings, seeds, lookup_table=table, n_range=n_range,
                      processes=args.processes)
    paths = write_dynamic_products(dyn, args.out)
    if args.figures:
        figures.render_dynamic(args.out, period_s=settings.interaction_period_ms / 1000.0)
    for (agent, n), thr in sorted(dyn.segment_throughput.items()):
        print(f"dynamic agent={agent:6s} n={n:3d}  mean throughput {thr:7.3f} Mb/s")
    print(f"wrote {', '.join(str(p) for p in paths.values())} in {time.time()-t0:.1f}s")
    return 0


def cmd_lookup_build(args) -> int:
    settings = build_settings(args)
    n_values = [int(n) for n in args.n.split(",")] if args.n else list(STATIC_N_VALUES)
    t0 = time.time()
    table = build_lookup_table(n_values, settings.medium_config(max(n_values)),
                               duration_us=args.duration * 1e6, seed=args.seed)
    write_lookup_csv(table, args.out)
    for n in sorted(table):
        print(f"n={n:3d} -> cw={table[n]}")
    print(f"wrote {args.out} in {time.time()-t0:.1f}s")
    return 0


def cmd_validate_oracle(args) -> int:
    settings = build_settings(args)
    rows = []
    worst = 0.0
    t0 = time.time()
    for n in ORACLE_GRID_N:
        cfg = settings.medium_config(n)
        for cw in ORACLE_GRID_CW:
            medium = Medium(cfg, mode=AccessMode.FIXED_CW, cw=cw,
                            rng=np.random.default_rng([args.seed, n, cw]))
            counters = medium.run_period(args.duration * 1e6)
            sim = medium.throughput_bps(counters)
            model = saturation_throughput(DcfModelInput(n=n, cw=cw, timing=cfg))
            err = abs(sim - model) / model
            worst = max(worst, err)
            status = "ok" if err <= args.tolerance else "FAIL"
            rows.append((n, cw, sim / 1e6, model / 1e6, err, status))
            print(f"n={n:3d} cw={cw:4d}  sim={sim/1e6:7.3f}  model={model/1e6:7.3f} "
                  f"Mb/s  err={err*100:5.2f}%  {status}")
    if args.out:
        emit_csv(rows, args.out,
                 ["n", "cw", "sim_mbps", "model_mbps", "rel_error", "status"])
    print(f"worst error {worst*100:.2f}% over {len(rows)} points "
          f"in {time.time()-t0:.1f}s (tolerance {args.tolerance*100:.0f}%)")
    return 0 if worst <= args.tolerance else 1


def cmd_grad_check(args) -> int:
    t0 = time.time()
    err_q = gradient_check(args.trials, head_dim=7, seed=args.seed)
    err_ac = gradient_check(args.trials, head_dim=1, extra_dim=1, seed=args.seed + 1)
    worst = max(err_q, err_ac)
    print(f"q-network max relative error: {err_q:.3e}")
    print(f"critic    max relative error: {err_ac:.3e}")
    print(f"threshold 1e-4; elapsed {time.time()-t0:.1f}s")
    return 0 if worst < 1e-4 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccod", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, agents=True):
        p.add_argument("--config", help="key=value settings file")
        p.add_argument("--out", default="results", help="output directory/file")
        p.add_argument("--seeds", default="5",
                       help="seed count ('5' -> 0..4) or explicit list '1,2,7'")
        p.add_argument("--rounds", type=int, help="total rounds per experiment")
        p.add_argument("--round-duration", type=float, dest="round_duration",
                       help="round length in seconds")
        p.add_argument("--interaction-ms", type=float, dest="interaction_ms",
                       help="interaction period in milliseconds")
        p.add_argument("--processes", type=int, default=None,
                       help="parallel worker processes (default: cpu count)")
        p.add_argument("--figures", action=argparse.BooleanOptionalAction, default=True,
                       help="render PNG figures next to the CSV output")
        if agents:
            p.add_argument("--agent", default="legacy,lookup,dqn,ddpg",
                           help="comma list of: legacy, lookup, dqn, ddpg")
            p.add_argument("--lookup-table", dest="lookup_table",
                           help="CSV produced by lookup-build (n,cw)")

    p_static = sub.add_parser("static", help="fixed-topology sweep")
    common(p_static)
    p_static.add_argument("--n", help="comma list of station counts (default 5..50 by 5)")
    p_static.set_defaults(func=cmd_static)

    p_dyn = sub.add_parser("dynamic", help="station ramp within each round")
    common(p_dyn)
    p_dyn.add_argument("--n-start", type=int, default=DYNAMIC_RANGE[0])
    p_dyn.add_argument("--n-end", type=int, default=DYNAMIC_RANGE[1])
    p_dyn.set_defaults(func=cmd_dynamic)

    p_lut = sub.add_parser("lookup-build", help="build the best fixed-CW table")
    p_lut.add_argument("--config", help="key=value settings file")
    p_lut.add_argument("--n", help="comma list of station counts (default 5..50 by 5)")
    p_lut.add_argument("--out", default="lookup_table.csv")
    p_lut.add_argument("--duration", type=float, default=60.0,
                       help="sweep simulation length per point, seconds")
    p_lut.add_argument("--seed", type=int, default=0)
    p_lut.set_defaults(func=cmd_lookup_build)

    p_val = sub.add_parser("validate-oracle", help="simulator vs analytic model")
    p_val.add_argument("--config", help="key=value settings file")
    p_val.add_argument("--duration", type=float, default=60.0)
    p_val.add_argument("--tolerance", type=float, default=0.03)
    p_val.add_argument("--seed", type=int, default=0)
    p_val.add_argument("--out", help="optional CSV of the comparison grid")
    p_val.set_defaults(func=cmd_validate_oracle)

    p_grad = sub.add_parser("grad-check", help="finite-difference gradient check")
    p_grad.add_argument("--trials", type=int, default=10)
    p_grad.add_argument("--seed", type=int, default=0)
    p_grad.set_defaults(func=cmd_grad_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
