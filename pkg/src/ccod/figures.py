"""Render the experiment CSV products as figures.

Each plotting function reads one of the delimited outputs and writes a PNG
next to it, so a results directory is self-contained: data first, pictures
alongside.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .experiments import read_csv_rows  # noqa: E402

AGENT_STYLE = {
    "legacy": dict(color="#7f7f7f", marker="s", label="standard 802.11"),
    "lookup": dict(color="#2ca02c", marker="^", label="look-up table"),
    "dqn": dict(color="#1f77b4", marker="o", label="DQN"),
    "ddpg": dict(color="#d62728", marker="v", label="DDPG"),
}


def _style(agent: str) -> dict:
    return dict(AGENT_STYLE.get(agent, dict(marker="x", label=agent)))


def _grouped(rows, key_fields, x_field, y_field, err_field=None):
    series = defaultdict(list)
    for row in rows:
        key = tuple(row[f] for f in key_fields)
        err = float(row[err_field]) if err_field else 0.0
        series[key].append((float(row[x_field]), float(row[y_field]), err))
    for key in series:
        series[key].sort()
    return series


def plot_summary_throughput(summary_csv, out_png=None, *, xlabel="Number of stations",
                            title="Network throughput") -> Path:
    """Mean throughput vs station count with 95% CI bars, one line per agent."""
    rows = read_csv_rows(summary_csv)
    series = _grouped(rows, ("agent",), "n_stations", "mean_throughput_mbps", "ci95_mbps")
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for (agent,), pts in sorted(series.items()):
        x, y, err = zip(*pts)
        ax.errorbar(x, y, yerr=err, capsize=3, **_style(agent))
    ax.set_xlabel(xlabel)
    ax.set_ylabel("Throughput [Mb/s]")
    ax.set_title(title)
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    out = Path(out_png) if out_png else Path(summary_csv).with_suffix(".png")
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_mean_cw_per_round(rounds_csv, out_png=None, *, n_stations=None) -> Path:
    """Per-round mean CW of each agent (seed curves drawn faintly)."""
    rows = read_csv_rows(rounds_csv)
    if n_stations is not None:
        rows = [r for r in rows if int(r["n_stations"]) == int(n_stations)]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    by_agent_seed = _grouped(rows, ("agent", "seed"), "round", "mean_cw")
    by_agent = defaultdict(lambda: defaultdict(list))
    for (agent, seed), pts in by_agent_seed.items():
        style = _style(agent)
        style.pop("label")
        xs = [p[0] for p in pts]
        ys = [p[1] for p in pts]
        ax.plot(xs, ys, alpha=0.25, linewidth=0.8, marker="", color=style["color"])
        for x, y in zip(xs, ys):
            by_agent[agent][x].append(y)
    for agent, per_round in sorted(by_agent.items()):
        xs = sorted(per_round)
        ys = [sum(per_round[x]) / len(per_round[x]) for x in xs]
        ax.plot(xs, ys, **_style(agent))
    ax.set_xlabel("Round")
    ax.set_ylabel("Mean CW")
    title = "Mean CW per round" + (f" ({n_stations} stations)" if n_stations else "")
    ax.set_title(title)
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    out = Path(out_png) if out_png else Path(rounds_csv).parent / "mean_cw_per_round.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def _first_seed_rows(rows):
    seeds = sorted({int(r["seed"]) for r in rows})
    if not seeds:
        return rows
    return [r for r in rows if int(r["seed"]) == seeds[0]]


def plot_dynamic_cw(trace_csv, out_png=None, *, period_s=0.01) -> Path:
    """CW chosen along the station ramp (first seed's operational round)."""
    rows = _first_seed_rows(read_csv_rows(trace_csv))
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax2 = ax.twinx()
    by_agent = _grouped(rows, ("agent",), "interaction", "cw")
    for (agent,), pts in sorted(by_agent.items()):
        x = [p[0] * period_s for p in pts]
        y = [p[1] for p in pts]
        style = _style(agent)
        style.pop("marker", None)
        ax.plot(x, y, linewidth=1.0, **style)
    stations = _grouped(rows, (), "interaction", "n_stations")
    if stations:
        pts = stations[()]
        seen = sorted({(p[0], p[1]) for p in pts})
        ax2.plot([p[0] * period_s for p in seen], [p[1] for p in seen],
                 color="black", linestyle=":", linewidth=1.0, label="stations")
        ax2.set_ylabel("Stations")
    ax.set_xlabel("Time [s]")
    ax.set_ylabel("CW")
    ax.set_title("CW selection in the dynamic topology")
    ax.grid(True, alpha=0.4)
    ax.legend(loc="upper left")
    fig.tight_layout()
    out = Path(out_png) if out_png else Path(trace_csv).parent / "dynamic_cw.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def plot_dynamic_throughput(trace_csv, out_png=None, *, period_s=0.01,
                            smooth: int = 50) -> Path:
    """Instantaneous throughput along the ramp, lightly smoothed per agent."""
    rows = read_csv_rows(trace_csv)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    series = defaultdict(lambda: defaultdict(list))
    for r in rows:
        series[r["agent"]][int(r["interaction"])].append(float(r["throughput_mbps"]))
    for agent, per_i in sorted(series.items()):
        xs = sorted(per_i)
        ys = [sum(per_i[i]) / len(per_i[i]) for i in xs]
        if smooth > 1 and len(ys) > smooth:
            ys = _moving_average(ys, smooth)
            xs = xs[smooth - 1:]
        style = _style(agent)
        style.pop("marker", None)
        ax.plot([x * period_s for x in xs], ys, linewidth=1.2, **style)
    ax.set_xlabel("Time [s]")
    ax.set_ylabel("Throughput [Mb/s]")
    ax.set_title("Instantaneous throughput in the dynamic topology")
    ax.grid(True, alpha=0.4)
    ax.legend()
    fig.tight_layout()
    out = Path(out_png) if out_png else Path(trace_csv).parent / "dynamic_throughput.png"
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def _moving_average(values, window: int):
    out = []
    acc = 0.0
    for i, v in enumerate(values):
        acc += v
        if i >= window:
            acc -= values[i - window]
        if i >= window - 1:
            out.append(acc / window)
    return out


def render_static(out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    made = []
    summary = out_dir / "static_summary.csv"
    rounds = out_dir / "static_rounds.csv"
    if summary.exists():
        made.append(plot_summary_throughput(summary, out_dir / "static_throughput.png",
                                            title="Static topology throughput"))
    if rounds.exists():
        made.append(plot_mean_cw_per_round(rounds, out_dir / "static_mean_cw.png"))
    return made


def render_dynamic(out_dir, period_s=0.01) -> list[Path]:
    out_dir = Path(out_dir)
    made = []
    trace = out_dir / "dynamic_trace.csv"
    summary = out_dir / "dynamic_summary.csv"
    if trace.exists():
        made.append(plot_dynamic_cw(trace, out_dir / "dynamic_cw.png", period_s=period_s))
        made.append(plot_dynamic_throughput(trace, out_dir / "dynamic_throughput.png",
                                            period_s=period_s))
    if summary.exists():
        made.append(plot_summary_throughput(
            summary, out_dir / "dynamic_final_throughput.png",
            xlabel="Stations reached", title="Dynamic topology throughput"))
    return made


__all__ = [
    "plot_dynamic_cw",
    "plot_dynamic_throughput",
    "plot_mean_cw_per_round",
    "plot_summary_throughput",
    "render_dynamic",
    "render_static",
]
