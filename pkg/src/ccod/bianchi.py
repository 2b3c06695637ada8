"""Bianchi-style fixed-point model of DCF saturation throughput.

Independent of the slot simulator, this module predicts the per-slot
transmission probability tau, the conditional collision probability p and
the saturation throughput of n stations contending with either a fixed
contention window or binary exponential backoff. It validates the simulator
and generates the best-fixed-CW look-up table baseline.

Conventions match the simulator: the backoff is drawn uniformly from
{0 .. cw} inclusive and the counter ticks once per (idle or busy) slot, so a
station with a fixed window transmits in a fraction tau = 2 / (cw + 2) of
slots; with backoff doubling, tau solves the usual coupled equations in
(tau, p).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .medium import CW_MIN, AccessMode, ConfigurationError, Medium, MediumConfig

#: CW values the look-up table sweep may choose from: 2^x - 1, x in 4..10.
SWEEP_CW_VALUES = tuple(2**x - 1 for x in range(4, 11))

MAX_FIXED_POINT_ITERATIONS = 200
FIXED_POINT_TOLERANCE = 1e-10


class FixedPointError(ArithmeticError):
    """Fixed-point iteration failed to reach the residual tolerance."""


@dataclass(frozen=True)
class DcfModelInput:
    """Scenario fed to the analytic model.

    ``max_stage`` is the number of backoff doublings (0 keeps the window
    fixed at ``cw``); stage i uses window (cw+1) * 2^i - 1.
    """

    n: int
    cw: int
    max_stage: int = 0
    timing: MediumConfig | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("n must be >= 1")
        if self.cw < 1:
            raise ConfigurationError("cw must be >= 1")
        if self.max_stage < 0:
            raise ConfigurationError("max_stage must be >= 0")


def _stage_windows(cw: int, max_stage: int) -> np.ndarray:
    return np.array([(cw + 1) * 2**i - 1 for i in range(max_stage + 1)], dtype=float)


def _tau_given_p(p: float, windows: np.ndarray) -> float:
    """Transmission probability for attempt-stage distribution induced by p.

    A station attempts at stage i with stationary probability
    (1-p) p^i (i < m) or p^m (i = m, where the window stops doubling); each
    stage-i attempt occupies on average cw_i/2 + 1 slots.
    """
    m = windows.size - 1
    stage_prob = np.array([(1 - p) * p**i for i in range(m)] + [p**m])
    mean_slots = float(stage_prob @ (windows / 2.0 + 1.0))
    return 1.0 / mean_slots


def solve_tau(inp: DcfModelInput) -> tuple[float, float]:
    """Solve the (tau, p) fixed point by bisection.

    Returns
    -------
    tuple
        ``(tau, p)`` with residual |p - (1 - (1-tau)^(n-1))| below 1e-10.

    Raises
    ------
    FixedPointError
        If 200 bisection steps cannot reach the tolerance.
    """
    windows = _stage_windows(inp.cw, inp.max_stage)
    if inp.n == 1:
        return _tau_given_p(0.0, windows), 0.0
    if inp.max_stage == 0:
        # p-independent: the countdown chain visits zero once per cw/2 + 1 slots
        tau = 2.0 / (inp.cw + 2.0)
        return tau, 1.0 - (1.0 - tau) ** (inp.n - 1)

    def residual(p: float) -> float:
        return p - (1.0 - (1.0 - _tau_given_p(p, windows)) ** (inp.n - 1))

    lo, hi = 0.0, 1.0
    p = 0.5
    for _ in range(MAX_FIXED_POINT_ITERATIONS):
        p = 0.5 * (lo + hi)
        r = residual(p)
        if abs(r) < FIXED_POINT_TOLERANCE:
            return _tau_given_p(p, windows), p
        if r > 0:
            hi = p
        else:
            lo = p
    raise FixedPointError(
        f"no fixed point after {MAX_FIXED_POINT_ITERATIONS} iterations "
        f"(last residual {residual(p):.3e})"
    )


def saturation_throughput(inp: DcfModelInput) -> float:
    """Predicted saturation throughput in bits/second.

    Standard renewal accounting over slots: a slot is busy with probability
    P_tr, a busy slot is a success with probability P_s, and the channel
    delivers one payload per successful slot.
    """
    timing = inp.timing if inp.timing is not None else MediumConfig(n_stations=inp.n)
    tau, _ = solve_tau(inp)
    n = inp.n
    p_tr = 1.0 - (1.0 - tau) ** n
    p_s = n * tau * (1.0 - tau) ** (n - 1) / p_tr
    sigma = timing.slot_us * 1e-6
    t_s = timing.t_success_us * 1e-6
    t_c = timing.t_collision_us * 1e-6
    denom = (1.0 - p_tr) * sigma + p_tr * p_s * t_s + p_tr * (1.0 - p_s) * t_c
    return p_tr * p_s * timing.payload_bits / denom


def build_lookup_table(n_values, timing: MediumConfig | None = None, *,
                       duration_us: float = 60e6, seed: int = 0) -> dict[int, int]:
    """Best fixed CW per station count, determined with simulator sweeps.

    For each n the full 60 s simulation is run at every CW in
    ``SWEEP_CW_VALUES`` and the throughput argmax recorded; ties break
    toward the smaller CW. Deterministic for a given seed.
    """
    n_values = sorted(set(int(n) for n in n_values))
    if not n_values:
        raise ConfigurationError("n_values must be non-empty")
    table: dict[int, int] = {}
    for n in n_values:
        cfg = MediumConfig(n_stations=n, **_timing_kwargs(timing))
        best_cw, best_thr = None, -1.0
        for cw in SWEEP_CW_VALUES:
            medium = Medium(cfg, mode=AccessMode.FIXED_CW, cw=cw,
                            rng=np.random.default_rng([seed, n, cw]))
            counters = medium.run_period(duration_us)
            thr = medium.throughput_bps(counters)
            if thr > best_thr:
                best_cw, best_thr = cw, thr
        table[n] = best_cw
    return table


def _timing_kwargs(timing: MediumConfig | None) -> dict:
    if timing is None:
        return {}
    return {
        "slot_us": timing.slot_us,
        "t_success_us": timing.t_success_us,
        "t_collision_us": timing.t_collision_us,
        "payload_bits": timing.payload_bits,
    }


def lookup_cw(table: dict[int, int], n: int) -> int:
    """CW for ``n`` stations: nearest table entry at or below ``n``.

    Station counts below the smallest entry use the smallest entry; an empty
    table is a configuration error.
    """
    if not table:
        raise ConfigurationError("look-up table is empty")
    keys = sorted(table)
    at_or_below = [k for k in keys if k <= n]
    return table[at_or_below[-1]] if at_or_below else table[keys[0]]


def write_lookup_csv(table: dict[int, int], path) -> None:
    """Persist the look-up table as a two-column CSV ``n,cw``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "cw"])
        for n in sorted(table):
            writer.writerow([n, table[n]])


def read_lookup_csv(path) -> dict[int, int]:
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        return {int(row["n"]): int(row["cw"]) for row in reader}


def single_station_throughput(timing: MediumConfig, cw: int = CW_MIN) -> float:
    """Throughput of one lone station; the default reward normalizer."""
    return saturation_throughput(DcfModelInput(n=1, cw=cw, max_stage=0, timing=timing))


__all__ = [
    "DcfModelInput",
    "FixedPointError",
    "SWEEP_CW_VALUES",
    "build_lookup_table",
    "lookup_cw",
    "read_lookup_csv",
    "saturation_throughput",
    "single_station_throughput",
    "solve_tau",
    "write_lookup_csv",
]
