"""Slot-level simulator of saturated IEEE 802.11 DCF contention on one channel.

Every station always has a frame queued. Time advances in slots: an idle slot
lasts ``slot_us``, a slot with exactly one transmitter delivers a frame in
``t_success_us``, and a slot with two or more transmitters wastes
``t_collision_us``. Stations count their backoff down once per slot (busy or
idle) and transmit when it reaches zero, which is the standard synchronized
slotted abstraction validated by the analytic model in :mod:`ccod.bianchi`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

CW_MIN = 15
CW_MAX = 1023

#: MAC/PHY overhead of a frame exchange beyond the payload airtime, in us.
FRAME_OVERHEAD_US = 100.0
#: Extra medium time a collision wastes over a success (ACK-timeout tail), us.
COLLISION_RECOVERY_US = 30.0
#: PHY rate used for the default payload airtime (1024-QAM 5/6, 20 MHz), Mb/s.
DEFAULT_PHY_RATE_MBPS = 143.4


class AccessMode(Enum):
    """How stations pick their contention window."""

    BEB = "beb"          # binary exponential backoff, CW in {15 .. 1023}
    FIXED_CW = "fixed"   # CW pinned to the controller-assigned value


class ConfigurationError(ValueError):
    """Raised for invalid simulator configuration or operation arguments."""


def default_success_duration_us(payload_bits: int = 12000) -> float:
    """Airtime of one successful frame exchange with default PHY settings."""
    return payload_bits / DEFAULT_PHY_RATE_MBPS + FRAME_OVERHEAD_US


@dataclass(frozen=True)
class MediumConfig:
    """Topology and timing of the simulated channel (durations in us)."""

    n_stations: int
    slot_us: float = 9.0
    t_success_us: float = field(default_factory=default_success_duration_us)
    t_collision_us: float = field(
        default_factory=lambda: default_success_duration_us() + COLLISION_RECOVERY_US
    )
    payload_bits: int = 1500 * 8

    def __post_init__(self):
        if self.n_stations < 1:
            raise ConfigurationError("need at least one station")
        for name in ("slot_us", "t_success_us", "t_collision_us"):
            if getattr(self, name) <= 0:
                raise ConfigurationError(f"{name} must be positive")
        if self.payload_bits <= 0:
            raise ConfigurationError("payload_bits must be positive")


@dataclass
class PeriodCounters:
    """Frame counters accumulated over one measurement period."""

    attempted: int = 0   # transmissions started (collided ones count once each)
    delivered: int = 0   # frames received successfully
    elapsed_us: float = 0.0

    @property
    def collision_probability(self) -> float:
        """Fraction of attempted frames lost to collisions (0 if no attempts)."""
        if self.attempted == 0:
            return 0.0
        return (self.attempted - self.delivered) / self.attempted


@dataclass(frozen=True)
class StationState:
    """Read-only view of one station used by inspection and tests."""

    cw_current: int
    backoff_counter: int
    mode: AccessMode


class SlotKind(Enum):
    IDLE = "idle"
    SUCCESS = "success"
    COLLISION = "collision"


@dataclass(frozen=True)
class SlotOutcome:
    """What happened in one simulated slot."""

    kind: SlotKind
    transmitters: tuple[int, ...] = ()

    @property
    def n_transmitters(self) -> int:
        return len(self.transmitters)


class Medium:
    """Mutable simulation state: per-station backoff/CW, RNG and clock.

    A given (seed, config, CW action sequence) fully determines the
    trajectory. Instances are not thread-safe; run independent seeds as
    independent instances. The clock is kept in integer nanoseconds so the
    accelerated period loop is bit-equivalent to stepping slot by slot.
    """

    def __init__(self, config: MediumConfig, *, mode: AccessMode = AccessMode.BEB,
                 cw: int = CW_MIN, seed=None, rng: np.random.Generator | None = None):
        if cw < 1:
            raise ConfigurationError("cw must be >= 1")
        self.config = config
        self.mode = mode
        self.rng = rng if rng is not None else np.random.default_rng(seed)
        self._slot_ns = round(config.slot_us * 1000)
        self._success_ns = round(config.t_success_us * 1000)
        self._collision_ns = round(config.t_collision_us * 1000)
        self._clock_ns = 0
        self._fixed_cw = cw if mode is AccessMode.FIXED_CW else CW_MIN
        init_cw = cw if mode is AccessMode.FIXED_CW else CW_MIN
        n = config.n_stations
        self._cw = np.full(n, init_cw, dtype=np.int64)
        self._backoff = self.rng.integers(0, self._cw + 1)

    # -- inspection ---------------------------------------------------------

    @property
    def clock_us(self) -> float:
        return self._clock_ns / 1000.0

    @property
    def n_stations(self) -> int:
        return int(self._cw.size)

    @property
    def current_cw(self) -> int:
        """CW applied to FixedCW stations (CW_MIN placeholder under BEB)."""
        return self._fixed_cw

    def mean_cw(self) -> float:
        return float(self._cw.mean())

    def stations(self) -> list[StationState]:
        return [StationState(int(c), int(b), self.mode)
                for c, b in zip(self._cw, self._backoff)]

    # -- control operations -------------------------------------------------

    def set_cw(self, cw: int) -> None:
        """Assign ``cw`` to every FixedCW station.

        Backoff counters above the new window are redrawn uniformly from
        {0..cw}; counters that still fit are kept, so shrinking the window
        never strands a station in a stale long countdown.
        """
        if cw < 1:
            raise ConfigurationError("cw must be >= 1")
        self._fixed_cw = int(cw)
        if self.mode is not AccessMode.FIXED_CW:
            return
        self._cw[:] = cw
        over = np.flatnonzero(self._backoff > cw)
        if over.size:
            self._backoff[over] = self.rng.integers(0, cw + 1, size=over.size)

    def set_access_mode(self, mode: AccessMode, cw: int | None = None) -> None:
        """Switch every station's access mode (BEB reset or pinned CW)."""
        self.mode = mode
        if mode is AccessMode.FIXED_CW:
            self.set_cw(self._fixed_cw if cw is None else cw)
        else:
            self._cw[:] = CW_MIN
            over = np.flatnonzero(self._backoff > CW_MIN)
            if over.size:
                self._backoff[over] = self.rng.integers(0, CW_MIN + 1, size=over.size)

    def set_station_count(self, n: int) -> None:
        """Grow or shrink the topology to ``n`` stations.

        New stations start with a fresh backoff drawn from the currently
        applied CW; removal drops the highest indices first. Existing
        stations are untouched.
        """
        if n < 1:
            raise ConfigurationError("need at least one station")
        cur = self.n_stations
        if n == cur:
            return
        if n < cur:
            self._cw = self._cw[:n].copy()
            self._backoff = self._backoff[:n].copy()
        else:
            extra = n - cur
            cw_new = self._fixed_cw if self.mode is AccessMode.FIXED_CW else CW_MIN
            self._cw = np.concatenate([self._cw, np.full(extra, cw_new, dtype=np.int64)])
            fresh = self.rng.integers(0, cw_new + 1, size=extra)
            self._backoff = np.concatenate([self._backoff, fresh])

    # -- simulation ---------------------------------------------------------

    def _resolve_transmission(self, tx: np.ndarray, counters: PeriodCounters) -> SlotOutcome:
        """Apply the outcome of a slot whose transmitter set is ``tx``."""
        k = tx.size
        self._backoff -= 1  # per-slot countdown; transmitters redrawn below
        if k == 1:
            self._clock_ns += self._success_ns
            counters.attempted += 1
            counters.delivered += 1
            if self.mode is AccessMode.BEB:
                self._cw[tx] = CW_MIN
            outcome = SlotOutcome(SlotKind.SUCCESS, (int(tx[0]),))
        else:
            self._clock_ns += self._collision_ns
            counters.attempted += k
            if self.mode is AccessMode.BEB:
                self._cw[tx] = np.minimum(2 * self._cw[tx] + 1, CW_MAX)
            outcome = SlotOutcome(SlotKind.COLLISION, tuple(int(i) for i in tx))
        self._backoff[tx] = self.rng.integers(0, self._cw[tx] + 1)
        return outcome

    def step_slot(self, counters: PeriodCounters | None = None) -> SlotOutcome:
        """Simulate exactly one slot and return its outcome."""
        if counters is None:
            counters = PeriodCounters()
        tx = np.flatnonzero(self._backoff == 0)
        if tx.size == 0:
            self._clock_ns += self._slot_ns
            self._backoff -= 1
            return SlotOutcome(SlotKind.IDLE)
        return self._resolve_transmission(tx, counters)

    def run_period(self, delta_t_us: float) -> PeriodCounters:
        """Run slots until at least ``delta_t_us`` of medium time has passed.

        Idle stretches are fast-forwarded in one jump (the countdown is the
        only state that changes), which is exactly equivalent to calling
        :meth:`step_slot` repeatedly. Counters reset at the period start;
        the slot that crosses the period boundary is included.
        """
        if delta_t_us <= 0:
            raise ConfigurationError("delta_t_us must be positive")
        counters = PeriodCounters()
        start_ns = self._clock_ns
        end_ns = start_ns + round(delta_t_us * 1000)
        backoff = self._backoff
        slot_ns = self._slot_ns
        while self._clock_ns < end_ns:
            m = int(backoff.min())
            if m > 0:
                remaining = end_ns - self._clock_ns
                idle_to_end = -(-remaining // slot_ns)
                if idle_to_end <= m:
                    backoff -= idle_to_end
                    self._clock_ns += idle_to_end * slot_ns
                    break
                backoff -= m
                self._clock_ns += m * slot_ns
            tx = np.flatnonzero(backoff == 0)
            self._resolve_transmission(tx, counters)
        counters.elapsed_us = (self._clock_ns - start_ns) / 1000.0
        return counters

    def throughput_bps(self, counters: PeriodCounters) -> float:
        """Delivered payload bits per second of elapsed medium time."""
        if counters.elapsed_us <= 0:
            return 0.0
        return counters.delivered * self.config.payload_bits / (counters.elapsed_us * 1e-6)


__all__ = [
    "AccessMode",
    "CW_MAX",
    "CW_MIN",
    "ConfigurationError",
    "Medium",
    "MediumConfig",
    "PeriodCounters",
    "SlotKind",
    "SlotOutcome",
    "StationState",
    "default_success_duration_us",
]
