"""Centralized contention-window control loop.

Drives the medium in fixed interaction periods: measure the period's frame
counters, update the collision history, ask the agent for an action, map it
to a CW and apply it, then (while learning) store the completed transition
and run one minibatch optimization. Three phases: a warm-up under plain
802.11 backoff that fills the history, the learning rounds with decaying
exploration noise, and a final operational round with the policy frozen.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .agents import (
    BATCH_SIZE,
    DDPG_ACTOR_LR,
    DDPG_CRITIC_LR,
    DDPG_SIGMA_RANGE,
    DQN_EPSILON_RANGE,
    DQN_LR,
    GAMMA,
    REPLAY_CAPACITY,
    SOFT_UPDATE_TAU,
    DdpgAgent,
    DqnAgent,
    NoiseSchedule,
    Transition,
)
from .bianchi import lookup_cw, single_station_throughput
from .medium import (
    CW_MAX,
    CW_MIN,
    AccessMode,
    ConfigurationError,
    Medium,
    MediumConfig,
)
from .nn import ContractViolation, TrainingError
from .pipeline import (
    HISTORY_LENGTH,
    HistoryBuffer,
    normalize_reward,
    preprocess,
    record_period,
)

log = logging.getLogger(__name__)

RAMP_SEGMENTS = 10


class AgentKind(str, Enum):
    LEGACY = "legacy"      # plain 802.11 BEB, no controller actions
    LOOKUP = "lookup"      # best fixed CW per station count, precomputed
    DQN = "dqn"
    DDPG = "ddpg"

    @property
    def trainable(self) -> bool:
        return self in (AgentKind.DQN, AgentKind.DDPG)


class Phase(Enum):
    PRE_LEARNING = "pre-learning"
    LEARNING = "learning"
    OPERATIONAL = "operational"


def action_to_cw(action: float) -> int:
    """Map an action in [0, 6] to a CW in [15, 1023]: floor(2^(a+4)) - 1."""
    if not 0.0 <= action <= 6.0:
        raise ContractViolation(f"action out of range: {action}")
    return math.floor(2.0 ** (action + 4.0)) - 1


def cw_to_action(cw: int) -> float:
    """Inverse of :func:`action_to_cw` on exact powers of two minus one."""
    return math.log2(cw + 1) - 4.0


@dataclass
class ControllerConfig:
    """Everything one experiment needs; all randomness derives from `seed`."""

    agent: AgentKind
    medium: MediumConfig
    seed: int = 0
    interaction_period_us: float = 10_000.0
    round_duration_us: float = 60e6
    rounds_total: int = 15
    learning_rounds: int = 14
    history_length: int = HISTORY_LENGTH
    gamma: float = GAMMA
    batch_size: int = BATCH_SIZE
    replay_capacity: int = REPLAY_CAPACITY
    soft_update_tau: float = SOFT_UPDATE_TAU
    dqn_lr: float = DQN_LR
    ddpg_actor_lr: float = DDPG_ACTOR_LR
    ddpg_critic_lr: float = DDPG_CRITIC_LR
    epsilon_range: tuple[float, float] = DQN_EPSILON_RANGE
    sigma_range: tuple[float, float] = DDPG_SIGMA_RANGE
    ramp: tuple[int, int] | None = None   # (n_start, n_end) per-round station ramp
    lookup_table: dict[int, int] | None = None
    max_throughput_bps: float | None = None

    def __post_init__(self):
        if isinstance(self.agent, str):
            self.agent = AgentKind(self.agent)
        if self.learning_rounds >= self.rounds_total:
            raise ConfigurationError("learning_rounds must be < rounds_total")
        if self.learning_rounds < 0:
            raise ConfigurationError("learning_rounds must be >= 0")
        per_round = self.round_duration_us / self.interaction_period_us
        if abs(per_round - round(per_round)) > 1e-9:
            raise ConfigurationError("interaction period must divide the round duration")
        if self.agent is AgentKind.LOOKUP and not self.lookup_table:
            raise ConfigurationError("lookup agent requires a look-up table")

    @property
    def interactions_per_round(self) -> int:
        return round(self.round_duration_us / self.interaction_period_us)

    def ramp_station_counts(self) -> list[int]:
        """Station count per tenth of the round (constant when not ramping)."""
        if self.ramp is None:
            return [self.medium.n_stations] * RAMP_SEGMENTS
        n_start, n_end = self.ramp
        span = n_end - n_start
        return [n_start + round(s * span / (RAMP_SEGMENTS - 1)) for s in range(RAMP_SEGMENTS)]


@dataclass
class RoundStats:
    round_index: int
    mean_throughput_mbps: float
    mean_cw: float
    mean_p_col: float


@dataclass
class Trace:
    """Per-interaction record of one experiment, column-wise."""

    round_index: list[int] = field(default_factory=list)
    interaction: list[int] = field(default_factory=list)
    n_stations: list[int] = field(default_factory=list)
    cw: list[float] = field(default_factory=list)
    p_col: list[float] = field(default_factory=list)
    throughput_mbps: list[float] = field(default_factory=list)

    def append(self, round_index, interaction, n_stations, cw, p_col, thr):
        self.round_index.append(round_index)
        self.interaction.append(interaction)
        self.n_stations.append(n_stations)
        self.cw.append(cw)
        self.p_col.append(p_col)
        self.throughput_mbps.append(thr)

    def __len__(self):
        return len(self.round_index)

    def round_slice(self, round_index: int) -> np.ndarray:
        return np.flatnonzero(np.asarray(self.round_index) == round_index)


@dataclass
class ExperimentResult:
    agent: AgentKind
    seed: int
    rounds: list[RoundStats]
    trace: Trace
    learning_rounds: int

    def operational_throughput(self) -> float:
        ops = [r.mean_throughput_mbps for r in self.rounds
               if r.round_index > self.learning_rounds]
        return float(np.mean(ops))


class Controller:
    """Owns one experiment: medium, pipeline, agent, and phase bookkeeping."""

    def __init__(self, config: ControllerConfig):
        self.config = config
        seeds = np.random.SeedSequence(config.seed).spawn(2)
        medium_rng = np.random.default_rng(seeds[0])
        n_start = config.ramp_station_counts()[0]
        medium_cfg = (config.medium if config.medium.n_stations == n_start else
                      MediumConfig(n_stations=n_start, slot_us=config.medium.slot_us,
                                   t_success_us=config.medium.t_success_us,
                                   t_collision_us=config.medium.t_collision_us,
                                   payload_bits=config.medium.payload_bits))
        if config.agent is AgentKind.LOOKUP:
            cw0 = lookup_cw(config.lookup_table, n_start)
            self.medium = Medium(medium_cfg, mode=AccessMode.FIXED_CW, cw=cw0, rng=medium_rng)
        else:
            self.medium = Medium(medium_cfg, mode=AccessMode.BEB, rng=medium_rng)

        self.history = HistoryBuffer(config.history_length)
        agent_rng = np.random.default_rng(seeds[1])
        if config.agent is AgentKind.DQN:
            self.agent = DqnAgent(gamma=config.gamma, lr=config.dqn_lr,
                                  tau=config.soft_update_tau, batch_size=config.batch_size,
                                  buffer_capacity=config.replay_capacity, rng=agent_rng)
            lo, hi = config.epsilon_range
        elif config.agent is AgentKind.DDPG:
            self.agent = DdpgAgent(gamma=config.gamma, actor_lr=config.ddpg_actor_lr,
                                   critic_lr=config.ddpg_critic_lr, tau=config.soft_update_tau,
                                   batch_size=config.batch_size,
                                   buffer_capacity=config.replay_capacity, rng=agent_rng)
            lo, hi = config.sigma_range
        else:
            self.agent = None
            lo = hi = 0.0

        warmup = config.history_length if config.agent.trainable else 0
        learn_steps = max(config.learning_rounds * config.interactions_per_round - warmup, 1)
        self.noise = NoiseSchedule(initial=lo, final=hi, steps=learn_steps)
        self.warmup_left = warmup
        self.learn_step = 0
        self.max_throughput_bps = (config.max_throughput_bps
                                   if config.max_throughput_bps is not None
                                   else single_station_throughput(config.medium))
        # Algorithm start state: zero observation, CW=15 (action 0)
        self.prev_obs = np.zeros((3, 2))
        self.prev_action = 0.0
        self.trace = Trace()
        self._round = 1

    # -- phases -----------------------------------------------------------

    @property
    def phase(self) -> Phase:
        if self._round > self.config.learning_rounds:
            return Phase.OPERATIONAL
        if self.warmup_left > 0 and self.config.agent.trainable:
            return Phase.PRE_LEARNING
        return Phase.LEARNING

    # -- one Algorithm-style iteration -------------------------------------

    def run_interaction(self, interaction_index: int = 0) -> None:
        cfg = self.config
        counters = self.medium.run_period(cfg.interaction_period_us)
        p_col = record_period(self.history, counters)
        thr_bps = (counters.delivered * cfg.medium.payload_bits
                   / (cfg.interaction_period_us * 1e-6))
        cw_used = self.medium.mean_cw()

        phase = self.phase
        if self.agent is not None:
            if phase is Phase.PRE_LEARNING:
                self.warmup_left -= 1
                if self.warmup_left == 0:
                    # history is warm: agent takes over at the standard CW
                    self.medium.set_access_mode(AccessMode.FIXED_CW, CW_MIN)
            else:
                obs = preprocess(self.history)
                if phase is Phase.LEARNING:
                    noise = self.noise.level(self.learn_step)
                    self.learn_step += 1
                else:
                    noise = 0.0
                action = self.agent.act(obs, noise)
                self.medium.set_cw(action_to_cw(action))
                if phase is Phase.LEARNING:
                    reward = normalize_reward(thr_bps, self.max_throughput_bps)
                    self.agent.remember(Transition(self.prev_obs, self.prev_action,
                                                   reward, obs))
                    self.prev_obs = obs
                    self.prev_action = float(action)
                    if self.agent.ready:
                        try:
                            self.agent.train_from_replay()
                        except TrainingError as exc:
                            # a failed optimization skips the update, control goes on
                            log.warning("training step skipped: %s", exc)

        self.trace.append(self._round, interaction_index, self.medium.n_stations,
                          cw_used, p_col, thr_bps / 1e6)

    # -- rounds and experiments ---------------------------------------------

    def run_round(self, round_index: int) -> RoundStats:
        cfg = self.config
        self._round = round_index
        per_round = cfg.interactions_per_round
        counts = cfg.ramp_station_counts()
        seg_len = max(per_round // RAMP_SEGMENTS, 1)
        for i in range(per_round):
            if cfg.ramp is not None and i % seg_len == 0:
                n = counts[min(i // seg_len, RAMP_SEGMENTS - 1)]
                if n != self.medium.n_stations:
                    self.medium.set_station_count(n)
                    if cfg.agent is AgentKind.LOOKUP:
                        self.medium.set_cw(lookup_cw(cfg.lookup_table, n))
            self.run_interaction(i)
        idx = self.trace.round_slice(round_index)
        thr = np.asarray(self.trace.throughput_mbps)[idx]
        cw = np.asarray(self.trace.cw)[idx]
        pc = np.asarray(self.trace.p_col)[idx]
        return RoundStats(round_index, float(thr.mean()), float(cw.mean()), float(pc.mean()))

    def run_experiment(self) -> ExperimentResult:
        rounds = [self.run_round(r) for r in range(1, self.config.rounds_total + 1)]
        return ExperimentResult(agent=self.config.agent, seed=self.config.seed,
                                rounds=rounds, trace=self.trace,
                                learning_rounds=self.config.learning_rounds)


def run_experiment(config: ControllerConfig) -> ExperimentResult:
    """Build a controller and run the configured rounds end to end."""
    return Controller(config).run_experiment()


__all__ = [
    "AgentKind",
    "Controller",
    "ControllerConfig",
    "ExperimentResult",
    "Phase",
    "RoundStats",
    "Trace",
    "action_to_cw",
    "cw_to_action",
    "run_experiment",
]
