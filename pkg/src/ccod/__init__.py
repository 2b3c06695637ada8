"""Contention-window optimization for saturated 802.11 DCF.

A slot-level saturation simulator, an independent Bianchi-style analytic
model, a recurrent observation pipeline, from-scratch DQN and DDPG agents,
the centralized control loop tying them together, and an experiment harness
with CSV and figure reporting.
"""

from .agents import (
    DdpgAgent,
    DqnAgent,
    NoiseSchedule,
    ReplayBuffer,
    Transition,
    load_checkpoint,
    save_checkpoint,
)
from .bianchi import (
    DcfModelInput,
    build_lookup_table,
    lookup_cw,
    read_lookup_csv,
    saturation_throughput,
    single_station_throughput,
    solve_tau,
    write_lookup_csv,
)
from .controller import (
    AgentKind,
    Controller,
    ControllerConfig,
    ExperimentResult,
    Phase,
    RoundStats,
    action_to_cw,
    cw_to_action,
    run_experiment,
)
from .experiments import (
    ResultRow,
    RunSettings,
    emit_csv,
    mean_ci95,
    run_dynamic,
    run_many,
    run_static_sweep,
)
from .medium import (
    CW_MAX,
    CW_MIN,
    AccessMode,
    ConfigurationError,
    Medium,
    MediumConfig,
    PeriodCounters,
    SlotKind,
    SlotOutcome,
    StationState,
)
from .nn import Adam, Network, gradient_check, numerical_gradients, soft_update
from .pipeline import (
    HISTORY_LENGTH,
    HistoryBuffer,
    normalize_reward,
    preprocess,
    record_period,
)

__version__ = "0.1.0"
