import numpy as np
import pytest

from ccod.controller import (
    AgentKind,
    Controller,
    ControllerConfig,
    Phase,
    action_to_cw,
    cw_to_action,
    run_experiment,
)
from ccod.medium import CW_MAX, CW_MIN, AccessMode, ConfigurationError, MediumConfig
from ccod.nn import ContractViolation

FAST = dict(round_duration_us=600_000.0, interaction_period_us=10_000.0,
            history_length=20)


def fast_config(agent, n=8, seed=0, rounds=3, learning=2, **kw):
    return ControllerConfig(agent=agent, medium=MediumConfig(n_stations=n), seed=seed,
                            rounds_total=rounds, learning_rounds=learning,
                            **{**FAST, **kw})


def test_action_to_cw_exact_mapping():
    expected = {0: 15, 1: 31, 2: 63, 3: 127, 4: 255, 5: 511, 6: 1023}
    for action, cw in expected.items():
        assert action_to_cw(action) == cw
        assert cw_to_action(cw) == pytest.approx(action)
    assert action_to_cw(3.5) == 180  # floor(2^7.5) - 1
    with pytest.raises(ContractViolation):
        action_to_cw(-0.01)
    with pytest.raises(ContractViolation):
        action_to_cw(6.01)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        fast_config(AgentKind.DQN, rounds=3, learning=3)
    with pytest.raises(ConfigurationError):
        ControllerConfig(agent=AgentKind.DQN, medium=MediumConfig(n_stations=5),
                         round_duration_us=25_000.0, interaction_period_us=10_000.0,
                         rounds_total=2, learning_rounds=1)
    with pytest.raises(ConfigurationError):
        fast_config(AgentKind.LOOKUP)  # no table
    cfg = fast_config("dqn")  # string coerces to the enum
    assert cfg.agent is AgentKind.DQN


def test_interactions_per_round():
    cfg = ControllerConfig(agent=AgentKind.LEGACY, medium=MediumConfig(n_stations=5),
                           rounds_total=1, learning_rounds=0)
    assert cfg.interactions_per_round == 6000  # 60 s / 10 ms
    assert fast_config(AgentKind.LEGACY).interactions_per_round == 60


def test_legacy_never_sets_cw():
    controller = Controller(fast_config(AgentKind.LEGACY, seed=1))
    calls = []
    original = controller.medium.set_cw
    controller.medium.set_cw = lambda cw: (calls.append(cw), original(cw))
    for r in (1, 2, 3):
        controller.run_round(r)
    assert calls == []
    assert controller.medium.mode is AccessMode.BEB
    assert controller.agent is None


def test_lookup_keeps_cw_constant_in_static_topology():
    cfg = fast_config(AgentKind.LOOKUP, rounds=2, learning=0,
                      lookup_table={5: 31, 8: 63})
    result = run_experiment(cfg)
    assert set(result.trace.cw) == {63.0}


def test_warmup_switches_to_fixed_cw_min():
    controller = Controller(fast_config(AgentKind.DQN, seed=2))
    assert controller.phase is Phase.PRE_LEARNING
    assert controller.medium.mode is AccessMode.BEB
    for i in range(controller.config.history_length):
        controller.run_interaction(i)
    assert controller.phase is Phase.LEARNING
    assert controller.medium.mode is AccessMode.FIXED_CW
    # Algorithm start state: CW=15 applied, zero observation, action 0 pending
    assert controller.medium.current_cw == CW_MIN
    assert np.array_equal(controller.prev_obs, np.zeros((3, 2)))
    assert controller.prev_action == 0.0
    assert len(controller.agent.replay) == 0


def test_exactly_one_transition_per_learning_interaction():
    cfg = fast_config(AgentKind.DQN, seed=3)
    controller = Controller(cfg)
    per_round = cfg.interactions_per_round
    controller.run_round(1)
    learned_round1 = per_round - cfg.history_length
    assert len(controller.agent.replay) == learned_round1
    controller.run_round(2)
    assert len(controller.agent.replay) == learned_round1 + per_round
    before = len(controller.agent.replay)
    controller.run_round(3)  # operational: nothing stored
    assert len(controller.agent.replay) == before


def test_first_transition_starts_from_zero_state():
    controller = Controller(fast_config(AgentKind.DQN, seed=4))
    controller.run_round(1)
    first = controller.agent.replay._data[0]
    assert np.array_equal(first.state, np.zeros((3, 2)))
    assert first.action == 0.0
    assert 0.0 <= first.reward <= 1.0


def test_no_training_below_batch_size():
    cfg = fast_config(AgentKind.DQN, seed=5, batch_size=32)
    controller = Controller(cfg)
    for i in range(cfg.history_length):
        controller.run_interaction(i)
    snapshot = {k: v.copy() for k, v in controller.agent.local.params.items()}
    for i in range(31):  # buffer fills to 31 < batch
        controller.run_interaction(i)
    assert len(controller.agent.replay) == 31
    for k, v in snapshot.items():
        assert np.array_equal(controller.agent.local.params[k], v)
    controller.run_interaction(31)  # 32nd transition triggers the first step
    changed = any(not np.array_equal(controller.agent.local.params[k], snapshot[k])
                  for k in snapshot)
    assert changed


def test_operational_round_freezes_agent():
    cfg = fast_config(AgentKind.DQN, seed=6)
    controller = Controller(cfg)
    controller.run_round(1)
    controller.run_round(2)
    params = {k: v.copy() for k, v in controller.agent.local.params.items()}
    targets = {k: v.copy() for k, v in controller.agent.target.params.items()}
    buffer_len = len(controller.agent.replay)
    controller.run_round(3)
    assert controller.phase is Phase.OPERATIONAL
    for k in params:
        assert np.array_equal(controller.agent.local.params[k], params[k])
        assert np.array_equal(controller.agent.target.params[k], targets[k])
    assert len(controller.agent.replay) == buffer_len


def test_applied_cw_always_in_802_11_range():
    for agent in (AgentKind.DQN, AgentKind.DDPG):
        result = run_experiment(fast_config(agent, seed=7))
        cws = np.asarray(result.trace.cw)
        assert cws.min() >= CW_MIN
        assert cws.max() <= CW_MAX


def test_phase_progression_is_forward_only():
    controller = Controller(fast_config(AgentKind.DDPG, seed=8))
    order = {Phase.PRE_LEARNING: 0, Phase.LEARNING: 1, Phase.OPERATIONAL: 2}
    seen = []
    for r in (1, 2, 3):
        controller._round = r
        for i in range(controller.config.interactions_per_round):
            seen.append(order[controller.phase])
            controller.run_interaction(i)
    assert seen == sorted(seen)
    assert set(seen) == {0, 1, 2}


def test_noise_level_reaches_zero_in_operational_round():
    cfg = fast_config(AgentKind.DQN, seed=9)
    controller = Controller(cfg)
    for r in (1, 2):
        controller.run_round(r)
    # learning finished: schedule is at its floor and operational uses 0
    assert controller.noise.level(controller.learn_step) <= controller.noise.initial
    assert controller.phase is Phase.LEARNING or controller._round == 2
    controller._round = 3
    assert controller.phase is Phase.OPERATIONAL


def test_legacy_runs_are_deterministic():
    a = run_experiment(fast_config(AgentKind.LEGACY, seed=10))
    b = run_experiment(fast_config(AgentKind.LEGACY, seed=10))
    assert a.rounds == b.rounds
    assert a.trace.throughput_mbps == b.trace.throughput_mbps


def test_dqn_runs_are_deterministic():
    a = run_experiment(fast_config(AgentKind.DQN, seed=11))
    b = run_experiment(fast_config(AgentKind.DQN, seed=11))
    assert a.trace.cw == b.trace.cw
    assert a.trace.throughput_mbps == b.trace.throughput_mbps


def test_ramp_station_schedule():
    cfg = fast_config(AgentKind.LEGACY, n=5, seed=12, rounds=2, learning=0,
                      ramp=(5, 50))
    assert cfg.ramp_station_counts() == [5, 10, 15, 20, 25, 30, 35, 40, 45, 50]
    result = run_experiment(cfg)
    per_round = cfg.interactions_per_round
    seg = per_round // 10
    trace_n = result.trace.n_stations
    for segment in range(10):
        expected = 5 + 5 * segment
        chunk = trace_n[segment * seg:(segment + 1) * seg]
        assert set(chunk) == {expected}
    # second round restarts the ramp
    assert trace_n[per_round] == 5


def test_ramp_lookup_agent_tracks_table():
    table = {5: 31, 10: 63, 20: 127, 30: 255, 50: 511}
    cfg = fast_config(AgentKind.LOOKUP, n=5, seed=13, rounds=1, learning=0,
                      ramp=(5, 50), lookup_table=table)
    result = run_experiment(cfg)
    pairs = set(zip(result.trace.n_stations, (int(c) for c in result.trace.cw)))
    from ccod.bianchi import lookup_cw
    for n, cw in pairs:
        assert cw == lookup_cw(table, n)


def test_operational_throughput_uses_final_rounds():
    result = run_experiment(fast_config(AgentKind.LEGACY, seed=14, rounds=2, learning=1))
    expected = result.rounds[-1].mean_throughput_mbps
    assert result.operational_throughput() == pytest.approx(expected)


def test_reward_normalizer_default_is_single_station_reference():
    controller = Controller(fast_config(AgentKind.DQN, seed=15))
    assert controller.max_throughput_bps == pytest.approx(47_774_122.35, rel=1e-6)
    override = fast_config(AgentKind.DQN, seed=15, max_throughput_bps=1e6)
    assert Controller(override).max_throughput_bps == 1e6
