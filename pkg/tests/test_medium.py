import numpy as np
import pytest

from ccod.medium import (
    CW_MAX,
    CW_MIN,
    AccessMode,
    ConfigurationError,
    Medium,
    MediumConfig,
    PeriodCounters,
    SlotKind,
)
from ccod.bianchi import DcfModelInput, saturation_throughput, solve_tau


def make_medium(n, mode=AccessMode.FIXED_CW, cw=15, seed=0, **timing):
    return Medium(MediumConfig(n_stations=n, **timing), mode=mode, cw=cw, seed=seed)


def test_config_validation():
    with pytest.raises(ConfigurationError):
        MediumConfig(n_stations=0)
    with pytest.raises(ConfigurationError):
        MediumConfig(n_stations=1, slot_us=0)
    with pytest.raises(ConfigurationError):
        Medium(MediumConfig(n_stations=1), cw=0)


def test_single_station_never_collides():
    medium = make_medium(1, cw=15, seed=3)
    counters = medium.run_period(200_000)
    assert counters.delivered == counters.attempted
    assert counters.delivered > 0


def test_beb_doubles_on_collision_and_caps():
    medium = make_medium(2, mode=AccessMode.BEB, seed=1)
    # force a collision: both stations transmit in the next slot
    medium._backoff[:] = 0
    counters = PeriodCounters()
    outcome = medium.step_slot(counters)
    assert outcome.kind is SlotKind.COLLISION
    assert outcome.n_transmitters == 2
    assert list(medium._cw) == [31, 31]
    assert counters.attempted == 2 and counters.delivered == 0
    # repeated collisions saturate at CW_MAX
    for _ in range(12):
        medium._backoff[:] = 0
        medium.step_slot(PeriodCounters())
    assert list(medium._cw) == [CW_MAX, CW_MAX]


def test_beb_success_resets_to_cw_min():
    medium = make_medium(2, mode=AccessMode.BEB, seed=2)
    medium._cw[:] = 255
    medium._backoff[:] = (0, 5)
    outcome = medium.step_slot(PeriodCounters())
    assert outcome.kind is SlotKind.SUCCESS
    assert outcome.transmitters == (0,)
    assert medium._cw[0] == CW_MIN
    assert medium._cw[1] == 255          # bystander untouched
    assert medium._backoff[1] == 4       # bystander counts down once per slot


def test_beb_window_stays_in_range():
    medium = make_medium(8, mode=AccessMode.BEB, seed=5)
    for _ in range(30):
        medium.run_period(5_000)
        assert medium._cw.min() >= CW_MIN
        assert medium._cw.max() <= CW_MAX


def test_idle_slot_decrements_everyone():
    medium = make_medium(3, cw=100, seed=9)
    medium._backoff[:] = (7, 9, 11)
    outcome = medium.step_slot(PeriodCounters())
    assert outcome.kind is SlotKind.IDLE
    assert list(medium._backoff) == [6, 8, 10]


def test_set_cw_assigns_and_redraws_only_above():
    medium = make_medium(4, cw=1023, seed=4)
    medium._backoff[:] = (900, 3, 15, 16)
    medium.set_cw(15)
    assert list(medium._cw) == [15, 15, 15, 15]
    assert 0 <= medium._backoff[0] <= 15   # redrawn
    assert medium._backoff[1] == 3         # kept
    assert medium._backoff[2] == 15        # kept (not above)
    assert 0 <= medium._backoff[3] <= 15   # redrawn
    medium.set_cw(1023)
    assert list(medium._cw) == [1023] * 4
    with pytest.raises(ConfigurationError):
        medium.set_cw(0)


def test_set_cw_ignores_beb_stations():
    medium = make_medium(3, mode=AccessMode.BEB, seed=4)
    medium.set_cw(255)
    assert list(medium._cw) == [CW_MIN] * 3


def test_set_station_count_grows_and_shrinks():
    medium = make_medium(5, cw=63, seed=6)
    before = medium._backoff.copy()
    medium.set_station_count(10)
    assert medium.n_stations == 10
    assert list(medium._backoff[:5]) == list(before)   # old stations untouched
    assert all(0 <= b <= 63 for b in medium._backoff[5:])
    assert all(c == 63 for c in medium._cw[5:])
    medium.set_station_count(10)                       # no-op keeps state identical
    assert medium.n_stations == 10
    medium.set_station_count(3)                        # highest indices removed
    assert medium.n_stations == 3
    assert list(medium._backoff) == list(before[:3])
    with pytest.raises(ConfigurationError):
        medium.set_station_count(0)


def test_determinism_same_seed_same_trajectory():
    a = make_medium(12, cw=31, seed=77)
    b = make_medium(12, cw=31, seed=77)
    for _ in range(20):
        ca = a.run_period(10_000)
        cb = b.run_period(10_000)
        assert (ca.attempted, ca.delivered, ca.elapsed_us) == \
               (cb.attempted, cb.delivered, cb.elapsed_us)
    assert list(a._backoff) == list(b._backoff)
    assert a._clock_ns == b._clock_ns


def test_run_period_equivalent_to_repeated_step_slot():
    fast = make_medium(6, mode=AccessMode.BEB, seed=123)
    slow = make_medium(6, mode=AccessMode.BEB, seed=123)
    for _ in range(40):
        counters_fast = fast.run_period(3_333)
        counters_slow = PeriodCounters()
        end_ns = slow._clock_ns + round(3_333 * 1000)
        while slow._clock_ns < end_ns:
            slow.step_slot(counters_slow)
        assert counters_fast.attempted == counters_slow.attempted
        assert counters_fast.delivered == counters_slow.delivered
        assert fast._clock_ns == slow._clock_ns
        assert list(fast._backoff) == list(slow._backoff)
        assert list(fast._cw) == list(slow._cw)


def test_conservation_attempts_minus_delivered_is_collided():
    medium = make_medium(5, mode=AccessMode.BEB, seed=8)
    counters = PeriodCounters()
    collided = 0
    for _ in range(5000):
        outcome = medium.step_slot(counters)
        if outcome.kind is SlotKind.COLLISION:
            collided += outcome.n_transmitters
    assert counters.attempted - counters.delivered == collided


def test_collision_probability_counter():
    assert PeriodCounters(attempted=100, delivered=80).collision_probability == pytest.approx(0.2)
    assert PeriodCounters(attempted=57, delivered=57).collision_probability == 0.0
    assert PeriodCounters().collision_probability == 0.0


def test_single_station_throughput_matches_mean_backoff_formula():
    # one station, fixed CW=15: renewal cycle of (CW/2) idle slots plus one exchange
    medium = make_medium(1, cw=15, seed=10)
    counters = medium.run_period(10e6)
    cfg = medium.config
    expected = cfg.payload_bits / ((cfg.t_success_us + 7.5 * cfg.slot_us) * 1e-6)
    assert medium.throughput_bps(counters) == pytest.approx(expected, rel=0.02)


def test_two_station_collision_probability_matches_model():
    medium = make_medium(2, cw=15, seed=11)
    counters = medium.run_period(60e6)
    _, p_model = solve_tau(DcfModelInput(n=2, cw=15))
    assert counters.collision_probability == pytest.approx(p_model, abs=0.005)


def test_period_collision_probability_near_model_n30():
    medium = make_medium(30, cw=15, seed=12)
    medium.run_period(50_000)  # settle
    _, p_model = solve_tau(DcfModelInput(n=30, cw=15))
    counters = medium.run_period(10_000)
    assert counters.collision_probability == pytest.approx(p_model, abs=0.05)


def test_simulated_throughput_tracks_model():
    cfg = MediumConfig(n_stations=20)
    medium = Medium(cfg, mode=AccessMode.FIXED_CW, cw=63, seed=13)
    counters = medium.run_period(20e6)
    model = saturation_throughput(DcfModelInput(n=20, cw=63, timing=cfg))
    assert medium.throughput_bps(counters) == pytest.approx(model, rel=0.03)


def test_collision_probability_increases_with_station_count():
    medium = make_medium(5, cw=31, seed=14)
    p_small = medium.run_period(5e6).collision_probability
    medium.set_station_count(50)
    medium.run_period(100_000)
    p_large = medium.run_period(5e6).collision_probability
    assert p_large > p_small


def test_station_views():
    medium = make_medium(3, cw=31, seed=15)
    stations = medium.stations()
    assert len(stations) == 3
    for s in stations:
        assert s.mode is AccessMode.FIXED_CW
        assert s.cw_current == 31
        assert 0 <= s.backoff_counter <= 31
