from __future__ import annotations

import math

import pytest

from avguard.errors import ConfigInvalid
from avguard.ir.syntax import parse_program
from avguard.sim.episode import EpisodeConfig, run_episode
from avguard.sim.export import TRAJECTORY_HEADER, trajectory_csv
from avguard.sim.scenario import (
    CAR_FOLLOWING,
    LeadScript,
    Scenario,
    ScenarioParams,
    car_following,
    load_scenario,
)
from avguard.pipeline.corpus import SCENARIOS

FLOOR_IT = """app floor_it
handler vehicle_report:
block entry:
    t = const 100
    publish throttle_cmd percent=t
    halt
"""

LATE_BRAKE = """app late_brake
handler vehicle_report:
block entry:
    t = const 100
    publish throttle_cmd percent=t
    halt
handler lead_vehicle_report:
block entry:
    g = field gap
    near = lt g 3
    branch near stop done
block stop:
    z = const 0
    publish throttle_cmd percent=z
    b = const 100
    publish brake_cmd percent=b
    halt
block done:
    halt
"""


def test_no_apps_at_rest_is_static():
    sc = Scenario(CAR_FOLLOWING, 0.0, 5.0)
    res = run_episode(EpisodeConfig(sc, [], seed=1))
    assert not res.crashed
    first = res.trajectory[0]
    for row in res.trajectory:
        assert (row.x, row.y, row.heading, row.speed) == (first.x, first.y, first.heading, first.speed)


def test_config_validation():
    sc = Scenario(CAR_FOLLOWING, 10.0, 5.0)
    for bad in (EpisodeConfig(sc, dt=0.0), EpisodeConfig(sc, max_steps=0), EpisodeConfig(sc, seed=-1),
                EpisodeConfig(sc, seed=2**64), EpisodeConfig(Scenario("orbit", 1.0))):
        with pytest.raises(ConfigInvalid):
            run_episode(bad)
    p = parse_program(FLOOR_IT)
    with pytest.raises(ConfigInvalid):
        run_episode(EpisodeConfig(sc, [p, p]))


def test_crash_into_braking_lead_without_watchdog():
    sc = car_following(ScenarioParams(20.0, 20.0, 20.0, 6.0, 1.0))
    res = run_episode(EpisodeConfig(sc, [parse_program(FLOOR_IT)], watchdog_enabled=False))
    assert res.crashed and res.min_gap <= 0.0 and res.severity <= 0.0
    assert res.crash_time < 20.0


def test_watchdog_prevents_the_same_crash_and_locks_out():
    sc = car_following(ScenarioParams(20.0, 20.0, 20.0, 6.0, 1.0))
    res = run_episode(EpisodeConfig(sc, [parse_program(FLOOR_IT)], watchdog_enabled=True))
    assert not res.crashed and res.min_gap > 0.0
    assert res.lockout_time is not None
    after = [r for r in res.trajectory if r.t > res.lockout_time]
    assert after and all(r.intervention == 1 and r.throttle == 0.0 for r in after)
    assert after[-1].speed == 0.0
    overrides = [i for i in res.interventions if i.action == "override"]
    assert len(overrides) == 1
    assert any(i.action == "decline" for i in res.interventions)


def test_last_writer_wins():
    res = run_episode(EpisodeConfig(car_following(ScenarioParams(2.5, 5.0, 5.0, 0.0, 1.0), 0.2),
                                    [parse_program(LATE_BRAKE)], watchdog_enabled=False))
    row = res.trajectory[1]
    # lead handler ran after the vehicle report handler: its throttle 0 wins
    assert (row.throttle, row.brake) == (0.0, 100.0)


def test_same_seed_same_csv(corpus):
    sc = load_scenario(SCENARIOS / "highway_brake.json")
    pkg = corpus("aggressive_follower")
    a = trajectory_csv(run_episode(EpisodeConfig(sc, [pkg], seed=7)).trajectory)
    b = trajectory_csv(run_episode(EpisodeConfig(sc, [pkg], seed=7)).trajectory)
    assert a == b
    assert a.splitlines()[0] == ",".join(TRAJECTORY_HEADER)


def test_lead_script_closed_form():
    lead = LeadScript(10.0, 20.0, 5.0, 2.0)
    assert lead.travelled(2.0) == 40.0
    assert lead.travelled(100.0) == pytest.approx(40.0 + 20.0**2 / 10.0)
    assert lead.speed_at(3.0) == 15.0 and lead.speed_at(10.0) == 0.0


def test_severity_of_path_episode(corpus):
    sc = load_scenario(SCENARIOS / "test_track_slow.json", corpus("path_follower_corrected").assets)
    res = run_episode(EpisodeConfig(sc, [corpus("path_follower_corrected")], watchdog_enabled=False))
    assert not res.crashed
    assert math.isinf(res.min_gap)
    assert res.severity == pytest.approx(1.75 - res.max_cross_track_error)
