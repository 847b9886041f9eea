"""The aggressive follower tailgates.  When the lead brakes hard the
runtime watchdog sees time-to-collision drop to its threshold, overrides
the throttle with a full brake and locks the app out for the rest of the
episode.  Without the watchdog the same episode ends in a collision."""

from __future__ import annotations

from avguard.pipeline.corpus import SCENARIOS, corpus_package
from avguard.sim.episode import EpisodeConfig, run_episode
from avguard.sim.scenario import load_scenario


def main():
    pkg = corpus_package("aggressive_follower")
    sc = load_scenario(SCENARIOS / "highway_brake.json")
    for enabled in (False, True):
        res = run_episode(EpisodeConfig(sc, [pkg], watchdog_enabled=enabled, seed=1))
        print(f"== watchdog {'on' if enabled else 'off'}")
        if res.crashed:
            print(f"   collision at t={res.crash_time:.2f} s")
        else:
            print(f"   no collision, minimum gap {res.min_gap:.2f} m, minimum TTC {res.min_ttc:.2f} s")
        for i in res.interventions[:5]:
            print(f"   t={i.time:5.2f} s  {i.action:8s} {i.command} {i.app_id}")
        if len(res.interventions) > 5:
            print(f"   ... {len(res.interventions) - 5} more declined commands")
        if res.lockout_time is not None:
            final = res.trajectory[-1]
            print(f"   app locked out from t={res.lockout_time:.2f} s; final speed {final.speed:.2f} m/s")


if __name__ == "__main__":
    main()
