"""The faithful path follower steers straight at its next waypoint.  On the
gentle part of the test track that is good enough; on the tight arc the
demanded yaw rate exceeds what the tyres can give and control is lost.
Once off the path the faithful app opens the throttle; the corrected one
brakes instead, which turns some of those crashes into recoveries."""

from __future__ import annotations

from avguard.pipeline.corpus import SCENARIOS, corpus_package
from avguard.sim.episode import EpisodeConfig, run_episode
from avguard.sim.scenario import path_following


def main():
    for name in ("path_follower_faithful", "path_follower_corrected"):
        pkg = corpus_package(name)
        table = next(t for t in pkg.program.tables.values() if t.rows)
        print(f"== {name}")
        for speed in (5.0, 8.0, 10.0, 12.0):
            res = run_episode(EpisodeConfig(path_following(table.rows, speed), [pkg], watchdog_enabled=False))
            outcome = f"crash at t={res.crash_time:.2f} s" if res.crashed else "completed"
            print(f"   {speed:4.1f} m/s: max cross-track {res.max_cross_track_error:.3f} m, "
                  f"loss of control {res.loss_of_control}, {outcome}")
    print(f"\nscenario files used by the CLI live in {SCENARIOS}")


if __name__ == "__main__":
    main()
