#!/usr/bin/env python3
"""Run the databases as TCP servers and retrieve through sockets.

The same seed gives the same answers and the same decoded bytes as the
in-process run, which the digests make easy to compare.
"""

from scpir import TrialConfig, run_trial

for mode in ("inproc", "net"):
    r = run_trial(TrialConfig(4, 3, t=2, seed=5, desired="all", mode=mode))
    print(f"{mode:>6}: cost={r.cost} per-db={r.downloaded_per_db} answers={r.answers_digest[:16]} "
          f"decoded={r.decoded_digest[:16]} {r.wall_time * 1000:.1f} ms")
