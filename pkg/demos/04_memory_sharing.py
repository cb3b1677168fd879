#!/usr/bin/env python3
"""Reach a storage level between two corner points by mixing the two schemes.

At N=K=3 and mu=1/2 the message splits into 8 copies' worth of the t=1
scheme and one of the t=2 scheme, 48 bits in all.  The blend costs 19/8,
on the line between (1/3, 3) and (2/3, 7/4).
"""

from fractions import Fraction

from scpir import TrialConfig, run_trial
from scpir.bounds import hull_achievable
from scpir.harness import sharing_plan

for mu in (Fraction(1, 2), Fraction(5, 9), Fraction(5, 6)):
    sp = sharing_plan(3, 3, mu)
    r = run_trial(TrialConfig(3, 3, mu=mu, desired="all", seed=3))
    print(f"mu={mu}: t={sp.t} and {sp.t + 1} alpha={sp.alpha} copies={sp.a}+{sp.b} L={sp.L_total}")
    print(f"  cost={r.cost} (hull {hull_achievable(mu, 3, 3)})  storage {r.storage_per_db}/{r.storage_limit}"
          f"  decoded={r.decode_exact}")
