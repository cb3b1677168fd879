#!/usr/bin/env python3
"""Storage against download cost: the achievable curve and the converse meet.

Prints, for N=K=3, the corner points, the two converse lines, and on a grid
of storage fractions the memory-sharing cost, the line bound, the LP bound
and the cost actually measured by running the scheme.
"""

import sys

from scpir import bounds
from scpir.harness import sweep, write_sweep_csv

N, K = 3, 3

print("corner points:")
for mu, d in bounds.corner_points(N, K).points:
    print(f"  mu={mu}  D={d}  ({float(d):.4f})")

for j in range(1, N):
    a = bounds.line_bound(j, 0, N, K)
    print(f"line j={j}: D >= {a} - {a - bounds.line_bound(j, 1, N, K)} mu")

rows = sweep(N, K, bounds.mu_grid(N, 7))
print(f"\n{'mu':>6} {'hull':>8} {'lines':>8} {'LP':>8} {'measured':>9}")
for r in rows:
    print(f"{str(r.mu):>6} {str(r.achievable):>8} {str(r.lower):>8} {str(r.lp):>8} {str(r.measured):>9}")

if len(sys.argv) > 1:
    with open(sys.argv[1], "w", newline="") as fh:
        write_sweep_csv(fh, rows)
    print("wrote", sys.argv[1])
