"""Converse quantities and the storage/download trade-off curve, in exact rationals.

The optimal cost at ``mu = t/N`` is ``dtilde(t) = 1 + 1/t + ... + 1/t**(K-1)``;
between those corner points the optimum is the lower convex hull, which is
met both by memory sharing (achievable side) and by the ``N-1`` linear
bounds obtained from the uncoded-storage LP (converse side).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations_with_replacement
from math import comb, prod
from typing import Iterable, Sequence

from .core import PlacementFractions
from .simplex import solve


class DomainError(ValueError):
    pass


class MatrixError(ValueError):
    pass


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


def _check_mu(mu, N: int) -> Fraction:
    mu = _frac(mu)
    if not Fraction(1, N) <= mu <= 1:
        raise DomainError(f"mu={mu} outside [1/{N}, 1]")
    return mu


@lru_cache(maxsize=None)
def dtilde(t: int, K: int) -> Fraction:
    if t < 1 or K < 1:
        raise DomainError(f"dtilde needs t, K >= 1 (got t={t}, K={K})")
    return sum((Fraction(1, t**k) for k in range(K)), Fraction(0))


@lru_cache(maxsize=None)
def _chain_sum(n: int, m: int, N: int) -> Fraction:
    # sum over n = a_1 <= a_2 <= ... <= a_m <= N of 1/(a_1 ... a_m)
    if m == 1:
        return Fraction(1, n)
    return Fraction(1, n) * sum((_chain_sum(a, m - 1, N) for a in range(n, N + 1)), Fraction(0))


def s_function(n: int, k: int, N: int) -> Fraction:
    """``S(n, k)``: the nested harmonic sum with ``k-2`` inner summations.

    Term ``m`` (``m = 1 .. k-1``) sums ``1/(n n_2 ... n_m)`` over
    ``n <= n_2 <= ... <= n_m <= N``.
    """
    if not 1 <= n <= N or k < 1:
        raise DomainError(f"S(n={n}, k={k}) undefined for N={N}")
    return sum((_chain_sum(n, m, N) for m in range(1, k)), Fraction(0))


def alpha(l: int, k: int, N: int) -> Fraction:
    if not 1 <= l <= N or k < 1:
        raise DomainError(f"alpha(l={l}, k={k}) undefined for N={N}")
    return sum((comb(n, l) * s_function(n, k, N) for n in range(l, N + 1)), Fraction(0))


def gamma(l: int, j: int, N: int, K: int) -> Fraction:
    """Slack coefficient of ``x_l`` left after eliminating ``x_j`` and ``x_{j+1}``.

    The bound itself carries ``C(N, l) * gamma``; this returns the bare factor.
    """
    if not 1 <= j <= N - 1:
        raise DomainError(f"j={j} outside 1..{N - 1}")
    if not 1 <= l <= N or l in (j, j + 1):
        raise DomainError(f"l={l} must be in 1..{N} and differ from j={j}, j+1={j + 1}")
    return dtilde(l, K) + (l - j - 1) * dtilde(j, K) - (l - j) * dtilde(j + 1, K)


def line_bound(j: int, mu, N: int, K: int) -> Fraction:
    if not 1 <= j <= N - 1:
        raise DomainError(f"j={j} outside 1..{N - 1}")
    mu = _frac(mu)
    return (mu * N - j) * dtilde(j + 1, K) - (mu * N - j - 1) * dtilde(j, K)


def lower_bound(mu, N: int, K: int) -> Fraction:
    mu = _check_mu(mu, N)
    if N == 1:
        return dtilde(1, K)
    return max(line_bound(j, mu, N, K) for j in range(1, N))


@dataclass(frozen=True)
class RationalCurve:
    """Points strictly increasing in ``mu``; segments join consecutive points."""

    points: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        mus = [p[0] for p in self.points]
        if any(a >= b for a, b in zip(mus, mus[1:])):
            raise ValueError("curve points must be strictly increasing in mu")

    @property
    def segments(self) -> list[tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]]:
        return list(zip(self.points, self.points[1:]))

    def slopes(self) -> list[Fraction]:
        return [(b[1] - a[1]) / (b[0] - a[0]) for a, b in self.segments]

    def is_convex(self) -> bool:
        s = self.slopes()
        return all(a <= b for a, b in zip(s, s[1:]))

    def is_nonincreasing(self) -> bool:
        return all(a[1] >= b[1] for a, b in self.segments)

    def lower_hull(self) -> "RationalCurve":
        hull: list[tuple[Fraction, Fraction]] = []
        for p in self.points:
            while len(hull) >= 2:
                (x1, y1), (x2, y2) = hull[-2], hull[-1]
                # drop the middle point unless it lies strictly below the chord
                if (y2 - y1) * (p[0] - x1) >= (p[1] - y1) * (x2 - x1):
                    hull.pop()
                else:
                    break
            hull.append(p)
        return RationalCurve(tuple(hull))

    def __call__(self, mu) -> Fraction:
        mu = _frac(mu)
        pts = self.points
        if not pts[0][0] <= mu <= pts[-1][0]:
            raise DomainError(f"mu={mu} outside [{pts[0][0]}, {pts[-1][0]}]")
        for (x1, y1), (x2, y2) in self.segments:
            if x1 <= mu <= x2:
                return y1 + (y2 - y1) * (mu - x1) / (x2 - x1)
        return pts[0][1]


def corner_points(N: int, K: int) -> RationalCurve:
    return RationalCurve(tuple((Fraction(t, N), dtilde(t, K)) for t in range(1, N + 1)))


def hull_achievable(mu, N: int, K: int) -> Fraction:
    mu = _check_mu(mu, N)
    return corner_points(N, K).lower_hull()(mu)


def lp_objective(N: int, K: int) -> list[Fraction]:
    """Cost coefficients ``alpha(l, K)`` of ``x_1 .. x_N`` (plus the constant 1)."""
    return [alpha(l, K, N) for l in range(1, N + 1)]


def lp_lower_bound(mu, N: int, K: int) -> tuple[Fraction, tuple[Fraction, ...]]:
    """Minimize ``1 + sum alpha(l,K) x_l`` over valid uncoded placements."""
    mu = _check_mu(mu, N)
    c = lp_objective(N, K)
    A_eq = [[comb(N, l) for l in range(1, N + 1)]]
    A_ub = [[l * comb(N, l) for l in range(1, N + 1)]]
    res = solve(c, A_ub, [mu * N], A_eq, [1])
    return 1 + res.value, res.x


# -- general (coded or uncoded) lower bound ---------------------------------

@dataclass(frozen=True)
class LambdaMatrix:
    """``values[n][k]`` for ``n in 0..N``, ``k in 0..K``."""

    values: tuple[tuple[Fraction, ...], ...]

    @property
    def N(self) -> int:
        return len(self.values) - 1

    @property
    def K(self) -> int:
        return len(self.values[0]) - 1

    def __getitem__(self, nk: tuple[int, int]) -> Fraction:
        n, k = nk
        return self.values[n][k]

    def check(self) -> None:
        N, K = self.N, self.K
        for k in range(K + 1):
            if self[N, k] != 0:
                raise MatrixError(f"lambda(N={N}, k={k}) = {self[N, k]}, must be 0")
        for n in range(N + 1):
            if self[n, K] != 0:
                raise MatrixError(f"lambda(n={n}, K={K}) = {self[n, K]}, must be 0")
        for k in range(K):
            if self[0, k] != 1:
                raise MatrixError(f"lambda(0, k={k}) = {self[0, k]}, must be 1")


def lambda_from_x(x: PlacementFractions | Sequence, N: int, K: int) -> LambdaMatrix:
    xs = tuple(_frac(v) for v in (x.x if isinstance(x, PlacementFractions) else x))
    if len(xs) != N:
        raise ValueError(f"need {N} fractions, got {len(xs)}")
    rows = []
    for n in range(N + 1):
        lam = sum((comb(N - n, l) * xs[l - 1] for l in range(1, N - n + 1)), Fraction(0))
        rows.append(tuple(lam if k < K else Fraction(0) for k in range(K + 1)))
    return LambdaMatrix(tuple(rows))


def replicated_lambda(N: int, K: int) -> LambdaMatrix:
    return LambdaMatrix(tuple(
        tuple(Fraction(1) if n == 0 and k < K else Fraction(0) for k in range(K + 1)) for n in range(N + 1)
    ))


def theorem1_coefficients(N: int, K: int) -> dict[tuple[int, int], Fraction]:
    """Weight of each ``lambda(n, k)`` in the general bound, ``k = 1 .. K-1``."""
    out: dict[tuple[int, int], Fraction] = {}
    for k in range(1, K):
        for n1 in range(1, N + 1):
            out[(N - n1, k)] = _chain_sum(n1, k, N)
    return out


def theorem1_general(lam: LambdaMatrix, N: int, K: int) -> Fraction:
    """``1 + sum_k sum_{n_1 <= ... <= n_k} lambda(N - n_1, k) / (n_1 ... n_k)``."""
    if (lam.N, lam.K) != (N, K):
        raise MatrixError(f"lambda matrix is {lam.N}x{lam.K}, expected {N}x{K}")
    lam.check()
    total = Fraction(1)
    for k in range(1, K):
        for chain in combinations_with_replacement(range(1, N + 1), k):
            total += lam[N - chain[0], k] / prod(chain)
    return total


# -- CSV export -------------------------------------------------------------

CURVE_HEADER = ["mu_num", "mu_den", "D_num", "D_den", "D_float"]


def curve_rows(points: Iterable[tuple[Fraction, Fraction]]) -> list[list]:
    return [[mu.numerator, mu.denominator, d.numerator, d.denominator, f"{float(d):.12g}"] for mu, d in points]


def write_curve_csv(fh, points: Iterable[tuple[Fraction, Fraction]]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CURVE_HEADER)
    w.writerows(curve_rows(points))


def read_curve_csv(fh) -> list[tuple[Fraction, Fraction]]:
    r = csv.DictReader(fh)
    if r.fieldnames != CURVE_HEADER:
        raise ValueError(f"unexpected header {r.fieldnames}")
    return [(Fraction(int(row["mu_num"]), int(row["mu_den"])), Fraction(int(row["D_num"]), int(row["D_den"])))
            for row in r]


def mu_grid(N: int, points: int) -> list[Fraction]:
    """``points`` evenly spaced rationals on ``[1/N, 1]``."""
    lo = Fraction(1, N)
    if points == 1 or N == 1:
        return [Fraction(1)] if N == 1 else [lo]
    return [lo + (1 - lo) * Fraction(i, points - 1) for i in range(points)]
