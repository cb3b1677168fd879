"""Exact two-phase simplex over ``fractions.Fraction`` with Bland's rule.

Solves ``min c.x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``,
``x >= 0``.  Problems here have a handful of rows and at most a dozen
columns, so a dense tableau is plenty.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction


class InfeasibleError(ValueError):
    pass


class UnboundedError(ValueError):
    pass


@dataclass(frozen=True)
class LpResult:
    value: Fraction
    x: tuple[Fraction, ...]
    basis: tuple[int, ...]
    pivots: int


def _pivot(T: list[list[Fraction]], basis: list[int], row: int, col: int) -> None:
    piv = T[row][col]
    T[row] = [v / piv for v in T[row]]
    for r in range(len(T)):
        if r != row and T[r][col] != 0:
            f = T[r][col]
            T[r] = [a - f * b for a, b in zip(T[r], T[row])]
    basis[row] = col


def _run(T, basis, cost, allowed) -> int:
    """Minimize ``cost`` over the tableau ``T`` in place; returns pivot count.

    ``T`` rows are ``[a_1 .. a_n | b]``.  Bland's rule: entering column is the
    lowest-index improving one, leaving row breaks ratio ties by lowest basic
    index.
    """
    m = len(T)
    n = len(T[0]) - 1
    pivots = 0
    while True:
        # reduced costs c_j - c_B B^-1 A_j
        enter = None
        for j in range(n):
            if j not in allowed or j in basis:
                continue
            rc = cost[j] - sum(cost[basis[r]] * T[r][j] for r in range(m))
            if rc < 0:
                enter = j
                break
        if enter is None:
            return pivots
        leave = None
        best = None
        for r in range(m):
            a = T[r][enter]
            if a > 0:
                ratio = T[r][n] / a
                if best is None or ratio < best or (ratio == best and basis[r] < basis[leave]):
                    best, leave = ratio, r
        if leave is None:
            raise UnboundedError("objective unbounded below")
        _pivot(T, basis, leave, enter)
        pivots += 1


def solve(c, A_ub=(), b_ub=(), A_eq=(), b_eq=()) -> LpResult:
    c = [Fraction(v) for v in c]
    nx = len(c)
    rows: list[tuple[list[Fraction], Fraction, bool]] = []
    for a, b in zip(A_ub, b_ub):
        rows.append(([Fraction(v) for v in a], Fraction(b), True))
    for a, b in zip(A_eq, b_eq):
        rows.append(([Fraction(v) for v in a], Fraction(b), False))
    m = len(rows)
    n_slack = sum(1 for _, _, ub in rows if ub)
    ncol = nx + n_slack + m  # structural | slacks | artificials
    T = []
    slack = nx
    for r, (a, b, ub) in enumerate(rows):
        if len(a) != nx:
            raise ValueError(f"row {r} has {len(a)} coefficients, expected {nx}")
        row = a + [Fraction(0)] * (ncol - nx) + [b]
        if ub:
            row[slack] = Fraction(1)
            slack += 1
        if b < 0:
            row = [-v for v in row]
        row[nx + n_slack + r] = Fraction(1)
        T.append(row)
    basis = [nx + n_slack + r for r in range(m)]

    # phase 1: drive artificials to zero
    art = set(range(nx + n_slack, ncol))
    cost1 = [Fraction(0)] * (nx + n_slack) + [Fraction(1)] * m
    pivots = _run(T, basis, cost1, set(range(ncol)))
    if any(T[r][-1] != 0 for r in range(m) if basis[r] in art):
        raise InfeasibleError("constraints admit no nonnegative solution")
    # pivot remaining (zero-valued) artificials out where possible
    for r in range(m):
        if basis[r] in art:
            for j in range(nx + n_slack):
                if j not in basis and T[r][j] != 0:
                    _pivot(T, basis, r, j)
                    pivots += 1
                    break
    keep = [r for r in range(m) if basis[r] not in art]  # others are redundant rows
    T = [T[r] for r in keep]
    basis = [basis[r] for r in keep]

    cost2 = c + [Fraction(0)] * (ncol - nx)
    pivots += _run(T, basis, cost2, set(range(nx + n_slack)))
    x = [Fraction(0)] * nx
    for r, j in enumerate(basis):
        if j < nx:
            x[j] = T[r][-1]
    value = sum((ci * xi for ci, xi in zip(c, x)), Fraction(0))
    return LpResult(value, tuple(x), tuple(basis), pivots)
