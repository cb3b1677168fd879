"""Parameters, sub-message labels and placement bookkeeping.

Database and message indices are 1-based (``DB_1 .. DB_N``, ``W_1 .. W_K``);
bit positions inside a chunk are 0-based offsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from math import comb

import numpy as np

Label = tuple[int, ...]


class ParameterError(ValueError):
    """Raised when (N, K, t) or an index falls outside its admissible range."""


class StructureError(ValueError):
    """Raised when a sub-message table is incomplete or inconsistent."""


@dataclass(frozen=True)
class Parameters:
    N: int
    K: int
    t: int

    @property
    def mu(self) -> Fraction:
        return Fraction(self.t, self.N)

    @property
    def chunk_size(self) -> int:
        """Bits per sub-message, ``t**K``."""
        return self.t**self.K

    @property
    def L(self) -> int:
        return comb(self.N, self.t) * self.chunk_size

    @cached_property
    def labels(self) -> list[Label]:
        return submessage_labels(self.N, self.t)

    @cached_property
    def label_rank(self) -> dict[Label, int]:
        return {s: r for r, s in enumerate(self.labels)}

    def blocks_of(self, db: int) -> list[Label]:
        """Labels whose sub-messages are stored at ``db``, in canonical order."""
        return [s for s in self.labels if db in s]


def make_params(N: int, K: int, t: int) -> Parameters:
    for name, value in (("N", N), ("K", K), ("t", t)):
        if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
            raise ParameterError(f"{name} must be an integer, got {value!r}")
    if N < 1:
        raise ParameterError(f"N must be >= 1, got N={N}")
    if K < 1:
        raise ParameterError(f"K must be >= 1, got K={K}")
    if t < 1:
        raise ParameterError(f"t must be >= 1, got t={t}")
    if t > N:
        raise ParameterError(f"t must be <= N, got t={t} > N={N}")
    return Parameters(int(N), int(K), int(t))


def submessage_labels(N: int, t: int) -> list[Label]:
    """All size-``t`` subsets of ``1..N`` in lexicographic order."""
    if not 1 <= t <= N:
        raise ParameterError(f"need 1 <= t <= N, got t={t}, N={N}")
    return list(combinations(range(1, N + 1), t))


@dataclass(frozen=True)
class SubmessageTable:
    """Chunks ``W_{k,S}`` keyed by ``(k, S)``.

    Scheme placements only use size-``t`` labels, but the table accepts any
    nonempty label so that arbitrary uncoded placements can be described.
    """

    N: int
    K: int
    L: int
    chunks: dict[tuple[int, Label], np.ndarray]

    def message(self, k: int) -> np.ndarray:
        parts = [self.chunks[key] for key in sorted(self.chunks) if key[0] == k]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=np.uint8)


@dataclass(frozen=True)
class PlacementFractions:
    x: tuple[Fraction, ...]

    @property
    def N(self) -> int:
        return len(self.x)

    def size_total(self) -> Fraction:
        return sum((comb(self.N, l) * xl for l, xl in enumerate(self.x, 1)), Fraction(0))

    def storage_total(self) -> Fraction:
        return sum((l * comb(self.N, l) * xl for l, xl in enumerate(self.x, 1)), Fraction(0))

    def is_valid(self, mu: Fraction | None = None) -> bool:
        if any(xl < 0 for xl in self.x) or self.size_total() != 1:
            return False
        return mu is None or self.storage_total() <= mu * self.N


def _check_table(table: SubmessageTable) -> None:
    for (k, s), bits in table.chunks.items():
        if not 1 <= k <= table.K:
            raise StructureError(f"message index {k} outside 1..{table.K}")
        if not s or list(s) != sorted(set(s)) or s[0] < 1 or s[-1] > table.N:
            raise StructureError(f"bad label {s!r} for N={table.N}")
    for k in range(1, table.K + 1):
        total = sum(len(b) for (j, _), b in table.chunks.items() if j == k)
        if total != table.L:
            raise StructureError(f"message {k} has {total} bits in the table, expected L={table.L}")


def placement_fractions(table: SubmessageTable, params: Parameters | None = None) -> PlacementFractions:
    """Normalized average chunk size ``x_l`` for every replication level ``l``."""
    if params is not None and (params.N, params.K, params.L) != (table.N, table.K, table.L):
        raise StructureError("table does not match the given parameters")
    _check_table(table)
    N, K, L = table.N, table.K, table.L
    sizes = [0] * (N + 1)
    for (_, s), bits in table.chunks.items():
        sizes[len(s)] += len(bits)
    return PlacementFractions(tuple(Fraction(sizes[l], K * comb(N, l) * L) for l in range(1, N + 1)))


def scheme_fractions(params: Parameters) -> PlacementFractions:
    """Fractions of the scheme placement: ``x_t = 1/C(N,t)``, zero elsewhere."""
    N, t = params.N, params.t
    return PlacementFractions(tuple(Fraction(1, comb(N, t)) if l == t else Fraction(0) for l in range(1, N + 1)))
