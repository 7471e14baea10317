"""Feasibility theory for sequential coded matrix-vector multiplication.

A cluster has L workers, each storing an encoded matrix of at most n rows.
A configuration assigns k_i source rows to level i, with the contract that
the first ell levels are recoverable from any ell responding workers.  This
module answers which configurations fit: a closed-form per-level row budget,
an aggregate capacity test, and an independent brute-force oracle that
minimises the same row count by exhaustive search over integer allocations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator, Mapping

__all__ = [
    "Configuration",
    "RowBudget",
    "row_count_s",
    "check_feasible",
    "min_rows_oracle",
    "feasible_configs",
]


@dataclass(frozen=True)
class Configuration:
    """Cluster shape (L workers, n rows each) plus per-level row counts."""

    L: int
    n: int
    k: tuple[int, ...]

    def __post_init__(self) -> None:
        if self.L < 1:
            raise ValueError(f"L must be >= 1, got {self.L}")
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        k = tuple(int(v) for v in self.k)
        if len(k) != self.L:
            raise ValueError(f"expected {self.L} level counts, got {len(k)}")
        if any(v < 0 for v in k):
            raise ValueError(f"level counts must be non-negative, got {k}")
        object.__setattr__(self, "k", k)

    @property
    def capacity(self) -> int:
        """Total encoded rows the cluster can hold (n rows on L workers)."""
        return self.n * self.L

    def cumulative_ranks(self) -> tuple[int, ...]:
        """Prefix sums h_ell = k_1 + ... + k_ell for ell = 1..L."""
        out = []
        total = 0
        for v in self.k:
            total += v
            out.append(total)
        return tuple(out)


@dataclass(frozen=True)
class RowBudget:
    """Per-level encoded-row consumption and the capacity verdict."""

    s: tuple[int, ...]
    total: int
    capacity: int

    @property
    def feasible(self) -> bool:
        return self.total <= self.capacity


def row_count_s(i: int, k_i: int, L: int) -> int:
    """Encoded rows consumed by level i holding k_i source rows.

    Full blocks of i rows each cost L coded rows; a remainder block of
    (k_i mod i) rows costs L - i + (k_i mod i).
    """
    if not 1 <= i <= L:
        raise ValueError(f"level index {i} outside 1..{L}")
    if k_i < 0:
        raise ValueError(f"k_i must be non-negative, got {k_i}")
    full, rem = divmod(k_i, i)
    if rem == 0:
        return full * L
    return full * L + L - i + rem


def check_feasible(cfg: Configuration) -> RowBudget:
    """Aggregate row budget of a configuration against cluster capacity."""
    s = tuple(row_count_s(i, k_i, cfg.L) for i, k_i in enumerate(cfg.k, start=1))
    return RowBudget(s=s, total=sum(s), capacity=cfg.capacity)


def _nonincreasing_allocations(
    length: int, bound: int, best: list[int], partial: list[int], total: int
) -> Iterator[tuple[int, ...]]:
    """Yield nonincreasing integer vectors, pruning totals >= current best."""
    if total >= best[0]:
        return
    if len(partial) == length:
        yield tuple(partial)
        return
    cap = partial[-1] if partial else bound
    for v in range(cap, -1, -1):
        partial.append(v)
        yield from _nonincreasing_allocations(length, bound, best, partial, total + v)
        partial.pop()


def min_rows_oracle(
    L: int, i: int, k_i: int, *, max_workers: int = 6, max_rows: int = 24
) -> int:
    """Exact minimum of sum(n_ell) subject to every i-subset covering k_i rows.

    Brute force: worker symmetry lets the search range over nonincreasing
    allocations only, and no optimal allocation needs an entry above
    ceil(k_i / i) (an all-ceil allocation is already feasible, and any larger
    entry can be exchanged downward without breaking a subset constraint).
    Every size-i subset is then checked explicitly, so the result is an
    independent lower-bound witness for ``row_count_s``.
    """
    if not 1 <= i <= L:
        raise ValueError(f"level index {i} outside 1..{L}")
    if k_i < 0:
        raise ValueError(f"k_i must be non-negative, got {k_i}")
    if L > max_workers or k_i > max_rows:
        raise ValueError(
            f"instance (L={L}, k_i={k_i}) above oracle guard "
            f"(max_workers={max_workers}, max_rows={max_rows})"
        )
    if k_i == 0:
        return 0

    bound = math.ceil(k_i / i)
    best = [bound * L + 1]  # all-ceil allocation is feasible, so start above it
    subsets = list(combinations(range(L), i))
    for alloc in _nonincreasing_allocations(L, bound, best, [], 0):
        if all(sum(alloc[w] for w in subset) >= k_i for subset in subsets):
            total = sum(alloc)
            if total < best[0]:
                best[0] = total
    return best[0]


def _max_level_rows(i: int, L: int, budget: int) -> int:
    """Largest k_i whose row cost fits within the remaining budget."""
    if budget <= 0:
        return 0
    # row_count_s grows by at least L/i per source row, so k_i <= i*budget/L.
    hi = (i * budget) // L + i
    while hi > 0 and row_count_s(i, hi, L) > budget:
        hi -= 1
    return hi


def feasible_configs(
    L: int,
    n: int,
    targets: Mapping[int, int],
    *,
    limit: int | None = None,
) -> list[Configuration]:
    """Enumerate feasible configurations meeting cumulative-rank targets.

    ``targets`` maps a responder count ell to the minimum cumulative rank
    k_1 + ... + k_ell the configuration must provide by that ell.  Returns
    every feasible configuration satisfying all targets (or the first
    ``limit`` of them, in lexicographic k order).
    """
    if L < 1 or n < 1:
        raise ValueError("L and n must be positive")
    for ell, rank in targets.items():
        if not 1 <= ell <= L:
            raise ValueError(f"target level {ell} outside 1..{L}")
        if rank < 0:
            raise ValueError(f"target rank must be non-negative, got {rank}")

    capacity = n * L
    # cumulative requirement by each level (targets at earlier ell bind later)
    required = [0] * (L + 1)
    for ell, rank in targets.items():
        required[ell] = max(required[ell], rank)
    for ell in range(1, L + 1):
        required[ell] = max(required[ell], required[ell - 1])

    found: list[Configuration] = []

    def descend(level: int, k_prefix: list[int], used: int, cum: int) -> bool:
        if limit is not None and len(found) >= limit:
            return True
        if level > L:
            found.append(Configuration(L=L, n=n, k=tuple(k_prefix)))
            return limit is not None and len(found) >= limit
        remaining = capacity - used
        # even spending the whole remaining budget at the cheapest later level
        # cannot help if this level's cumulative requirement already fails
        max_future = sum(
            _max_level_rows(j, L, remaining) for j in range(level, L + 1)
        )
        if cum + max_future < required[L]:
            return False
        top = _max_level_rows(level, L, remaining)
        for k_i in range(0, top + 1):
            if cum + k_i + sum(
                _max_level_rows(j, L, remaining - row_count_s(level, k_i, L))
                for j in range(level + 1, L + 1)
            ) < required[L]:
                continue
            if cum + k_i < required[level]:
                continue
            cost = row_count_s(level, k_i, L)
            if used + cost > capacity:
                continue
            if descend(level + 1, k_prefix + [k_i], used + cost, cum + k_i):
                return True
        return False

    descend(1, [], 0, 0)
    return found
