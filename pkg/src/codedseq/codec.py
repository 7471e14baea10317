"""Systematic real-valued MDS coding for sequential distributed multiplication.

Each level-i source matrix is split into blocks of i rows (plus a remainder
block), every block is expanded with a systematic MDS code whose parity part
is a Cauchy matrix, and the coded rows are dealt across the L workers so that
any ell responders jointly determine levels 1..ell.  Decoding inverts one
small generator submatrix per block.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np

from .feasibility import Configuration, check_feasible

__all__ = [
    "InfeasibleConfiguration",
    "PackingFailure",
    "InsufficientResults",
    "RowTag",
    "BlockSplit",
    "SystematicGenerator",
    "SourceMatrices",
    "WorkerMatrix",
    "WorkerResult",
    "split_matrix",
    "make_generator",
    "encode_all",
    "worker_multiply",
    "decode_prefix",
    "dump_rows",
]

MDS_CHECK_LIMIT = 12  # exhaustive submatrix check is O(C(rows_out, rows_in))


class InfeasibleConfiguration(ValueError):
    """The configuration violates the row-budget bound."""


class PackingFailure(RuntimeError):
    """No remainder-row placement respects per-worker capacity."""


class InsufficientResults(RuntimeError):
    """A block lacks enough coded rows among the responding workers."""


@dataclass(frozen=True)
class RowTag:
    """Provenance of one coded row: level (1-based), block and row (0-based)."""

    level: int
    block: int
    row: int
    systematic: bool


@dataclass(frozen=True)
class BlockSplit:
    """Vertical split of one source matrix into full blocks plus remainder."""

    level: int
    full_blocks: tuple[np.ndarray, ...]
    remainder: np.ndarray | None


@dataclass(frozen=True)
class SystematicGenerator:
    """rows_out x rows_in generator whose top square block is the identity."""

    rows_in: int
    rows_out: int
    coefficients: np.ndarray

    @property
    def parity_rows(self) -> int:
        return self.rows_out - self.rows_in


@dataclass(frozen=True)
class SourceMatrices:
    """The L per-level source matrices sharing a common column count."""

    matrices: tuple[np.ndarray, ...]
    m: int

    def __post_init__(self) -> None:
        mats = tuple(np.asarray(a, dtype=float) for a in self.matrices)
        for a in mats:
            if a.ndim != 2:
                raise ValueError("source matrices must be 2-dimensional")
            if a.shape[1] != self.m:
                raise ValueError(
                    f"source matrix has {a.shape[1]} columns, expected {self.m}"
                )
        object.__setattr__(self, "matrices", mats)

    @property
    def level_rows(self) -> tuple[int, ...]:
        return tuple(a.shape[0] for a in self.matrices)


@dataclass(frozen=True)
class WorkerMatrix:
    """One worker's stored coded rows with per-row provenance tags."""

    worker_id: int
    rows: np.ndarray
    tags: tuple[RowTag, ...]


@dataclass(frozen=True)
class WorkerResult:
    """One worker's multiplication output, tags preserved."""

    worker_id: int
    y: np.ndarray
    tags: tuple[RowTag, ...]


def split_matrix(A_i: np.ndarray, level: int) -> BlockSplit:
    """Split a level-i matrix into consecutive i-row blocks plus remainder."""
    A_i = np.asarray(A_i, dtype=float)
    if level < 1:
        raise ValueError(f"level must be >= 1, got {level}")
    if A_i.ndim != 2:
        raise ValueError("expected a 2-dimensional matrix")
    k_i = A_i.shape[0]
    nfull = k_i // level
    rem = k_i % level
    full = tuple(A_i[j * level : (j + 1) * level] for j in range(nfull))
    remainder = A_i[nfull * level :] if rem else None
    return BlockSplit(level=level, full_blocks=full, remainder=remainder)


def _cauchy_parity(rows_in: int, parity: int) -> np.ndarray:
    # nodes rows_in..rows_in+parity-1 against 0..rows_in-1 are disjoint, so
    # every square submatrix of the Cauchy block is invertible
    r = np.arange(rows_in, rows_in + parity, dtype=float)[:, None]
    c = np.arange(rows_in, dtype=float)[None, :]
    return 1.0 / (r - c)


@lru_cache(maxsize=None)
def make_generator(rows_in: int, rows_out: int) -> SystematicGenerator:
    """Deterministic systematic MDS generator (identity over Cauchy parity).

    For rows_out <= MDS_CHECK_LIMIT every square submatrix is verified
    invertible; failure raises, since decoding correctness depends on it.
    """
    if not 1 <= rows_in <= rows_out:
        raise ValueError(f"need 1 <= rows_in <= rows_out, got ({rows_in}, {rows_out})")
    coeffs = np.vstack(
        [np.eye(rows_in), _cauchy_parity(rows_in, rows_out - rows_in)]
    )
    coeffs.setflags(write=False)
    gen = SystematicGenerator(rows_in=rows_in, rows_out=rows_out, coefficients=coeffs)
    if rows_out <= MDS_CHECK_LIMIT:
        for rows in combinations(range(rows_out), rows_in):
            sub = coeffs[list(rows)]
            sv = np.linalg.svd(sub, compute_uv=False)
            if sv[-1] <= 1e-10 * max(sv[0], 1.0):
                raise ArithmeticError(
                    f"MDS self-check failed for rows {rows} of generator "
                    f"({rows_in}, {rows_out})"
                )
    return gen


def encode_all(src: SourceMatrices, cfg: Configuration) -> list[WorkerMatrix]:
    """Encode all source matrices and deal the coded rows across L workers.

    Full-block row r goes to worker r+1.  Remainder-block rows go one each to
    the currently least-loaded workers (ties to the lower worker index),
    levels processed in increasing order.
    """
    if len(src.matrices) != cfg.L:
        raise ValueError(f"expected {cfg.L} source matrices, got {len(src.matrices)}")
    if src.level_rows != cfg.k:
        raise ValueError(
            f"source row counts {src.level_rows} do not match configuration {cfg.k}"
        )
    budget = check_feasible(cfg)
    if not budget.feasible:
        raise InfeasibleConfiguration(
            f"row budget {budget.total} exceeds capacity {budget.capacity}"
        )

    per_worker: list[list[tuple[np.ndarray, RowTag]]] = [[] for _ in range(cfg.L)]
    loads = [0] * cfg.L

    for level, A_i in enumerate(src.matrices, start=1):
        splits = split_matrix(A_i, level)
        for j, block in enumerate(splits.full_blocks):
            gen = make_generator(level, cfg.L)
            coded = gen.coefficients @ block
            for r in range(cfg.L):
                tag = RowTag(level=level, block=j, row=r, systematic=r < level)
                per_worker[r].append((coded[r], tag))
                loads[r] += 1
        if splits.remainder is not None:
            rem = splits.remainder.shape[0]
            rows_out = cfg.L - level + rem
            gen = make_generator(rem, rows_out)
            coded = gen.coefficients @ splits.remainder
            order = sorted(range(cfg.L), key=lambda w: (loads[w], w))
            homes = order[:rows_out]
            for r, w in enumerate(homes):
                if loads[w] >= cfg.n:
                    raise PackingFailure(
                        f"worker {w + 1} full while placing remainder of level {level}"
                    )
                tag = RowTag(
                    level=level, block=len(splits.full_blocks), row=r,
                    systematic=r < rem,
                )
                per_worker[w].append((coded[r], tag))
                loads[w] += 1

    workers = []
    for w, entries in enumerate(per_worker):
        if len(entries) > cfg.n:
            raise PackingFailure(f"worker {w + 1} holds {len(entries)} > n rows")
        rows = (
            np.vstack([e[0] for e in entries])
            if entries
            else np.empty((0, src.m))
        )
        rows.setflags(write=False)
        workers.append(
            WorkerMatrix(
                worker_id=w + 1, rows=rows, tags=tuple(e[1] for e in entries)
            )
        )
    assert sum(len(w.tags) for w in workers) == budget.total
    return workers


def worker_multiply(worker: WorkerMatrix, z: np.ndarray) -> WorkerResult:
    """One worker's subtask: multiply its stored rows by z."""
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.shape[0] != worker.rows.shape[1]:
        raise ValueError(
            f"vector of shape {z.shape} does not match worker matrix "
            f"with {worker.rows.shape[1]} columns"
        )
    return WorkerResult(worker_id=worker.worker_id, y=worker.rows @ z, tags=worker.tags)


def decode_prefix(
    results: Sequence[WorkerResult], cfg: Configuration
) -> list[np.ndarray]:
    """Recover [A_1 z, ..., A_ell z] from the results of ell distinct workers.

    Per block, any rows_in received entries determine the block product by
    inverting the corresponding generator submatrix (LU solve); systematic
    rows are preferred so that full-response decoding reduces to copying.
    """
    ell = len(results)
    if ell == 0:
        raise ValueError("need at least one worker result")
    if ell > cfg.L:
        raise ValueError(f"got {ell} results for a cluster of {cfg.L} workers")
    ids = [r.worker_id for r in results]
    if len(set(ids)) != ell:
        raise ValueError(f"worker results must come from distinct workers, got {ids}")

    pool: dict[tuple[int, int], list[tuple[int, float]]] = {}
    for res in results:
        if len(res.tags) != len(res.y):
            raise ValueError(
                f"worker {res.worker_id}: {len(res.y)} values for {len(res.tags)} tags"
            )
        for value, tag in zip(res.y, res.tags):
            pool.setdefault((tag.level, tag.block), []).append((tag.row, value))

    decoded: list[np.ndarray] = []
    for level in range(1, ell + 1):
        k_i = cfg.k[level - 1]
        nfull, rem = divmod(k_i, level)
        pieces = []
        for j in range(nfull + (1 if rem else 0)):
            rows_in = level if j < nfull else rem
            rows_out = cfg.L if j < nfull else cfg.L - level + rem
            got = sorted(pool.get((level, j), []))
            if len(got) < rows_in:
                raise InsufficientResults(
                    f"level {level} block {j}: {len(got)} rows received, "
                    f"{rows_in} needed"
                )
            sel = got[:rows_in]
            idx = [r for r, _ in sel]
            y = np.array([v for _, v in sel])
            if idx == list(range(rows_in)):
                pieces.append(y)  # systematic rows: message verbatim
            else:
                gen = make_generator(rows_in, rows_out)
                pieces.append(np.linalg.solve(gen.coefficients[idx], y))
        decoded.append(np.concatenate(pieces) if pieces else np.empty(0))
    return decoded


def dump_rows(
    workers: Iterable[WorkerMatrix], cfg: Configuration
) -> Iterator[dict[str, object]]:
    """Per-coded-row provenance records (for the CSV debug dump)."""
    for worker in workers:
        for tag in worker.tags:
            k_i = cfg.k[tag.level - 1]
            nfull, rem = divmod(k_i, tag.level)
            rows_in = tag.level if tag.block < nfull else rem
            rows_out = cfg.L if tag.block < nfull else cfg.L - tag.level + rem
            gen = make_generator(rows_in, rows_out)
            coeffs = " ".join(f"{c:.17g}" for c in gen.coefficients[tag.row])
            yield {
                "worker_id": worker.worker_id,
                "level": tag.level,
                "block": tag.block,
                "row": tag.row,
                "systematic": int(tag.systematic),
                "coefficients": coeffs,
            }
