"""Straggler cluster simulation: random worker latencies and order statistics."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "LatencyModel",
    "RoundOutcome",
    "SeededRng",
    "sample_round",
    "order_stat_mean",
    "simulate_wait",
]

_KINDS = ("exponential", "deterministic", "shifted-exponential")


@dataclass(frozen=True)
class LatencyModel:
    """Per-round worker completion-time distribution."""

    kind: str
    rate: float = 1.0
    value: float = 1.0
    shift: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"unknown latency kind {self.kind!r}, expected {_KINDS}")
        if self.kind in ("exponential", "shifted-exponential") and self.rate <= 0:
            raise ValueError(f"rate must be positive, got {self.rate}")
        if self.kind == "deterministic" and self.value < 0:
            raise ValueError(f"deterministic value must be >= 0, got {self.value}")
        if self.kind == "shifted-exponential" and self.shift < 0:
            raise ValueError(f"shift must be >= 0, got {self.shift}")

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "LatencyModel":
        return cls(kind="exponential", rate=rate)

    @classmethod
    def deterministic(cls, value: float) -> "LatencyModel":
        return cls(kind="deterministic", value=value)

    @classmethod
    def shifted_exponential(cls, shift: float, rate: float) -> "LatencyModel":
        return cls(kind="shifted-exponential", shift=shift, rate=rate)


class SeededRng:
    """Keyed deterministic RNG tree.

    A root seed plus a spawn-key path fully determines the stream, so any
    substream (per replication, per round) is reproducible independently of
    draw order elsewhere.
    """

    def __init__(self, seed: int, _key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self._key = _key
        self._gen: np.random.Generator | None = None

    def spawn(self, *key: int) -> "SeededRng":
        return SeededRng(self.seed, self._key + tuple(int(k) for k in key))

    @property
    def generator(self) -> np.random.Generator:
        if self._gen is None:
            ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self._key)
            self._gen = np.random.Generator(np.random.PCG64(ss))
        return self._gen

    def uniform_open_closed(self, size: int) -> np.ndarray:
        """Uniform draws in (0, 1], suitable for -log(u) inversions."""
        return 1.0 - self.generator.random(size)


@dataclass(frozen=True)
class RoundOutcome:
    """Finish times of one computation round plus their arrival order."""

    finish_times: np.ndarray
    order: np.ndarray  # worker positions sorted by finish time, ties by index

    @property
    def sorted_times(self) -> np.ndarray:
        return self.finish_times[self.order]

    def elapsed(self, ell: int) -> float:
        """The ell-th order statistic T_(ell)."""
        L = len(self.finish_times)
        if not 1 <= ell <= L:
            raise ValueError(f"ell={ell} outside 1..{L}")
        return float(self.sorted_times[ell - 1])

    def responders(self, ell: int) -> tuple[int, ...]:
        """Worker ids (1-based) of the ell earliest finishers, sorted."""
        L = len(self.finish_times)
        if not 1 <= ell <= L:
            raise ValueError(f"ell={ell} outside 1..{L}")
        return tuple(sorted(int(w) + 1 for w in self.order[:ell]))


def sample_round(model: LatencyModel, L: int, rng: SeededRng) -> RoundOutcome:
    """Draw one round of L independent worker finish times."""
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    if model.kind == "deterministic":
        times = np.full(L, model.value)
    else:
        u = rng.uniform_open_closed(L)
        times = -np.log(u) / model.rate
        if model.kind == "shifted-exponential":
            times = model.shift + times
    order = np.argsort(times, kind="stable")
    return RoundOutcome(finish_times=times, order=order)


def order_stat_mean(model: LatencyModel, L: int, ell: int) -> float:
    """Mean of T_(ell) for i.i.d. exponential latencies: (1/rate) * sum_{j=L-ell+1}^{L} 1/j."""
    if model.kind != "exponential":
        raise ValueError(
            f"closed-form order-statistic mean needs an exponential model, "
            f"got {model.kind!r}"
        )
    if not 1 <= ell <= L:
        raise ValueError(f"ell={ell} outside 1..{L}")
    return sum(1.0 / j for j in range(L - ell + 1, L + 1)) / model.rate


def simulate_wait(
    model: LatencyModel, L: int, ell_target: int, rng: SeededRng
) -> tuple[float, tuple[int, ...]]:
    """Wait until ell_target workers finish; return (T_(ell), responder ids)."""
    outcome = sample_round(model, L, rng)
    return outcome.elapsed(ell_target), outcome.responders(ell_target)
