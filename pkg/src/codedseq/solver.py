"""Sequential-approximation proximal-gradient lasso solver.

The solver minimises 0.5*||F x - b||^2 + gamma*||x||_1 through R phases.
Phase r replaces F by its rank-r_r SVD truncation; the per-iteration product
H_(r) x is obtained through the coded cluster (encode once, then per
iteration: wait for the ell(r) fastest workers, decode the singular-vector
inner products, finish the product user-side).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cluster import LatencyModel, SeededRng, simulate_wait
from .codec import SourceMatrices, WorkerMatrix, decode_prefix, encode_all, worker_multiply
from .feasibility import Configuration, check_feasible

__all__ = [
    "LassoProblem",
    "SvdFactors",
    "Phase",
    "ApproxSchedule",
    "CodedMatvecSystem",
    "SolverState",
    "IterationRecord",
    "RunTrace",
    "soft_threshold",
    "truncate_svd",
    "build_level_blocks",
    "sequential_matvec",
    "run_sequential",
    "run_baseline",
    "baseline_schedule",
    "reference_solution",
    "optimality_residual",
    "subgradient_residual",
]


@dataclass(frozen=True)
class LassoProblem:
    """Data (F, b) and regularisation weight gamma of one lasso instance."""

    F: np.ndarray
    b: np.ndarray
    gamma: float

    def __post_init__(self) -> None:
        F = np.asarray(self.F, dtype=float)
        b = np.asarray(self.b, dtype=float)
        if F.ndim != 2 or b.ndim != 1 or b.shape[0] != F.shape[0]:
            raise ValueError(
                f"inconsistent shapes: F {F.shape}, b {b.shape}"
            )
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "b", b)

    @property
    def rows(self) -> int:
        return self.F.shape[0]

    @property
    def cols(self) -> int:
        return self.F.shape[1]

    def objective(self, x: np.ndarray) -> float:
        r = self.F @ x - self.b
        return 0.5 * float(r @ r) + self.gamma * float(np.abs(x).sum())


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD F = U diag(sigma) V^T with positive singular values."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @classmethod
    def from_matrix(cls, F: np.ndarray, rcond: float = 1e-12) -> "SvdFactors":
        U, s, Vt = np.linalg.svd(np.asarray(F, dtype=float), full_matrices=False)
        keep = s > rcond * (s[0] if s.size else 0.0)
        return cls(U=U[:, keep], sigma=s[keep], V=Vt[keep].T)

    @property
    def rank(self) -> int:
        return int(self.sigma.shape[0])

    def dense(self) -> np.ndarray:
        return self.U @ (self.sigma[:, None] * self.V.T)

    def gradient_offset(self, b: np.ndarray, rank: int | None = None) -> np.ndarray:
        """F_(r)^T b for the rank-r truncation (full rank by default)."""
        r = self.rank if rank is None else rank
        return self.V[:, :r] @ (self.sigma[:r] * (self.U[:, :r].T @ b))


def truncate_svd(svd: SvdFactors, rank: int) -> SvdFactors:
    """Leading-rank factor view (no densification)."""
    if not 1 <= rank <= svd.rank:
        raise ValueError(f"rank {rank} outside 1..{svd.rank}")
    return SvdFactors(U=svd.U[:, :rank], sigma=svd.sigma[:rank], V=svd.V[:, :rank])


def build_level_blocks(V: np.ndarray, cfg: Configuration) -> SourceMatrices:
    """Stack right-singular-vector rows into the per-level source matrices.

    Level i receives rows h_{i-1}+1 .. h_i of V^T, h being the cumulative
    configuration counts.
    """
    V = np.asarray(V, dtype=float)
    d = V.shape[1]
    if sum(cfg.k) > d:
        raise ValueError(
            f"configuration needs {sum(cfg.k)} singular vectors, only {d} available"
        )
    mats = []
    start = 0
    for k_i in cfg.k:
        mats.append(V[:, start : start + k_i].T.copy())
        start += k_i
    return SourceMatrices(matrices=tuple(mats), m=V.shape[0])


def soft_threshold(v: np.ndarray, theta: float) -> np.ndarray:
    """Elementwise shrink toward zero by theta; the prox of theta*||.||_1."""
    if theta < 0:
        raise ValueError(f"threshold must be >= 0, got {theta}")
    return np.sign(v) * np.maximum(np.abs(v) - theta, 0.0)


@dataclass(frozen=True)
class Phase:
    """One approximation level: truncation rank, length, responder count."""

    rank: int
    iterations: int
    ell: int


@dataclass(frozen=True)
class ApproxSchedule:
    """The R phases of a sequential-approximation run over one configuration."""

    config: Configuration
    phases: tuple[Phase, ...]

    def __post_init__(self) -> None:
        if not self.phases:
            raise ValueError("schedule needs at least one phase")
        if not check_feasible(self.config).feasible:
            raise ValueError(f"configuration {self.config.k} is infeasible")
        h = self.config.cumulative_ranks()
        prev_rank, prev_ell = 0, 0
        for p in self.phases:
            if p.iterations < 1:
                raise ValueError(f"phase iteration count must be >= 1, got {p}")
            if p.rank <= prev_rank:
                raise ValueError(f"phase ranks must strictly increase, got {p}")
            if p.ell < prev_ell:
                raise ValueError(f"responder counts must not decrease, got {p}")
            if not 1 <= p.ell <= self.config.L:
                raise ValueError(f"ell={p.ell} outside 1..{self.config.L}")
            if h[p.ell - 1] < p.rank:
                raise ValueError(
                    f"phase rank {p.rank} unreachable with ell={p.ell} "
                    f"(cumulative ranks {h})"
                )
            prev_rank, prev_ell = p.rank, p.ell

    @classmethod
    def build(
        cls,
        config: Configuration,
        phase_specs: Sequence[tuple[int, int]],
        ells: Sequence[int] | None = None,
    ) -> "ApproxSchedule":
        """Schedule from (rank, iterations) pairs; ell defaults to the smallest
        responder count whose cumulative rank covers the phase rank."""
        h = config.cumulative_ranks()
        phases = []
        for idx, (rank, iters) in enumerate(phase_specs):
            if ells is not None:
                ell = ells[idx]
            else:
                ell = next((i + 1 for i, hv in enumerate(h) if hv >= rank), 0)
                if ell == 0:
                    raise ValueError(
                        f"no responder count reaches rank {rank} "
                        f"(cumulative ranks {h})"
                    )
            phases.append(Phase(rank=rank, iterations=iters, ell=ell))
        return cls(config=config, phases=tuple(phases))


@dataclass(frozen=True)
class CodedMatvecSystem:
    """Immutable encoded system shared by all phases of a run."""

    config: Configuration
    svd: SvdFactors
    workers: tuple[WorkerMatrix, ...]

    @classmethod
    def setup(cls, svd: SvdFactors, config: Configuration) -> "CodedMatvecSystem":
        src = build_level_blocks(svd.V, config)
        workers = tuple(encode_all(src, config))
        return cls(config=config, svd=svd, workers=workers)


def sequential_matvec(
    x: np.ndarray,
    phase: Phase,
    system: CodedMatvecSystem,
    model: LatencyModel,
    rng: SeededRng,
) -> tuple[np.ndarray, float]:
    """One coded round: wait for ell(r) workers, decode, return (H_(r) x, T_(ell)).

    The decoded values t = [v_1^T x, ..., v_h^T x] are completed user-side to
    H_(r) x = V_r diag(sigma_r^2) t_r using the first rank(r) components.
    """
    elapsed, responders = simulate_wait(model, system.config.L, phase.ell, rng)
    results = [
        worker_multiply(system.workers[w - 1], x) for w in responders
    ]
    decoded = decode_prefix(results, system.config)
    t = np.concatenate(decoded) if decoded else np.empty(0)
    if t.shape[0] < phase.rank:
        raise RuntimeError(
            f"decoded {t.shape[0]} components, phase needs {phase.rank}"
        )
    r = phase.rank
    g = system.svd.V[:, :r] @ (system.svd.sigma[:r] ** 2 * t[:r])
    return g, elapsed


@dataclass
class SolverState:
    """Mutable per-run iteration state."""

    x: np.ndarray
    k: int = 0
    phase_index: int = 1
    step: float = 0.0


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    phase: int
    iter_time: float
    cum_time: float
    objective: float
    suboptimality: float


@dataclass
class RunTrace:
    """Per-iteration record of one simulated run."""

    records: list[IterationRecord] = field(default_factory=list)
    iterates: list[np.ndarray] | None = None

    def __len__(self) -> int:
        return len(self.records)

    @property
    def final_suboptimality(self) -> float:
        return self.records[-1].suboptimality

    @property
    def total_time(self) -> float:
        return self.records[-1].cum_time

    def time_to(self, threshold: float) -> float | None:
        """Simulated time of the first record at or below the threshold."""
        for rec in self.records:
            if rec.suboptimality <= threshold:
                return rec.cum_time
        return None


def _as_rng(seed: "int | SeededRng") -> SeededRng:
    return seed if isinstance(seed, SeededRng) else SeededRng(int(seed))


def run_sequential(
    problem: LassoProblem,
    schedule: ApproxSchedule,
    model: LatencyModel,
    seed: "int | SeededRng",
    *,
    svd: SvdFactors | None = None,
    x_star: np.ndarray | None = None,
    charge_second_round: bool = False,
    keep_iterates: bool = False,
) -> RunTrace:
    """Run the phased solver through the coded cluster simulation.

    The iterate carries over at phase boundaries.  Phase r uses the step
    1/sigma_1(F_(r))^2 and the truncated offset F_(r)^T b, so each phase is
    plain ISTA on the rank-r problem; the final phase is exact when its rank
    equals the full rank.  Per iteration the simulated cost is T_(ell(r)),
    doubled when ``charge_second_round`` also bills the transpose round.
    """
    svd = svd if svd is not None else SvdFactors.from_matrix(problem.F)
    if x_star is None:
        x_star, _ = reference_solution(problem)
    x_norm = float(np.linalg.norm(x_star))
    denom = x_norm if x_norm > 0 else 1.0
    system = CodedMatvecSystem.setup(svd, schedule.config)
    rng = _as_rng(seed)

    state = SolverState(x=np.zeros(problem.cols))
    trace = RunTrace(iterates=[] if keep_iterates else None)
    cum = 0.0
    for phase_idx, phase in enumerate(schedule.phases, start=1):
        state.phase_index = phase_idx
        state.step = 1.0 / float(truncate_svd(svd, phase.rank).sigma[0] ** 2)
        offset = svd.gradient_offset(problem.b, phase.rank)
        for _ in range(phase.iterations):
            state.k += 1
            g, elapsed = sequential_matvec(
                state.x, phase, system, model, rng.spawn(state.k, 0)
            )
            if charge_second_round:
                second, _ = simulate_wait(
                    model, schedule.config.L, phase.ell, rng.spawn(state.k, 1)
                )
                elapsed += second
            state.x = soft_threshold(
                state.x - state.step * (g - offset), state.step * problem.gamma
            )
            cum += elapsed
            trace.records.append(
                IterationRecord(
                    iteration=state.k,
                    phase=phase_idx,
                    iter_time=elapsed,
                    cum_time=cum,
                    objective=problem.objective(state.x),
                    suboptimality=float(np.linalg.norm(state.x - x_star)) / denom,
                )
            )
            if trace.iterates is not None:
                trace.iterates.append(state.x.copy())
    return trace


def baseline_schedule(
    L: int, n: int, rank: int, iterations: int
) -> ApproxSchedule:
    """Single-phase exact schedule on the cheapest single-level configuration.

    Places all ``rank`` rows at the smallest level ell whose row budget fits,
    so the per-iteration cost is T_(ell) with the least possible ell.
    """
    for ell in range(1, L + 1):
        k = tuple(rank if i == ell else 0 for i in range(1, L + 1))
        cfg = Configuration(L=L, n=n, k=k)
        if check_feasible(cfg).feasible:
            return ApproxSchedule(
                config=cfg,
                phases=(Phase(rank=rank, iterations=iterations, ell=ell),),
            )
    raise ValueError(f"no single-level configuration supports rank {rank} on (L={L}, n={n})")


def run_baseline(
    problem: LassoProblem,
    L: int,
    n: int,
    model: LatencyModel,
    seed: "int | SeededRng",
    iterations: int,
    *,
    svd: SvdFactors | None = None,
    x_star: np.ndarray | None = None,
    keep_iterates: bool = False,
) -> RunTrace:
    """The non-sequential reference: one exact phase at full rank."""
    svd = svd if svd is not None else SvdFactors.from_matrix(problem.F)
    schedule = baseline_schedule(L, n, svd.rank, iterations)
    return run_sequential(
        problem, schedule, model, seed,
        svd=svd, x_star=x_star, keep_iterates=keep_iterates,
    )


def subgradient_residual(g: np.ndarray, x: np.ndarray, gamma: float) -> float:
    """Distance of -g from gamma * (subdifferential of ||x||_1), in max norm."""
    on = x != 0
    res = 0.0
    if np.any(on):
        res = float(np.abs(g[on] + gamma * np.sign(x[on])).max())
    if np.any(~on):
        res = max(res, float(np.maximum(np.abs(g[~on]) - gamma, 0.0).max()))
    return res


def optimality_residual(problem: LassoProblem, x: np.ndarray) -> float:
    """Lasso optimality violation of x (0 at a minimiser)."""
    g = problem.F.T @ (problem.F @ x - problem.b)
    return subgradient_residual(g, x, problem.gamma)


def reference_solution(
    problem: LassoProblem,
    *,
    tol: float = 1e-10,
    max_iter: int = 10**6,
    check_every: int = 50,
) -> tuple[np.ndarray, float]:
    """Exact-matrix proximal gradient run to an optimality residual <= tol.

    Returns (x_star, residual).  Raises if the cap is hit first.
    """
    F, b, gamma = problem.F, problem.b, problem.gamma
    sigma_max = float(np.linalg.svd(F, compute_uv=False)[0])
    if sigma_max == 0.0:
        return np.zeros(problem.cols), 0.0
    t = 1.0 / sigma_max**2
    h = F.T @ b
    x = np.zeros(problem.cols)
    for k in range(1, max_iter + 1):
        x = soft_threshold(x - t * (F.T @ (F @ x) - h), t * gamma)
        if k % check_every == 0:
            res = optimality_residual(problem, x)
            if res <= tol:
                return x, res
    res = optimality_residual(problem, x)
    if res <= tol:
        return x, res
    raise RuntimeError(
        f"proximal gradient did not reach residual {tol} within {max_iter} "
        f"iterations (residual {res:.3e})"
    )
