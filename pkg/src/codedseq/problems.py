"""Random lasso instance generators for the experiment harness.

Two families:

* ``designed``: instances built backward from a planted optimum.  The
  certificate of optimality is embedded in the right singular vectors, with
  the part that pins a set of small "fringe" coordinates hidden in a tail
  mode.  Truncations below that mode therefore drop the fringe, which gives
  every low-rank phase a controlled solution offset (the suboptimality
  plateau of the figures) while the planted spike stays recoverable at every
  rank.  Spectrum and scales are chosen so per-coordinate convergence rates
  are nearly rank-independent, which is what makes cheap early phases pay.

* ``gaussian``: plain i.i.d. standard-normal F and b.  Kept as a generic
  source; low-rank truncations of such instances are poor approximations, so
  it does not reproduce the reference experiments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cluster import SeededRng
from .solver import LassoProblem

__all__ = ["DesignedProblem", "designed_problem", "gaussian_problem"]


@dataclass(frozen=True)
class DesignedProblem:
    """A lasso instance with a known planted optimum."""

    problem: LassoProblem
    planted_optimum: np.ndarray


def designed_problem(
    rng: SeededRng,
    *,
    rows: int = 38,
    cols: int = 500,
    gamma: float = 5.0,
    spike: float = 5.0,
    fringe_size: int = 8,
    fringe_scale: float = 0.05,
    certificate_box: float = 0.2,
    sigma_top: float = 4.0,
    sigma_decay: float = 0.7,
    hidden_mode: int = 16,
) -> DesignedProblem:
    """Instance with planted optimum: one spike plus a small hidden fringe.

    The optimum is ``spike`` on one coordinate plus ``fringe_size`` small
    coordinates of relative size ``fringe_scale``.  The fringe's certificate
    lives entirely in right-singular mode ``hidden_mode`` (1-based), so any
    truncation of rank < hidden_mode solves the spike-only problem instead;
    the relative gap between the two optima is about ``fringe_scale``.
    """
    if not 2 <= hidden_mode <= rows:
        raise ValueError(f"hidden_mode {hidden_mode} outside 2..{rows}")
    if not 0 < fringe_scale < 1:
        raise ValueError(f"fringe_scale must be in (0, 1), got {fringe_scale}")
    gen = rng.generator
    sigma = sigma_top * sigma_decay ** (np.arange(rows) / (rows - 1))

    j0 = int(gen.integers(cols))
    s0 = float(gen.choice([-1.0, 1.0]))
    others = np.setdiff1d(np.arange(cols), [j0])
    fringe = gen.choice(others, size=fringe_size, replace=False)
    fr_sign = gen.choice([-1.0, 1.0], size=fringe_size)
    fr_values = (
        fringe_scale * spike / np.sqrt(fringe_size)
        * fr_sign * (0.7 + 0.6 * gen.random(fringe_size))
    )
    x_opt = np.zeros(cols)
    x_opt[j0] = spike * s0
    x_opt[fringe] = fr_values

    # optimality certificate: sign on the support, strict interior elsewhere
    xi = gen.uniform(-certificate_box, certificate_box, size=cols)
    xi[j0] = s0
    xi[fringe] = np.sign(fr_values)
    xi_hidden = np.zeros(cols)
    xi_hidden[fringe] = np.sign(fr_values)
    xi_visible = xi - xi_hidden

    # right factor: mode 1 spans the visible certificate part, mode
    # hidden_mode the fringe-pinning part, the rest Haar-orthogonal filler
    raw = np.column_stack(
        [xi_visible, xi_hidden, gen.standard_normal((cols, rows - 2))]
    )
    Q, _ = np.linalg.qr(raw)
    order = [0] + list(range(2, hidden_mode)) + [1] + list(range(hidden_mode, rows))
    V = Q[:, order]
    alpha = V.T @ xi
    if np.linalg.norm(V @ alpha - xi) > 1e-9:
        raise ArithmeticError("certificate escaped the right-factor span")

    U_raw, _ = np.linalg.qr(gen.standard_normal((rows, rows)))
    F = U_raw @ (sigma[:, None] * V.T)
    # residual vector r with F^T r = gamma * xi makes x_opt exactly optimal
    b = F @ x_opt + U_raw @ (gamma * alpha / sigma)
    return DesignedProblem(
        problem=LassoProblem(F=F, b=b, gamma=gamma), planted_optimum=x_opt
    )


def gaussian_problem(
    rng: SeededRng,
    *,
    rows: int = 38,
    cols: int = 500,
    gamma: float = 5.0,
    max_attempts: int = 8,
) -> LassoProblem:
    """i.i.d. standard-normal instance, redrawn until F has full row rank."""
    gen = rng.generator
    for _ in range(max_attempts):
        F = gen.standard_normal((rows, cols))
        b = gen.standard_normal(rows)
        sv = np.linalg.svd(F, compute_uv=False)
        if sv[-1] > 1e-10 * sv[0]:
            return LassoProblem(F=F, b=b, gamma=gamma)
    raise RuntimeError(f"no full-rank draw in {max_attempts} attempts")
