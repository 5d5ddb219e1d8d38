"""RANSAC subspace fitting under an iteration or wall-clock budget."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .core import Dataset, SubspaceModel
from .synth import derive_rng

_RANK_TOL = 1e-9


@dataclass(frozen=True)
class RansacResult:
    model: SubspaceModel
    consensus: int
    iterations_run: int
    deterministic: bool
    flags: tuple[str, ...] = ()


def subspace_distances(columns: np.ndarray, basis: np.ndarray) -> np.ndarray:
    """Distance of each column to the span of ``basis``: ||x - V V^T x||."""
    resid = columns - basis @ (basis.T @ columns)
    return np.linalg.norm(resid, axis=0)


def ransac(data: Dataset, d: int, threshold: float, *, iterations: int | None = None,
           wall_nanos: int | None = None, seed: int = 0) -> RansacResult:
    """Best d-dimensional span of sampled columns by consensus count.

    Exactly one of ``iterations`` / ``wall_nanos`` sets the budget. Iteration
    budgets are deterministic given the seed; wall-clock budgets are flagged
    as nondeterministic. Rank-deficient samples are discarded without
    consuming the iteration budget (they do burn wall-clock time).
    """
    if d >= data.ambient_dim:
        raise ValueError("d must be below the ambient dimension")
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    if (iterations is None) == (wall_nanos is None):
        raise ValueError("set exactly one of iterations / wall_nanos")
    L = data.n_columns
    if L < d:
        raise ValueError(f"need at least {d} columns, have {L}")

    rng = derive_rng(seed)
    cols = data.columns
    best_basis = None
    best_consensus = -1
    flags: list[str] = []
    deadline = time.perf_counter_ns() + wall_nanos if wall_nanos is not None else None
    done = 0
    attempts = 0
    max_attempts = 1000 + 50 * (iterations or 10**9)
    while True:
        if iterations is not None and done >= iterations:
            break
        if deadline is not None and time.perf_counter_ns() >= deadline and done > 0:
            break
        if attempts >= max_attempts:
            flags.append("degenerate_sample_cap")
            break
        attempts += 1
        pick = rng.choice(L, size=d, replace=False)
        q, r = np.linalg.qr(cols[:, pick])
        if np.abs(np.diag(r)).min() <= _RANK_TOL:
            continue  # degenerate sample: retry without consuming the budget
        done += 1
        consensus = int((subspace_distances(cols, q) <= threshold).sum())
        if consensus > best_consensus:
            best_consensus = consensus
            best_basis = q
    if best_basis is None:
        raise RuntimeError("no non-degenerate sample found within the attempt cap")
    return RansacResult(SubspaceModel(basis=best_basis), best_consensus, done,
                        deterministic=iterations is not None, flags=tuple(flags))
