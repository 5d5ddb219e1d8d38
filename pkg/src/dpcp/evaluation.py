"""Classification metrics and the synthetic experiment harnesses.

ROC curves treat *outliers as the positive class*: a point whose distance
score meets the threshold is predicted outlier. The harnesses reproduce the
condition-grid and the M-versus-N phase-transition protocols at desk scale,
with every cell keyed by (parameters, trial) and seeded independently so runs
are reproducible regardless of execution order.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .altsolvers import alp_step
from .core import objective, principal_angle
from .initializers import spectral_init
from .psgm import SolveOptions, solve, auto_mu0, StepSchedule
from .quantities import (GeometryStats, ConditionReport, check_alp_angles,
                         check_global_optimality, estimate_stats, AlpAngleReport)
from .synth import SphericalModelSpec, sample_spherical, outlier_ratio_to_M

_trapz = getattr(np, "trapezoid", None) or np.trapz


def derive_seed(root: int, *path: int) -> int:
    """Stable 31-bit sub-seed for a grid cell, via SeedSequence."""
    return int(np.random.SeedSequence([root, *path]).generate_state(1)[0] & 0x7FFFFFFF)


@dataclass(frozen=True)
class RocCurve:
    """Threshold sweep with trapezoidal AUC; thresholds descend and the
    rates are non-decreasing along the sweep."""

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float


def roc_from_scores(scores, labels) -> RocCurve:
    """ROC over all distinct score thresholds, ties grouped.

    ``labels`` is the inlier mask (True = inlier); outliers are the positive
    class and a score at or above the threshold predicts outlier.
    """
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    inlier = np.asarray(labels, dtype=bool).reshape(-1)
    if scores.size != inlier.size:
        raise ValueError("scores and labels must have equal length")
    n_pos = int((~inlier).sum())
    n_neg = int(inlier.sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc needs at least one point of each class")
    order = np.argsort(-scores, kind="stable")
    s = scores[order]
    is_pos = (~inlier)[order].astype(np.float64)
    idx = np.concatenate([np.flatnonzero(np.diff(s)), [s.size - 1]])  # tie-group ends
    tp = np.cumsum(is_pos)[idx]
    fp = np.cumsum(1.0 - is_pos)[idx]
    thresholds = np.concatenate([[math.inf], s[idx]])
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    auc = float(_trapz(tpr, fpr))
    return RocCurve(thresholds, tpr, fpr, auc)


def f1_at_threshold(scores, labels, threshold: float) -> float:
    """F1 with outlier as the positive class; zero when nothing is recalled."""
    scores = np.asarray(scores, dtype=np.float64).reshape(-1)
    inlier = np.asarray(labels, dtype=bool).reshape(-1)
    if int((~inlier).sum()) == 0 or int(inlier.sum()) == 0:
        raise ValueError("f1 needs at least one point of each class")
    predicted_out = scores >= threshold
    tp = int((predicted_out & ~inlier).sum())
    fp = int((predicted_out & inlier).sum())
    fn = int((~predicted_out & ~inlier).sum())
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2.0 * precision * recall / (precision + recall)


# ---------------------------------------------------------------------------
# Phase transition harness
# ---------------------------------------------------------------------------

@dataclass
class PhaseCell:
    M: int
    N: int
    trial: int
    seed: int
    theta: float
    failed: bool = False


@dataclass
class PhaseGrid:
    Ms: list[int]
    Ns: list[int]
    theta_star: float
    trials: int
    cells: list[PhaseCell] = field(default_factory=list)

    def mean_theta(self, M: int, N: int) -> float:
        vals = [c.theta for c in self.cells if c.M == M and c.N == N and not c.failed]
        return float(np.mean(vals)) if vals else math.nan


@dataclass
class PhaseResult:
    grid: PhaseGrid
    boundary: list[tuple[int, int]]          # (M, smallest N with mean theta <= theta*)
    sqrt_fit_a: float                        # least-squares a in N = a sqrt(M)
    loglog_slope: float                      # slope of log M versus log N
    flags: list[str] = field(default_factory=list)

    def to_csv(self, path, D: int, d: int) -> None:
        write_grid_csv(path, [
            {"M": c.M, "N": c.N, "ratio": c.M / (c.M + c.N), "rel_dim": d / D,
             "trial": c.trial, "theta": c.theta, "seed": c.seed, "failed": int(c.failed)}
            for c in self.grid.cells])


def _phase_trial(D: int, d: int, M: int, N: int, trial: int, seed: int,
                 theta_star: float, max_iters: int) -> PhaseCell:
    cell_seed = derive_seed(seed, M, N, trial)
    spec = SphericalModelSpec(D=D, d=d, N=N, M=M, seed=cell_seed)
    try:
        data, truth = sample_spherical(spec)
        b0 = spectral_init(data)
        mu0 = auto_mu0(data, b0)
        opts = SolveOptions(StepSchedule.piecewise_geometric(mu0), max_iters=max_iters,
                            angle_tol=theta_star, record_trace=False)
        report = solve(data, b0, opts, truth=truth.model)
        theta = principal_angle(truth.model, report.final_b).theta_from_complement
        return PhaseCell(M, N, trial, cell_seed, theta)
    except Exception:
        return PhaseCell(M, N, trial, cell_seed, math.nan, failed=True)


def phase_transition(Ms, Ns, D: int, d: int, theta_star: float = 0.01,
                     trials: int = 10, seed: int = 0, max_iters: int = 200,
                     threads: int = 1) -> PhaseResult:
    """Mean final angle over a rectangular (M, N) grid plus the boundary fit.

    For each M the boundary is the smallest N whose mean angle meets
    theta_star; the boundary points are fitted both as N = a sqrt(M) and by
    the slope of log M against log N. Cells run on independent derived seeds,
    so thread-level parallelism cannot change any result.
    """
    Ms = sorted(int(m) for m in Ms)
    Ns = sorted(int(n) for n in Ns)
    if not Ms or not Ns:
        raise ValueError("both axes must be non-empty")
    grid = PhaseGrid(Ms, Ns, theta_star, trials)
    jobs = [(M, N, t) for M in Ms for N in Ns for t in range(trials)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(
                lambda j: _phase_trial(D, d, j[0], j[1], j[2], seed, theta_star, max_iters),
                jobs))
    else:
        cells = [_phase_trial(D, d, M, N, t, seed, theta_star, max_iters)
                 for (M, N, t) in jobs]
    grid.cells = sorted(cells, key=lambda c: (c.M, c.N, c.trial))

    flags = [f"cell_failed:M={c.M},N={c.N},trial={c.trial}" for c in grid.cells if c.failed]
    boundary: list[tuple[int, int]] = []
    for M in Ms:
        for N in Ns:
            if grid.mean_theta(M, N) <= theta_star:
                boundary.append((M, N))
                break
        else:
            flags.append(f"no_boundary:M={M}")

    sqrt_fit_a, loglog_slope = fit_boundary(boundary)
    if math.isnan(loglog_slope):
        flags.append("degenerate_fit")
    return PhaseResult(grid, boundary, sqrt_fit_a, loglog_slope, flags)


def fit_boundary(boundary: list[tuple[int, int]]) -> tuple[float, float]:
    """Least-squares fits of the (M, N) boundary points.

    Returns (a, slope): the coefficient of N = a sqrt(M) and the slope of
    log M against log N (2 for an exactly quadratic law). NaN when fewer
    than two points are available.
    """
    if len(boundary) < 2:
        return math.nan, math.nan
    Mb = np.array([m for m, _ in boundary], dtype=np.float64)
    Nb = np.array([n for _, n in boundary], dtype=np.float64)
    sqrt_fit_a = float((np.sqrt(Mb) @ Nb) / (Mb.sum()))
    loglog_slope = float(np.polyfit(np.log(Nb), np.log(Mb), 1)[0])
    return sqrt_fit_a, loglog_slope


# ---------------------------------------------------------------------------
# Condition grid harness
# ---------------------------------------------------------------------------

@dataclass
class ConditionCell:
    ratio: float
    rel_dim: float
    d: int
    M: int
    N: int
    trial: int
    seed: int
    stats: GeometryStats
    global_condition: ConditionReport
    alp_angles: AlpAngleReport
    phi0: float
    phis: list[float]            # angle-from-subspace after each tangent step
    objectives: list[float]      # l1 objective at b0, b1, ... (monotone chain)
    one_step_condition: bool     # phi0 > phi_natural
    finite_condition: bool       # phi0 > phi_star

    def flat(self) -> dict:
        return {
            "M": self.M, "N": self.N, "ratio": self.ratio, "rel_dim": self.rel_dim,
            "trial": self.trial, "theta": math.pi / 2 - self.phis[-1] if self.phis else math.nan,
            "seed": self.seed, "d": self.d, "phi0": self.phi0,
            **{f"phi{i + 1}": v for i, v in enumerate(self.phis)},
            "eq_global": int(self.global_condition.satisfied),
            "eq_one_step": int(self.one_step_condition),
            "eq_finite": int(self.finite_condition),
        }


def condition_grid(N: int, D: int, ratios, rel_dims, trials: int = 10, seed: int = 0,
                   budget: int = 4000, alp_steps: int = 3) -> list[ConditionCell]:
    """Estimate stats and evaluate the closed-form conditions cell by cell.

    Each cell samples the spherical model at (outlier ratio, relative
    dimension), records the spectral angle phi0, and follows ``alp_steps``
    tangent-LP steps so the one-step and finite-iteration guarantees can be
    compared with what actually happens.
    """
    cells: list[ConditionCell] = []
    for ratio in ratios:
        for rel in rel_dims:
            d = min(D - 1, max(1, round(rel * D)))
            M = outlier_ratio_to_M(N, ratio)
            for trial in range(trials):
                cell_seed = derive_seed(seed, round(ratio * 1000), d, trial)
                spec = SphericalModelSpec(D=D, d=d, N=N, M=M, seed=cell_seed)
                data, truth = sample_spherical(spec)
                stats = estimate_stats(data, truth.model, budget=budget, seed=cell_seed)
                report = check_global_optimality(stats, N, M)
                alp = check_alp_angles(stats, N, M, stats.c_X_max)
                b = spectral_init(data)
                phi0 = principal_angle(truth.model, b).phi_from_S
                phis = []
                objs = [objective(data, b)]
                for _ in range(alp_steps):
                    b = alp_step(data, b)
                    phis.append(principal_angle(truth.model, b).phi_from_S)
                    objs.append(objective(data, b))
                one_step = (not alp.vacuous) and phi0 > alp.phi_natural
                finite = (not alp.vacuous) and phi0 > alp.phi_star
                cells.append(ConditionCell(ratio, rel, d, M, N, trial, cell_seed, stats,
                                           report, alp, phi0, phis, objs, one_step, finite))
    return cells


# ---------------------------------------------------------------------------
# CSV / manifest plumbing shared by the harnesses
# ---------------------------------------------------------------------------

def write_grid_csv(path, rows: list[dict]) -> None:
    if not rows:
        raise ValueError("nothing to write")
    fields = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def write_manifest(path, command: str, config: dict) -> None:
    """Reproduction manifest: full resolved configuration plus versions."""
    doc = {
        "command": command,
        "config": config,
        "versions": {"dpcp": __version__, "numpy": np.__version__,
                     "python": sys.version.split()[0]},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
