"""Projected subgradient method on the sphere, with every step-size regime.

One iteration is a plain subgradient step followed by re-projection:

    b_k = b_{k-1} - mu_k * X sign(X^T b_{k-1}),   b_k <- b_k / ||b_k||.

With a piecewise geometrically diminishing step size (constant for K0
iterations, then shrunk by beta every K iterations) the angle to the
complement of the inlier subspace converges R-linearly; tan(theta_k) is
bounded by (mu0 / (sqrt(2) mu')) * beta^floor((k - K0)/K) past the K0-th
iteration. The modified backtracking line search (MBLS) warm-starts each
search from the previously accepted step.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import Dataset, SubspaceModel, unit_vector

SCHEDULE_KINDS = ("constant", "harmonic", "custom_diminishing", "piecewise_geometric", "mbls")
ARMIJO_C = 1e-4


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule. Use the classmethod constructors."""

    kind: str
    mu0: float
    beta: float = 0.5
    K0: int = 30
    K: int = 4
    sequence: Callable[[int], float] | None = None
    shrink: float = 0.5
    grow: float = 2.0
    max_backtracks: int = 30

    def __post_init__(self):
        if self.kind not in SCHEDULE_KINDS:
            raise ValueError(f"unknown schedule kind {self.kind!r}")
        if self.mu0 <= 0:
            raise ValueError("mu0 must be positive")
        if self.kind == "piecewise_geometric":
            if not 0.0 < self.beta < 1.0:
                raise ValueError("beta must lie in (0, 1)")
            if self.K0 < 1 or self.K < 1:
                raise ValueError("K0 and K must be positive integers")
        if self.kind == "custom_diminishing" and self.sequence is None:
            raise ValueError("custom_diminishing needs a sequence callable")
        if self.kind == "mbls":
            if not 0.0 < self.shrink < 1.0:
                raise ValueError("shrink must lie in (0, 1)")
            if self.grow <= 1.0:
                raise ValueError("grow must exceed 1")
            if self.max_backtracks < 0:
                raise ValueError("max_backtracks must be nonnegative")

    @classmethod
    def constant(cls, mu0: float) -> "StepSchedule":
        return cls("constant", mu0)

    @classmethod
    def harmonic(cls, mu0: float) -> "StepSchedule":
        return cls("harmonic", mu0)

    @classmethod
    def piecewise_geometric(cls, mu0: float, K0: int = 30, K: int = 4,
                            beta: float = 0.5) -> "StepSchedule":
        return cls("piecewise_geometric", mu0, beta=beta, K0=K0, K=K)

    @classmethod
    def custom(cls, sequence: Callable[[int], float], mu0: float = 1.0) -> "StepSchedule":
        return cls("custom_diminishing", mu0, sequence=sequence)

    @classmethod
    def mbls(cls, mu0: float, shrink: float = 0.5, grow: float = 2.0,
             max_backtracks: int = 30) -> "StepSchedule":
        return cls("mbls", mu0, shrink=shrink, grow=grow, max_backtracks=max_backtracks)


def step_size(schedule: StepSchedule, k: int) -> float:
    """Step size at iteration k >= 1 for any stateless schedule."""
    if k < 1:
        raise ValueError("iterations are indexed from 1")
    if schedule.kind == "constant":
        return schedule.mu0
    if schedule.kind == "harmonic":
        return schedule.mu0 / k
    if schedule.kind == "custom_diminishing":
        return float(schedule.sequence(k))
    if schedule.kind == "piecewise_geometric":
        if k < schedule.K0:
            return schedule.mu0
        return schedule.mu0 * schedule.beta ** ((k - schedule.K0) // schedule.K + 1)
    raise ValueError("mbls is state-dependent; it has no stateless step size")


@dataclass(frozen=True)
class SolveOptions:
    """Iteration limits, stopping tolerances and trace switches.

    Termination priority: subgradient norm <= grad_tol first, then (when the
    truth is supplied and angle_tol is set) angle to the complement <=
    angle_tol, then max_iters.
    """

    schedule: StepSchedule
    max_iters: int = 1000
    angle_tol: float | None = None
    grad_tol: float = 1e-10
    record_trace: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.grad_tol <= 0:
            raise ValueError("grad_tol must be positive")
        if self.angle_tol is not None and self.angle_tol <= 0:
            raise ValueError("angle_tol must be positive when set")


@dataclass(frozen=True)
class TraceRow:
    k: int
    objective: float
    step: float
    theta: float      # angle to the complement of the truth; NaN without truth
    phi: float        # angle from the truth subspace; NaN without truth
    wall_nanos: int   # cumulative since solve start


@dataclass
class SolveReport:
    """Result of one solver run: final direction, trace, and why it stopped."""

    final_b: np.ndarray
    iters: int
    termination: str
    trace: list[TraceRow] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    aux: dict = field(default_factory=dict)

    @property
    def final_theta(self) -> float:
        return self.trace[-1].theta if self.trace else math.nan

    @property
    def final_objective(self) -> float:
        return self.trace[-1].objective if self.trace else math.nan

    def trace_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "objective", "step", "theta", "phi", "wall_nanos"])
            for row in self.trace:
                writer.writerow([row.k, repr(row.objective), repr(row.step),
                                 repr(row.theta), repr(row.phi), row.wall_nanos])


def _angles(truth: SubspaceModel | None, b: np.ndarray) -> tuple[float, float]:
    if truth is None or truth.basis is None:
        return math.nan, math.nan
    c = min(1.0, float(np.linalg.norm(truth.basis.T @ b)))
    return math.asin(c), math.acos(c)  # theta (to complement), phi (from subspace)


def _objective(cols_t: np.ndarray, b: np.ndarray) -> float:
    return float(np.abs(cols_t @ b).sum())


def solve(data: Dataset, b0, opts: SolveOptions,
          truth: SubspaceModel | None = None) -> SolveReport:
    """Run the projected subgradient method with a stateless step schedule."""
    if opts.schedule.kind == "mbls":
        return solve_mbls(data, b0, opts, truth)
    b = np.array(unit_vector(b0, atol=1e-9))
    if b.shape[0] != data.ambient_dim:
        raise ValueError("b0 dimension does not match the data")
    cols = data.columns
    cols_t = np.ascontiguousarray(cols.T)
    trace: list[TraceRow] = []
    flags: list[str] = []
    start = time.perf_counter_ns()

    iters = 0
    termination = "max_iters"
    for k in range(1, opts.max_iters + 1):
        iters = k
        g = cols @ np.sign(cols_t @ b)
        riem = g - b * (b @ g)
        if np.linalg.norm(riem) <= opts.grad_tol:
            termination = "grad_tol"
            if opts.record_trace:
                theta, phi = _angles(truth, b)
                trace.append(TraceRow(k, _objective(cols_t, b), 0.0, theta, phi,
                                      time.perf_counter_ns() - start))
            break
        mu = step_size(opts.schedule, k)
        nxt = b - mu * g
        nrm = np.linalg.norm(nxt)
        if nrm < 1e-300:
            termination = "degenerate"
            flags.append(f"zero_update:{k}")
            if opts.record_trace:
                theta, phi = _angles(truth, b)
                trace.append(TraceRow(k, _objective(cols_t, b), mu, theta, phi,
                                      time.perf_counter_ns() - start))
            break
        b = nxt / nrm
        theta, phi = _angles(truth, b)
        if opts.record_trace:
            trace.append(TraceRow(k, _objective(cols_t, b), mu, theta, phi,
                                  time.perf_counter_ns() - start))
        if opts.angle_tol is not None and truth is not None and theta <= opts.angle_tol:
            termination = "angle_tol"
            break
    return SolveReport(final_b=b, iters=iters, termination=termination,
                       trace=trace, flags=flags)


def solve_mbls(data: Dataset, b0, opts: SolveOptions,
               truth: SubspaceModel | None = None) -> SolveReport:
    """Projected subgradient with the modified backtracking line search.

    Each iteration starts from the previously accepted step mu_prev and takes
    the largest of {mu_prev*grow, mu_prev, mu_prev*shrink, ...} (at most
    max_backtracks shrinks) that achieves the Armijo decrease
    f(next) <= f(b) - 1e-4 * mu * ||g||^2. If none qualifies, the smallest
    tried step is taken and the iteration is flagged non-monotone.
    """
    sched = opts.schedule
    if sched.kind != "mbls":
        raise ValueError("solve_mbls needs an mbls schedule")
    b = np.array(unit_vector(b0, atol=1e-9))
    if b.shape[0] != data.ambient_dim:
        raise ValueError("b0 dimension does not match the data")
    cols = data.columns
    cols_t = np.ascontiguousarray(cols.T)
    trace: list[TraceRow] = []
    flags: list[str] = []
    if sched.max_backtracks == 0:
        flags.append("mbls_no_backtracks")
    start = time.perf_counter_ns()

    mu_prev = sched.mu0
    f_cur = _objective(cols_t, b)
    iters = 0
    termination = "max_iters"
    for k in range(1, opts.max_iters + 1):
        iters = k
        g = cols @ np.sign(cols_t @ b)
        riem = g - b * (b @ g)
        gnorm_sq = float(g @ g)
        if np.linalg.norm(riem) <= opts.grad_tol:
            termination = "grad_tol"
            if opts.record_trace:
                theta, phi = _angles(truth, b)
                trace.append(TraceRow(k, f_cur, 0.0, theta, phi,
                                      time.perf_counter_ns() - start))
            break
        candidates = [mu_prev * sched.grow, mu_prev]
        candidates += [mu_prev * sched.shrink ** j for j in range(1, sched.max_backtracks + 1)]
        accepted = None
        cand_b = cand_f = None
        for mu in candidates:
            nxt = b - mu * g
            nrm = np.linalg.norm(nxt)
            if nrm < 1e-300:
                continue
            nxt /= nrm
            f_nxt = _objective(cols_t, nxt)
            cand_b, cand_f, cand_mu = nxt, f_nxt, mu
            if f_nxt <= f_cur - ARMIJO_C * mu * gnorm_sq:
                accepted = mu
                break
        if cand_b is None:
            termination = "degenerate"
            flags.append(f"zero_update:{k}")
            break
        if accepted is None:
            flags.append(f"non_monotone:{k}")
        mu_prev = cand_mu
        b, f_cur = cand_b, cand_f
        theta, phi = _angles(truth, b)
        if opts.record_trace:
            trace.append(TraceRow(k, f_cur, cand_mu, theta, phi,
                                  time.perf_counter_ns() - start))
        if opts.angle_tol is not None and truth is not None and theta <= opts.angle_tol:
            termination = "angle_tol"
            break
    return SolveReport(final_b=b, iters=iters, termination=termination,
                       trace=trace, flags=flags, aux={"final_step": mu_prev})


def auto_mu0(data: Dataset, b0, shrink: float = 0.5, max_backtracks: int = 30) -> float:
    """Initial step from one backtracking probe at ``b0``.

    The probe starts at the Polyak-style scale f(b0)/||g0||^2 and shrinks
    until the Armijo condition holds; the accepted value seeds the geometric
    schedule or the line search.
    """
    b = np.array(unit_vector(b0, atol=1e-9))
    cols_t = np.ascontiguousarray(data.columns.T)
    g = data.columns @ np.sign(cols_t @ b)
    gnorm_sq = float(g @ g)
    if gnorm_sq == 0.0:
        return 1e-3
    f0 = _objective(cols_t, b)
    mu = f0 / gnorm_sq
    for _ in range(max_backtracks + 1):
        nxt = b - mu * g
        nrm = np.linalg.norm(nxt)
        if nrm >= 1e-300:
            nxt = nxt / nrm
            if _objective(cols_t, nxt) <= f0 - ARMIJO_C * mu * gnorm_sq:
                return mu
        mu *= shrink
    return mu


def recover_normals(data: Dataset, codim: int, opts: SolveOptions,
                    init: Callable[[Dataset], np.ndarray] | None = None,
                    adapt_mu0: bool = True) -> SubspaceModel:
    """Recover ``codim`` orthonormal normals by repeated solves with deflation.

    After each normal the data are projected onto its orthocomplement and
    renormalized; columns whose projection falls below 1e-9 in norm are
    dropped. The reduced problem is solved in orthocomplement coordinates so
    previously found normals cannot reappear. With ``adapt_mu0`` (default)
    each stage re-derives its initial step by a backtracking probe, since the
    deflated data change scale.
    """
    from .initializers import spectral_init  # local import to avoid a cycle
    from dataclasses import replace
    if not 1 <= codim <= data.ambient_dim - 1:
        raise ValueError("codim must lie in [1, D-1]")
    if init is None:
        init = spectral_init
    D = data.ambient_dim
    normals: list[np.ndarray] = []
    reduced = data
    basis = np.eye(D)  # columns: orthonormal basis of the current complement
    for _ in range(codim):
        if reduced.n_columns == 0:
            raise RuntimeError("all columns were annihilated before finding every normal")
        b0 = init(reduced)
        stage_opts = opts
        if adapt_mu0 and opts.schedule.kind != "mbls":
            stage_opts = replace(opts, schedule=replace(
                opts.schedule, mu0=auto_mu0(reduced, b0)))
        report = solve(reduced, b0, stage_opts)
        n_reduced = report.final_b
        normals.append(basis @ n_reduced)
        # Shrink the working coordinates: QR of [n | I] yields an orthonormal
        # frame whose trailing columns span the orthocomplement of n.
        q, _ = np.linalg.qr(np.column_stack([n_reduced, np.eye(basis.shape[1])]))
        keep = q[:, 1:basis.shape[1]]
        proj = keep.T @ reduced.columns
        norms = np.linalg.norm(proj, axis=0)
        mask = norms > 1e-9
        cols = proj[:, mask] / norms[mask]
        labels = reduced.inlier_mask[mask] if reduced.labeled else None
        reduced = Dataset(cols, labels)
        basis = basis @ keep
    out = np.stack(normals, axis=1)
    # Drift from repeated projections is below 1e-10 by construction; a final
    # QR tightens it to machine precision without moving the span.
    q, r = np.linalg.qr(out)
    out = q * np.sign(np.where(np.diag(r) == 0.0, 1.0, np.diag(r)))
    return SubspaceModel(normals=out)
