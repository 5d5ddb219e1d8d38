"""Linearized-recursion and reweighted solvers, with an embedded LP solver.

The linearized recursion replaces the sphere constraint by its tangent affine
hyperplane and solves

    b_k = argmin ||X^T b||_1  s.t.  b^T b_{k-1} = 1,

then re-projects onto the sphere. The subproblem is a linear program; it is
solved through its D-row dual (max y s.t. X w = y b_prev, |w| <= 1) by a
self-contained bounded-variable two-phase simplex, and the primal optimum is
recovered from the complementary-slackness tight set and certified against
the dual value. The IRLS variant instead repeats bottom-eigenvector solves of
a damped weighted Gram matrix; both serve as cross-checks for the subgradient
solver.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from .core import Dataset, SubspaceModel, unit_vector
from .initializers import fix_sign
from .psgm import SolveReport, TraceRow

_PIVOT_TOL = 1e-9
_FEAS_TOL = 1e-8


@dataclass(frozen=True)
class LpResult:
    x: np.ndarray
    objective: float
    status: str                  # optimal | infeasible | unbounded
    feasibility_residual: float = math.nan
    duality_gap: float = math.nan
    dual: np.ndarray | None = None


class _BoundedSimplex:
    """Two-phase tableau simplex for min c^T x s.t. A x = b, 0 <= x <= u.

    Upper bounds are handled implicitly (nonbasic variables rest at either
    bound), so box constraints never add rows. Pricing is Dantzig with an
    automatic switch to Bland's rule after a degenerate stall, which
    guarantees termination.
    """

    def __init__(self, c, A, b, upper):
        self.c = np.asarray(c, dtype=np.float64).reshape(-1)
        self.b = np.asarray(b, dtype=np.float64).reshape(-1)
        m, n = self.b.size, self.c.size
        self.A = np.asarray(A, dtype=np.float64).reshape(m, n) if m else np.zeros((0, n))
        self.upper = np.asarray(upper, dtype=np.float64).reshape(-1)

    def run(self):
        """Returns (status, x, basis, y) with y the dual from the final basis."""
        m, n = self.b.size, self.c.size
        if m == 0:
            x = np.where((self.c < 0) & np.isfinite(self.upper), self.upper, 0.0)
            if np.any((self.c < -_PIVOT_TOL) & ~np.isfinite(self.upper)):
                return "unbounded", None, [], None
            return "optimal", x, [], np.zeros(0)
        A = self.A.copy()
        b = self.b.copy()
        flip = b < 0
        A[flip] *= -1.0
        b[flip] *= -1.0

        T = np.concatenate([A, np.eye(m)], axis=1)
        upper = np.concatenate([self.upper, np.full(m, math.inf)])
        at_upper = np.zeros(n + m, dtype=bool)
        basis = list(range(n, n + m))
        xB = b.copy()
        cost1 = np.concatenate([np.zeros(n), np.ones(m)])
        red = cost1 - cost1[basis] @ T
        status = self._iterate(T, xB, basis, at_upper, red, upper, allow=n + m)
        phase1_obj = sum(xB[i] for i, j in enumerate(basis) if j >= n)
        if status != "optimal" or phase1_obj > _FEAS_TOL * max(1.0, float(np.abs(b).max())):
            return "infeasible", None, [], None
        self._expel_artificials(T, xB, basis, n)
        keep_rows = [i for i, j in enumerate(basis) if j < n]
        if len(keep_rows) < m:
            T = T[keep_rows]
            xB = xB[keep_rows]
            basis = [basis[i] for i in keep_rows]
            m = len(basis)
        T = T[:, :n]
        red = self.c - (self.c[basis] @ T if basis else np.zeros(n))
        status = self._iterate(T, xB, basis, at_upper[:n], red, upper[:n], allow=n)
        if status == "unbounded":
            return "unbounded", None, basis, None
        x = np.where(at_upper[:n] & np.isfinite(upper[:n]), upper[:n], 0.0)
        for i, j in enumerate(basis):
            x[j] = xB[i]
        # Dual from the final basis on the (possibly sign-flipped) system.
        y = None
        if basis and len(basis) == A.shape[0]:
            try:
                y = np.linalg.solve(A[:, basis].T, self.c[basis])
                y = np.where(flip, -y, y)
            except np.linalg.LinAlgError:
                y = None
        return "optimal", x, basis, y

    @staticmethod
    def _iterate(T, xB, basis, at_upper, red, upper, allow: int) -> str:
        m = len(basis)
        in_basis = np.zeros(T.shape[1], dtype=bool)
        for j in basis:
            in_basis[j] = True
        bland = False
        stall = 0
        while True:
            r = red[:allow]
            lower_mask = ~in_basis[:allow] & ~at_upper[:allow] & (r < -_PIVOT_TOL)
            upper_mask = ~in_basis[:allow] & at_upper[:allow] & (r > _PIVOT_TOL)
            cand = np.flatnonzero(lower_mask | upper_mask)
            if cand.size == 0:
                return "optimal"
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(r[cand]))])
            sigma = -1.0 if at_upper[j] else 1.0
            d = T[:m, j]
            sd = sigma * d
            delta = upper[j]  # bound-flip event
            leave = -1
            leave_to_upper = False
            for i in range(m):
                if sd[i] > _PIVOT_TOL:
                    step = xB[i] / sd[i]
                    if step < delta - 1e-12 or (step < delta + 1e-12 and leave >= 0
                                                and basis[i] < basis[leave]):
                        delta, leave, leave_to_upper = step, i, False
                elif sd[i] < -_PIVOT_TOL and math.isfinite(upper[basis[i]]):
                    step = (upper[basis[i]] - xB[i]) / (-sd[i])
                    if step < delta - 1e-12 or (step < delta + 1e-12 and leave >= 0
                                                and basis[i] < basis[leave]):
                        delta, leave, leave_to_upper = step, i, True
            if not math.isfinite(delta):
                return "unbounded"
            delta = max(delta, 0.0)
            if delta <= 1e-12:
                stall += 1
                if stall > 4 * (m + allow):
                    bland = True
            else:
                stall = 0
            xB -= sigma * delta * d[:m]
            np.clip(xB, 0.0, None, out=xB)
            if leave < 0:
                at_upper[j] = not at_upper[j]
                continue
            entering_value = delta if sigma > 0 else upper[j] - delta
            leaving = basis[leave]
            at_upper[leaving] = leave_to_upper
            in_basis[leaving] = False
            in_basis[j] = True
            at_upper[j] = False
            piv = T[leave, j]
            T[leave, :] /= piv
            col = T[:m, j].copy()
            col[leave] = 0.0
            T[:m, :] -= np.outer(col, T[leave, :])
            red -= red[j] * T[leave, :]
            T[:m, j] = 0.0
            T[leave, j] = 1.0
            xB[leave] = entering_value
            basis[leave] = j

    @staticmethod
    def _expel_artificials(T, xB, basis, n: int):
        # Pivot any artificial that is still basic (at level zero) onto a
        # structural column; rows with no structural support are redundant.
        m = len(basis)
        for i in range(m):
            if basis[i] < n:
                continue
            row = T[i, :n]
            cands = np.flatnonzero(np.abs(row) > _PIVOT_TOL)
            if cands.size == 0:
                continue
            j = int(cands[0])
            piv = T[i, j]
            T[i, :] /= piv
            col = T[:m, j].copy()
            col[i] = 0.0
            T[:m, :] -= np.outer(col, T[i, :])
            T[:m, j] = 0.0
            T[i, j] = 1.0
            xB[i] = 0.0
            basis[i] = j


def lp_solve(c, A_eq, b_eq, bounds) -> LpResult:
    """Solve min c^T x s.t. A_eq x = b_eq with per-variable [lo, hi] bounds.

    Bounds entries may be +-inf (or None). On an optimal exit the result
    carries the primal feasibility residual and the gap against the dual
    bound recovered from the final simplex basis; both stay below 1e-8 for
    well-posed inputs.
    """
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    n = c.size
    b_eq = np.asarray(b_eq, dtype=np.float64).reshape(-1)
    m = b_eq.size
    A_eq = np.asarray(A_eq, dtype=np.float64).reshape(m, n) if m else np.zeros((0, n))
    if len(bounds) != n:
        raise ValueError("bounds length must match the number of variables")

    lows = np.array([-math.inf if lo is None else float(lo) for lo, _ in bounds])
    highs = np.array([math.inf if hi is None else float(hi) for _, hi in bounds])
    if np.any(lows > highs):
        return LpResult(np.full(n, math.nan), math.nan, "infeasible")

    # Standard form: free variables split, finite lowers shifted out, pure
    # uppers mirrored; two-sided bounds become implicit box bounds.
    cols: list[np.ndarray] = []
    costs: list[float] = []
    uppers: list[float] = []
    recover: list[tuple] = []
    rhs = b_eq.copy()
    for i in range(n):
        lo, hi = lows[i], highs[i]
        a = A_eq[:, i] if m else np.zeros(0)
        if math.isinf(lo) and math.isinf(hi):
            cols.append(a), costs.append(c[i]), uppers.append(math.inf)
            cols.append(-a), costs.append(-c[i]), uppers.append(math.inf)
            recover.append(("free", i, len(cols) - 2))
        elif math.isinf(lo):
            rhs = rhs - a * hi
            cols.append(-a), costs.append(-c[i]), uppers.append(math.inf)
            recover.append(("mirror", i, (len(cols) - 1, hi)))
        else:
            if lo != 0.0:
                rhs = rhs - a * lo
            cols.append(a), costs.append(c[i]), uppers.append(hi - lo)
            recover.append(("shift", i, (len(cols) - 1, lo)))

    A_std = np.column_stack(cols) if cols else np.zeros((m, 0))
    if m == 0:
        A_std = A_std.reshape(0, len(cols))
    c_std = np.asarray(costs)
    u_std = np.asarray(uppers)

    status, x_std, basis, y = _BoundedSimplex(c_std, A_std, rhs, u_std).run()
    if status != "optimal":
        return LpResult(np.full(n, math.nan), math.nan, status)

    x = np.empty(n)
    for kind, i, info in recover:
        if kind == "free":
            x[i] = x_std[info] - x_std[info + 1]
        elif kind == "shift":
            j, lo = info
            x[i] = x_std[j] + lo
        else:
            j, hi = info
            x[i] = hi - x_std[j]
    objective = float(c @ x)
    feas = float(np.abs(A_eq @ x - b_eq).max()) if m else 0.0
    gap = math.nan
    dual = None
    if y is not None:
        # Box duality: dual value = y^T b + sum over at-upper vars of u_j r_j.
        r = c_std - (y @ A_std if m else 0.0)
        at_up = np.isfinite(u_std) & (np.abs(x_std - u_std) < 1e-9) & (r < 0)
        dual_val = float(y @ rhs) + float((u_std[at_up] * r[at_up]).sum())
        gap = abs(float(c_std @ x_std) - dual_val)
        dual = y
    elif m == 0 or not basis:
        gap = 0.0
    return LpResult(x, objective, "optimal", feas, gap, dual)


def alp_step(data: Dataset, b_prev) -> np.ndarray:
    """One linearized step: minimize the l1 objective on the tangent
    hyperplane through ``b_prev``, then re-project onto the sphere.

    Solved through the LP dual (max y s.t. X w = y b_prev, |w| <= 1); the
    primal optimum is the solution of the tight system {x_j^T b = 0 for
    interior w_j, b_prev^T b = 1} and is certified against the dual value.
    """
    b_prev = unit_vector(b_prev, atol=1e-9)
    D, L = data.ambient_dim, data.n_columns
    if L == 0:
        raise ValueError("cannot run the tangent step on an empty dataset")
    # Dual variables [w (L, in [-1,1]) | y (free)]; min -y.
    c = np.zeros(L + 1)
    c[L] = -1.0
    A = np.concatenate([data.columns, -b_prev[:, None]], axis=1)
    bounds = [(-1.0, 1.0)] * L + [(None, None)]
    res = lp_solve(c, A, np.zeros(D), bounds)
    if res.status == "unbounded":
        raise ValueError("tangent subproblem unbounded: the data are rank deficient")
    if res.status != "optimal":
        raise RuntimeError(f"tangent subproblem unexpectedly {res.status}")
    w = res.x[:L]
    y_star = res.x[L]
    interior = np.flatnonzero(np.abs(w) < 1.0 - 1e-7)
    rows = np.concatenate([data.columns[:, interior].T, b_prev[None, :]], axis=0)
    rhs = np.zeros(rows.shape[0])
    rhs[-1] = 1.0
    if rows.shape[0] == D:
        try:
            b = np.linalg.solve(rows, rhs)
        except np.linalg.LinAlgError:
            b = np.linalg.lstsq(rows, rhs, rcond=None)[0]
    else:
        b = np.linalg.lstsq(rows, rhs, rcond=None)[0]
    primal = float(np.abs(data.columns.T @ b).sum())
    scale = max(1.0, abs(y_star))
    if abs(primal - y_star) > 1e-7 * scale or abs(float(b @ b_prev) - 1.0) > _FEAS_TOL:
        raise RuntimeError(
            f"LP certificate check failed (primal {primal!r}, dual bound {y_star!r})")
    return b / np.linalg.norm(b)


def alp_solve(data: Dataset, b0, max_iters: int,
              truth: SubspaceModel | None = None) -> SolveReport:
    """Iterate ``alp_step`` until the objective stalls (< 1e-12 decrease).

    The objective sequence is non-increasing: each pre-projection iterate is
    feasible with norm >= 1, so normalizing can only shrink the value.
    """
    from .psgm import _angles, _objective  # shared trace helpers
    b = np.array(unit_vector(b0, atol=1e-9))
    cols_t = np.ascontiguousarray(data.columns.T)
    trace: list[TraceRow] = []
    flags: list[str] = []
    start = time.perf_counter_ns()
    f_cur = _objective(cols_t, b)
    if max_iters == 0:
        flags.append("max_iters_zero")
        return SolveReport(b, 0, "max_iters", trace, flags)
    iters = 0
    termination = "max_iters"
    for k in range(1, max_iters + 1):
        iters = k
        b_next = alp_step(data, b)
        f_next = _objective(cols_t, b_next)
        theta, phi = _angles(truth, b_next)
        trace.append(TraceRow(k, f_next, math.nan, theta, phi,
                              time.perf_counter_ns() - start))
        if f_cur - f_next < 1e-12:
            b = b_next if f_next <= f_cur else b
            termination = "grad_tol"
            break
        b, f_cur = b_next, f_next
    return SolveReport(b, iters, termination, trace, flags)


def irls_solve(data: Dataset, b0, delta: float = 1e-10, max_iters: int = 100,
               tol: float = 1e-12, truth: SubspaceModel | None = None) -> SolveReport:
    """Iteratively reweighted least squares with damped inverse-residual weights.

    Each iterate is the bottom eigenvector of X W X^T with weights
    w_j = 1 / max(|x_j^T b|, delta); stops once 1 - |<b_k, b_{k-1}>| <= tol.
    The damped surrogate objective (|r| past delta, quadratic inside) is
    tracked in ``aux['damped_objective']`` and never increases.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    from .psgm import _angles, _objective
    b = np.array(unit_vector(b0, atol=1e-9))
    cols = data.columns
    cols_t = np.ascontiguousarray(cols.T)

    def damped(r: np.ndarray) -> float:
        a = np.abs(r)
        return float(np.where(a >= delta, a, a * a / (2 * delta) + delta / 2).sum())

    trace: list[TraceRow] = []
    damped_vals = [damped(cols_t @ b)]
    start = time.perf_counter_ns()
    iters = 0
    termination = "max_iters"
    for k in range(1, max_iters + 1):
        iters = k
        r = cols_t @ b
        w = 1.0 / np.maximum(np.abs(r), delta)
        gram = (cols * w) @ cols.T
        _, vecs = np.linalg.eigh(gram)
        b_next = fix_sign(vecs[:, 0])
        theta, phi = _angles(truth, b_next)
        trace.append(TraceRow(k, _objective(cols_t, b_next), math.nan, theta, phi,
                              time.perf_counter_ns() - start))
        damped_vals.append(damped(cols_t @ b_next))
        drift = 1.0 - abs(float(b_next @ b))
        b = b_next
        if drift <= tol:
            termination = "grad_tol"
            break
    return SolveReport(b, iters, termination, trace, [],
                       aux={"damped_objective": damped_vals})
