"""Dense primitives for l1 subspace recovery on the sphere.

The central object is a unit-norm dataset ``X`` (columns on the sphere) and the
objective ``f(b) = ||X^T b||_1``, whose minimizers over the unit sphere are
normal vectors to the inlier subspace when the data are well distributed.
This module holds the data containers, the objective and its Riemannian
subgradient, principal-angle bookkeeping, and a brute-force spherical grid
minimizer used as an independent oracle on tiny instances.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

# Default tolerances. The underlying math fixes none of these; they are module
# constants so callers can override them per call where a ``tol``/``atol``
# argument is exposed.
UNIT_NORM_TOL = 1e-12      # unit vectors
COLUMN_NORM_TOL = 1e-9     # dataset columns
ORTHO_TOL = 1e-10          # orthonormality of subspace bases
MIN_COLUMN_NORM = 1e-12    # columns shorter than this are rejected on ingestion

# Prefix-nested quasirandom constants (plastic number) for the D=3 sphere covering.
_PLASTIC = 1.324717957244746025960908854
_R2_A1 = 1.0 / _PLASTIC
_R2_A2 = 1.0 / _PLASTIC**2


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True, order="F")
    a.setflags(write=False)
    return a


def unit_vector(v, *, atol: float = UNIT_NORM_TOL) -> np.ndarray:
    """Validate ``v`` as a point on the sphere and return a read-only copy.

    Raises ValueError if the Euclidean norm differs from 1 by more than
    ``atol`` or if the dimension is below 2.
    """
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size < 2:
        raise ValueError(f"unit vectors need dimension >= 2, got {v.size}")
    nrm = float(np.linalg.norm(v))
    if abs(nrm - 1.0) > atol:
        raise ValueError(f"vector norm {nrm!r} is not 1 within {atol}")
    out = v.copy()
    out.setflags(write=False)
    return out


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    nrm = np.linalg.norm(v)
    if nrm < MIN_COLUMN_NORM:
        raise ValueError("cannot normalize a (near-)zero vector")
    return v / nrm


@dataclass(frozen=True, eq=False)
class Dataset:
    """Column-major collection of unit-norm D-vectors with optional labels.

    ``inlier_mask`` is a boolean per-column tag (True = inlier) or None for
    unlabeled data. Columns are validated to unit norm within ``column_tol``.
    Instances are immutable and safe to share across workers.
    """

    columns: np.ndarray
    inlier_mask: np.ndarray | None = None
    column_tol: float = field(default=COLUMN_NORM_TOL, repr=False)

    def __post_init__(self):
        cols = np.asarray(self.columns, dtype=np.float64)
        if cols.ndim != 2:
            raise ValueError(f"columns must be a 2-d array, got shape {cols.shape}")
        object.__setattr__(self, "columns", _readonly(cols))
        if self.columns.shape[1]:
            norms = np.linalg.norm(self.columns, axis=0)
            bad = np.flatnonzero(np.abs(norms - 1.0) > self.column_tol)
            if bad.size:
                raise ValueError(
                    f"{bad.size} column(s) are not unit norm within {self.column_tol}; "
                    f"first offender: index {bad[0]} with norm {norms[bad[0]]!r}"
                )
        if self.inlier_mask is not None:
            mask = np.asarray(self.inlier_mask, dtype=bool).reshape(-1)
            if mask.size != self.columns.shape[1]:
                raise ValueError("label mask length must match the number of columns")
            mask = mask.copy()
            mask.setflags(write=False)
            object.__setattr__(self, "inlier_mask", mask)

    @classmethod
    def from_points(cls, points, inlier_mask=None) -> "Dataset":
        """Build a dataset from raw columns, normalizing each to unit norm.

        Columns with norm below MIN_COLUMN_NORM are rejected (division by a
        vanishing norm would blow up) rather than silently normalized.
        """
        pts = np.asarray(points, dtype=np.float64)
        if pts.ndim != 2:
            raise ValueError("points must be a D x L array")
        norms = np.linalg.norm(pts, axis=0)
        tiny = np.flatnonzero(norms < MIN_COLUMN_NORM)
        if tiny.size:
            raise ValueError(f"columns {tiny.tolist()[:8]} have norm < {MIN_COLUMN_NORM}")
        return cls(pts / norms if pts.shape[1] else pts, inlier_mask)

    @property
    def ambient_dim(self) -> int:
        return self.columns.shape[0]

    @property
    def n_columns(self) -> int:
        return self.columns.shape[1]

    @property
    def labeled(self) -> bool:
        return self.inlier_mask is not None

    @property
    def inlier_count(self) -> int:
        if self.inlier_mask is None:
            raise ValueError("dataset is unlabeled")
        return int(self.inlier_mask.sum())

    @property
    def outlier_count(self) -> int:
        return self.n_columns - self.inlier_count

    @property
    def inliers(self) -> np.ndarray:
        if self.inlier_mask is None:
            raise ValueError("dataset is unlabeled")
        return self.columns[:, self.inlier_mask]

    @property
    def outliers(self) -> np.ndarray:
        if self.inlier_mask is None:
            raise ValueError("dataset is unlabeled")
        return self.columns[:, ~self.inlier_mask]


@dataclass(frozen=True, eq=False)
class SubspaceModel:
    """Orthonormal inlier basis (D x d) and/or normal vectors (D x c).

    When both are present the two blocks must be mutually orthogonal: the
    normals span a subspace of the orthogonal complement of the basis.
    """

    basis: np.ndarray | None = None
    normals: np.ndarray | None = None
    ortho_tol: float = field(default=ORTHO_TOL, repr=False)

    def __post_init__(self):
        if self.basis is None and self.normals is None:
            raise ValueError("need at least one of basis / normals")
        for name in ("basis", "normals"):
            mat = getattr(self, name)
            if mat is None:
                continue
            mat = np.asarray(mat, dtype=np.float64)
            if mat.ndim == 1:
                mat = mat[:, None]
            gram = mat.T @ mat
            err = np.abs(gram - np.eye(mat.shape[1])).max()
            if err > self.ortho_tol:
                raise ValueError(f"{name} is not orthonormal (deviation {err:.3e})")
            object.__setattr__(self, name, _readonly(mat))
        if self.basis is not None and self.normals is not None:
            if self.basis.shape[0] != self.normals.shape[0]:
                raise ValueError("basis and normals live in different ambient dimensions")
            cross = np.abs(self.basis.T @ self.normals).max()
            if cross > self.ortho_tol:
                raise ValueError(f"basis and normals are not orthogonal (deviation {cross:.3e})")

    @property
    def ambient_dim(self) -> int:
        mat = self.basis if self.basis is not None else self.normals
        return mat.shape[0]

    @property
    def dim(self) -> int:
        if self.basis is None:
            raise ValueError("model has no basis")
        return self.basis.shape[1]

    @property
    def codim(self) -> int:
        if self.normals is None:
            raise ValueError("model has no normals")
        return self.normals.shape[1]


@dataclass(frozen=True)
class AngleReading:
    """Principal angles of a unit vector: phi from the subspace, theta from
    its orthogonal complement. The two always sum to pi/2."""

    phi_from_S: float
    theta_from_complement: float

    def __post_init__(self):
        if abs(self.phi_from_S + self.theta_from_complement - math.pi / 2) > 1e-10:
            raise ValueError("phi + theta must equal pi/2")


def sign_vec(v) -> np.ndarray:
    """Elementwise sign with sign(0) = 0, returned as an integer array."""
    return np.sign(np.asarray(v, dtype=np.float64)).astype(np.int64)


def _check_dims(data: Dataset, b: np.ndarray):
    if b.shape[0] != data.ambient_dim:
        raise ValueError(
            f"dimension mismatch: data is {data.ambient_dim}-dimensional, b has {b.shape[0]}"
        )


def objective(data: Dataset, b) -> float:
    """l1 objective ``||X^T b||_1``; absolutely 1-homogeneous in ``b``."""
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    _check_dims(data, b)
    if data.n_columns == 0:
        return 0.0
    return float(np.abs(data.columns.T @ b).sum())


def riemannian_subgradient(data: Dataset, b) -> np.ndarray:
    """Riemannian subgradient ``(I - b b^T) X sign(X^T b)`` with sign(0)=0.

    The result is orthogonal to ``b``; it vanishes exactly at critical points
    under the sign(0)=0 selection.
    """
    b = unit_vector(b, atol=1e-9)
    _check_dims(data, b)
    if data.n_columns == 0:
        return np.zeros_like(b)
    g = data.columns @ np.sign(data.columns.T @ b)
    return g - b * (b @ g)


def principal_angle(model: SubspaceModel, b) -> AngleReading:
    """Angles of unit ``b`` from the model's basis span and its complement.

    cos(phi) = ||basis^T b||; theta = pi/2 - phi. Values are clamped into
    [0, pi/2] against rounding.
    """
    if model.basis is None:
        raise ValueError("principal_angle needs a model with a basis")
    b = unit_vector(b, atol=1e-9)
    c = min(1.0, float(np.linalg.norm(model.basis.T @ b)))
    return AngleReading(math.acos(c), math.asin(c))


def complement_basis(model: SubspaceModel) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of the model's basis."""
    if model.basis is None:
        raise ValueError("complement_basis needs a model with a basis")
    q, _ = np.linalg.qr(model.basis, mode="complete")
    return q[:, model.basis.shape[1]:]


@functools.lru_cache(maxsize=2)
def circle_grid(resolution: int) -> np.ndarray:
    """Uniform angular grid on the half-circle, as 2 x resolution unit columns.

    Cached and read-only; grids nest whenever the resolution doubles.
    """
    theta = np.pi * np.arange(resolution) / resolution
    grid = np.vstack([np.cos(theta), np.sin(theta)])
    grid.setflags(write=False)
    return grid


@functools.lru_cache(maxsize=2)
def sphere_covering(resolution: int) -> np.ndarray:
    """Prefix-nested quasirandom covering of the 2-sphere (3 x resolution).

    The points are the first ``resolution`` terms of an infinite golden-spiral
    style sequence (plastic-constant Kronecker lattice mapped area-preservingly
    to the sphere), so coverings of increasing resolution are nested. Cached
    and read-only.
    """
    i = np.arange(resolution)
    z = 1.0 - 2.0 * np.mod(0.5 + i * _R2_A1, 1.0)
    az = 2.0 * np.pi * np.mod(0.5 + i * _R2_A2, 1.0)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    grid = np.vstack([r * np.cos(az), r * np.sin(az), z])
    grid.setflags(write=False)
    return grid


def grid_oracle(data: Dataset, resolution: int) -> tuple[np.ndarray, float]:
    """Brute-force minimizer of the l1 objective over a deterministic grid.

    Supports D=2 (uniform angular grid) and D=3 (nested sphere covering).
    Returns the best grid point and its objective value. Because the D=3
    covering is prefix-nested and the D=2 grids nest under doubling, the
    reported minimum never increases with finer resolution.

    On the circle the full sweep is shortcut exactly: between consecutive
    sign-flip angles the objective is a positive cosine arc, so each
    segment's grid minimum sits at its first or last grid point; only those
    candidates are evaluated. The result is identical to the full sweep.
    """
    if resolution < 100:
        raise ValueError("resolution must be at least 100")
    D = data.ambient_dim
    if D == 2:
        grid = circle_grid(resolution)
    elif D == 3:
        grid = sphere_covering(resolution)
    else:
        raise ValueError(f"grid_oracle supports D in {{2, 3}}, got D={D}")
    if data.n_columns == 0:
        b = grid[:, 0].copy()
        b.setflags(write=False)
        return b, 0.0
    if D == 2:
        idx, val = _circle_argmin(data.columns, resolution, grid)
    else:
        idx, val = _grid_argmin_sweep(data.columns, grid)
    b = grid[:, idx].copy()
    b.setflags(write=False)
    return b, val


def _grid_argmin_sweep(columns: np.ndarray, grid: np.ndarray) -> tuple[int, float]:
    # Chunked evaluation keeps the score buffer cache-sized at high resolutions.
    best_val = math.inf
    best_idx = 0
    chunk = 1 << 18
    cols_t = columns.T
    resolution = grid.shape[1]
    buf = np.empty((cols_t.shape[0], min(chunk, resolution)))
    for start in range(0, resolution, chunk):
        block = grid[:, start:start + chunk]
        if block.shape[1] == buf.shape[1]:
            scores = np.dot(cols_t, block, out=buf)
        else:
            scores = np.dot(cols_t, block)
        np.abs(scores, out=scores)
        vals = scores.sum(axis=0)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val = float(vals[j])
            best_idx = start + j
    return best_idx, best_val


def _circle_argmin(columns: np.ndarray, resolution: int,
                   grid: np.ndarray) -> tuple[int, float]:
    h = math.pi / resolution
    alpha = np.mod(np.arctan2(columns[1], columns[0]), math.pi)
    kinks = np.sort(np.mod(alpha + math.pi / 2, math.pi))
    ends = np.concatenate([kinks[1:], [kinks[0] + math.pi]])
    cand: set[int] = {0, resolution - 1}
    for lo, hi in zip(kinks, ends):
        first = math.ceil(lo / h - 1e-12)
        last = math.ceil(hi / h - 1e-12) - 1
        if first > last:
            continue
        for k in (first, first + 1, last - 1, last):
            if first <= k <= last:
                cand.add(k % resolution)
    idx = np.fromiter(cand, dtype=np.int64)
    vals = np.abs(columns.T @ grid[:, idx]).sum(axis=0)
    j = int(np.argmin(vals))
    return int(idx[j]), float(vals[j])
