"""3-D point-cloud ingestion and plane detection in homogeneous coordinates.

Each point (x, y, z) becomes the unit vector (x, y, z, w)/||.|| so affine
planes turn into linear hyperplanes of R^4 and any codimension-1 solver
applies. Scores are |n^T x| for the learned 4-vector n; thresholding them
splits inliers (on-plane) from outliers.
"""

from __future__ import annotations

import json
import math
import struct
import time
from dataclasses import dataclass

import numpy as np

from .altsolvers import alp_solve, irls_solve
from .baselines import ransac, RansacResult
from .core import Dataset
from .evaluation import roc_from_scores, f1_at_threshold
from .initializers import spectral_init
from .psgm import SolveOptions, solve, solve_mbls

METHODS = ("psgm", "alp", "irls", "ransac")

# Sensor-style crop used by the road-plane experiments (meters, symmetric).
DEFAULT_BOX = ((-40.0, 40.0), (-20.0, 20.0), (-3.0, 3.0))


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray                       # (n, 3) float64
    reflectance: np.ndarray | None = None    # (n,)
    labels: np.ndarray | None = None         # (n,) bool, True = inlier

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must be an (n, 3) array")
        if not np.isfinite(pts).all():
            raise ValueError("points contain non-finite coordinates")
        object.__setattr__(self, "points", pts)

    @property
    def n_points(self) -> int:
        return self.points.shape[0]


def load_cloud(path, fmt: str) -> PointCloud:
    """Read ``ascii_xyz`` (x y z [r] per line) or ``bin_f32x4`` files.

    Malformed input reports the offending line number or byte offset.
    """
    if fmt == "ascii_xyz":
        pts: list[list[float]] = []
        refl: list[float] = []
        with open(path, "r") as fh:
            for lineno, line in enumerate(fh, start=1):
                fields = line.split()
                if not fields:
                    continue
                if len(fields) not in (3, 4):
                    raise ValueError(f"{path}:{lineno}: expected 'x y z [r]', got {len(fields)} fields")
                try:
                    vals = [float(v) for v in fields]
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric field") from None
                if not all(math.isfinite(v) for v in vals):
                    raise ValueError(f"{path}:{lineno}: non-finite value")
                pts.append(vals[:3])
                if len(vals) == 4:
                    refl.append(vals[3])
        if refl and len(refl) != len(pts):
            raise ValueError(f"{path}: reflectance present on only some lines")
        return PointCloud(np.array(pts, dtype=np.float64).reshape(-1, 3),
                          np.array(refl) if refl else None)
    if fmt == "bin_f32x4":
        raw = open(path, "rb").read()
        if len(raw) % 16:
            raise ValueError(f"{path}: truncated record at offset {len(raw) - len(raw) % 16}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(-1, 4).astype(np.float64)
        if not np.isfinite(arr).all():
            bad = int(np.flatnonzero(~np.isfinite(arr).all(axis=1))[0])
            raise ValueError(f"{path}: non-finite value in record {bad} (offset {16 * bad})")
        return PointCloud(arr[:, :3], arr[:, 3])
    raise ValueError(f"unknown cloud format {fmt!r}")


def load_labels(path, n_points: int) -> np.ndarray:
    """Sidecar annotation: one byte per point, 1 = inlier, 0 = outlier."""
    raw = open(path, "rb").read()
    if len(raw) != n_points:
        raise ValueError(f"{path}: {len(raw)} label bytes for {n_points} points")
    return np.frombuffer(raw, dtype=np.uint8).astype(bool)


def box_filter_mask(points: np.ndarray, box) -> np.ndarray:
    mask = np.ones(points.shape[0], dtype=bool)
    for axis, (lo, hi) in enumerate(box):
        mask &= (points[:, axis] >= lo) & (points[:, axis] <= hi)
    return mask


def homogenize(cloud: PointCloud, prefilter=None, weight: float = 1.0) -> Dataset:
    """Embed points as unit vectors (x, y, z, weight)/norm in R^4.

    ``prefilter`` is an axis-aligned box ((xlo, xhi), (ylo, yhi), (zlo, zhi))
    applied before the embedding; labels pass through when present.
    """
    pts = cloud.points
    labels = cloud.labels
    if prefilter is not None:
        mask = box_filter_mask(pts, prefilter)
        pts = pts[mask]
        if labels is not None:
            labels = labels[mask]
    if pts.shape[0] == 0:
        raise ValueError("no points remain after the prefilter")
    hom = np.concatenate([pts, np.full((pts.shape[0], 1), float(weight))], axis=1)
    return Dataset.from_points(hom.T, labels)


@dataclass(frozen=True)
class PlaneDetection:
    normal4: np.ndarray
    scores: np.ndarray
    inlier_mask: np.ndarray
    threshold: float
    wall_nanos: int
    method: str
    options: dict
    iterations: int
    auc: float | None = None
    f1: float | None = None
    flags: tuple[str, ...] = ()

    def to_json(self) -> str:
        return json.dumps({
            "normal4": [float(v) for v in self.normal4],
            "threshold": self.threshold,
            "inlier_count": int(self.inlier_mask.sum()),
            "auc": self.auc,
            "f1": self.f1,
            "wall_nanos": self.wall_nanos,
            "method": self.method,
            "options": self.options,
            "iterations": self.iterations,
        })


def detect_plane(data: Dataset, method: str, threshold: float, *, seed: int = 0,
                 max_iters: int = 200, ransac_iterations: int | None = None,
                 schedule=None) -> PlaneDetection:
    """Fit one hyperplane of R^4 with the chosen solver and score every point.

    Wall time and iteration count are recorded so budget-matched comparisons
    (e.g. RANSAC at the subgradient solver's iteration count) are possible.
    """
    if data.ambient_dim != 4:
        raise ValueError("detect_plane expects homogenized 4-dimensional data")
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    start = time.perf_counter_ns()
    options: dict = {"max_iters": max_iters, "seed": seed}
    if method == "ransac":
        iters = ransac_iterations if ransac_iterations is not None else max_iters
        result: RansacResult = ransac(data, d=3, threshold=threshold,
                                      iterations=iters, seed=seed)
        basis = result.model.basis
        q, _ = np.linalg.qr(np.column_stack([basis, np.eye(4)]))
        normal = q[:, 3]
        iterations = result.iterations_run
        options["threshold_internal"] = threshold
    else:
        b0 = spectral_init(data)
        if method == "psgm":
            from .psgm import auto_mu0, StepSchedule
            sched = schedule or StepSchedule.piecewise_geometric(auto_mu0(data, b0))
            opts = SolveOptions(sched, max_iters=max_iters, record_trace=False, seed=seed)
            report = solve_mbls(data, b0, opts) if sched.kind == "mbls" else solve(data, b0, opts)
        elif method == "alp":
            report = alp_solve(data, b0, max_iters=min(max_iters, 10))
        else:
            report = irls_solve(data, b0, max_iters=max_iters)
        normal = report.final_b
        iterations = report.iters
    wall = time.perf_counter_ns() - start
    scores = np.abs(data.columns.T @ normal)
    inlier_mask = scores <= threshold
    auc = f1 = None
    flags: tuple[str, ...] = ()
    if data.labeled:
        try:
            auc = roc_from_scores(scores, data.inlier_mask).auc
            f1 = f1_at_threshold(scores, data.inlier_mask, threshold)
        except ValueError:
            flags = ("single_class",)
    elif scores.max() <= 1e-9:
        flags = ("single_class",)
    return PlaneDetection(normal, scores, inlier_mask, threshold, wall, method,
                          options, iterations, auc, f1, flags)
