"""Synthetic data from the random spherical model.

Inliers are uniform on the intersection of the unit sphere with a subspace
drawn uniformly from the Grassmannian; outliers are uniform on the full
sphere. All randomness flows through numpy's PCG64 seeded via SeedSequence,
so a given seed pins the output bit-for-bit (see ``derive_rng`` for how
sub-streams are derived from a root seed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Dataset, SubspaceModel


def derive_rng(root_seed: int, *path: int) -> np.random.Generator:
    """Deterministic sub-stream: Generator(PCG64(SeedSequence([root, *path]))).

    Harnesses address per-cell / per-trial streams by integer path so that
    concurrent execution order cannot change any stream's content.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([root_seed, *path])))


@dataclass(frozen=True)
class SphericalModelSpec:
    """Parameters of the random spherical model."""

    D: int
    d: int
    N: int
    M: int
    seed: int

    def __post_init__(self):
        if not 1 <= self.d < self.D:
            raise ValueError(f"need 1 <= d < D, got d={self.d}, D={self.D}")
        if self.N < 0 or self.M < 0:
            raise ValueError("N and M must be nonnegative")
        if self.N + self.M < 1:
            raise ValueError("need at least one column")


@dataclass(frozen=True)
class GroundTruth:
    """Planted subspace together with the spec that generated it."""

    model: SubspaceModel
    spec: SphericalModelSpec


def unit_sphere_samples(rng: np.random.Generator, dim: int, n: int) -> np.ndarray:
    """n columns drawn uniformly from the unit sphere of R^dim."""
    g = rng.standard_normal((dim, n))
    return g / np.linalg.norm(g, axis=0)


def sample_spherical(spec: SphericalModelSpec) -> tuple[Dataset, GroundTruth]:
    """Draw a labeled dataset from the random spherical model.

    The subspace is the column span of the Q factor of a D x d Gaussian
    matrix (uniform over the Grassmannian by rotation invariance). Columns
    are shuffled by a uniform permutation; labels travel with the columns.
    """
    rng = derive_rng(spec.seed)
    q, r = np.linalg.qr(rng.standard_normal((spec.D, spec.d)))
    q = q * np.sign(np.where(np.diag(r) == 0.0, 1.0, np.diag(r)))  # fix QR sign ambiguity
    inliers = q @ unit_sphere_samples(rng, spec.d, spec.N)
    outliers = unit_sphere_samples(rng, spec.D, spec.M)
    columns = np.concatenate([inliers, outliers], axis=1)
    mask = np.concatenate([np.ones(spec.N, dtype=bool), np.zeros(spec.M, dtype=bool)])
    perm = rng.permutation(spec.N + spec.M)
    data = Dataset(columns[:, perm], mask[perm])
    return data, GroundTruth(SubspaceModel(basis=q), spec)


def outlier_ratio_to_M(N: int, ratio: float) -> int:
    """Outlier count M with M/(M+N) = ratio, rounded to the nearest integer."""
    if not 0.0 <= ratio < 1.0:
        raise ValueError(f"ratio must lie in [0, 1), got {ratio}")
    return round(ratio * N / (1.0 - ratio))
