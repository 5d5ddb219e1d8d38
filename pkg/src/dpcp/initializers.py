"""Starting vectors for the sphere solvers: random and spectral.

The spectral start is the classical PCA normal estimate: the bottom
eigenvector of the data Gram matrix X X^T. Its angle to the complement of the
inlier subspace is controlled by sqrt(sigma_1^2(O) - sigma_D^2(O)) / sigma_d(X).
"""

from __future__ import annotations

import numpy as np

from .core import Dataset
from .synth import derive_rng

_DENSE_EIG_MAX_DIM = 256


def random_init(D: int, seed: int) -> np.ndarray:
    """Uniform draw from the unit sphere of R^D; deterministic given seed."""
    if D < 2:
        raise ValueError("D must be at least 2")
    g = derive_rng(seed).standard_normal(D)
    return g / np.linalg.norm(g)


def fix_sign(v: np.ndarray) -> np.ndarray:
    """Flip so the first significantly nonzero entry is positive.

    Eigenvectors are sign-ambiguous; this pins a deterministic representative.
    "Significant" means above 1e-8 * max|v|, so exact-zero leading entries
    (and rounding dust) never decide the sign.
    """
    thresh = 1e-8 * np.abs(v).max()
    for x in v:
        if abs(x) > thresh:
            return v if x > 0 else -v
    return v


def spectral_init(data: Dataset) -> np.ndarray:
    """Unit eigenvector of X X^T for the smallest eigenvalue.

    Dense symmetric eigendecomposition up to D=256; shifted inverse power
    iteration beyond that. The achieved eigen-residual ||G v - lambda v|| is
    kept below 1e-8 * lambda_max.
    """
    if data.n_columns < 1:
        raise ValueError("spectral_init needs at least one column")
    X = data.columns
    gram = X @ X.T
    D = gram.shape[0]
    if D <= _DENSE_EIG_MAX_DIM:
        _, vecs = np.linalg.eigh(gram)
        v = vecs[:, 0]
    else:
        v = _inverse_power_bottom(gram)
    lam = float(v @ gram @ v)
    lam_max = float(np.linalg.norm(gram, 2)) if D > _DENSE_EIG_MAX_DIM else float(
        np.linalg.eigvalsh(gram)[-1])
    resid = float(np.linalg.norm(gram @ v - lam * v))
    if lam_max > 0 and resid > 1e-8 * lam_max:
        raise RuntimeError(f"eigen-residual {resid:.3e} exceeds 1e-8 * lambda_max")
    return fix_sign(v / np.linalg.norm(v))


def _inverse_power_bottom(gram: np.ndarray, tol: float = 1e-10,
                          max_iters: int = 10_000) -> np.ndarray:
    # Shift 0; a tiny ridge regularizes exactly singular Grams.
    D = gram.shape[0]
    ridge = 1e-14 * max(np.trace(gram) / D, 1.0)
    shifted = gram + ridge * np.eye(D)
    try:
        chol = np.linalg.cholesky(shifted)
    except np.linalg.LinAlgError:
        shifted = gram + 1e-8 * np.trace(gram) / D * np.eye(D)
        chol = np.linalg.cholesky(shifted)
    v = np.full(D, 1.0 / np.sqrt(D))
    for _ in range(max_iters):
        w = np.linalg.solve(chol.T, np.linalg.solve(chol, v))
        w /= np.linalg.norm(w)
        if 1.0 - abs(w @ v) <= tol:
            return w
        v = w
    return v
