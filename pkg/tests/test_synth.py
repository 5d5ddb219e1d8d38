import numpy as np
import pytest

from dpcp.core import complement_basis
from dpcp.synth import (SphericalModelSpec, derive_rng, outlier_ratio_to_M,
                        sample_spherical)


def test_spec_validation():
    with pytest.raises(ValueError):
        SphericalModelSpec(D=3, d=3, N=5, M=5, seed=0)
    with pytest.raises(ValueError):
        SphericalModelSpec(D=3, d=1, N=0, M=0, seed=0)
    with pytest.raises(ValueError):
        SphericalModelSpec(D=3, d=1, N=-1, M=2, seed=0)


def test_inliers_lie_in_planted_line():
    data, truth = sample_spherical(SphericalModelSpec(D=3, d=1, N=5, M=0, seed=7))
    direction = truth.model.basis[:, 0]
    dots = np.abs(direction @ data.columns)
    assert np.all(np.abs(dots - 1.0) <= 1e-9)


def test_outlier_ratio_examples():
    assert outlier_ratio_to_M(500, 0.7) == 1167
    assert outlier_ratio_to_M(500, 0.0) == 0
    assert outlier_ratio_to_M(1000, 0.5) == 1000
    with pytest.raises(ValueError):
        outlier_ratio_to_M(10, 1.0)


def test_paper_scale_instance():
    data, truth = sample_spherical(SphericalModelSpec(D=30, d=29, N=500, M=1167, seed=1))
    assert data.n_columns == 1667
    assert data.inlier_count == 500 and data.outlier_count == 1167
    assert data.outlier_count / data.n_columns == pytest.approx(0.7, abs=1e-3)


def test_determinism_bit_identical():
    spec = SphericalModelSpec(D=6, d=3, N=40, M=25, seed=99)
    d1, t1 = sample_spherical(spec)
    d2, t2 = sample_spherical(spec)
    assert np.array_equal(d1.columns, d2.columns)
    assert np.array_equal(d1.inlier_mask, d2.inlier_mask)
    assert np.array_equal(t1.model.basis, t2.model.basis)


def test_unit_norm_and_normal_orthogonality():
    data, truth = sample_spherical(SphericalModelSpec(D=8, d=5, N=60, M=40, seed=3))
    assert np.all(np.abs(np.linalg.norm(data.columns, axis=0) - 1.0) <= 1e-9)
    normals = complement_basis(truth.model)
    assert np.abs(normals.T @ data.inliers).max() <= 1e-9


def test_outlier_mean_concentration():
    # uniform-sphere symmetry: ||mean of outliers|| <= 5/sqrt(M) nearly always
    M = 10_000
    hits = 0
    for seed in range(100):
        data, _ = sample_spherical(SphericalModelSpec(D=5, d=2, N=1, M=M, seed=seed))
        mean = data.outliers.mean(axis=1)
        hits += np.linalg.norm(mean) <= 5 / np.sqrt(M)
    assert hits >= 95


def test_derive_rng_streams_are_stable_and_distinct():
    a = derive_rng(5, 1, 2).standard_normal(4)
    b = derive_rng(5, 1, 2).standard_normal(4)
    c = derive_rng(5, 2, 1).standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
