import math

import numpy as np
import pytest

from dpcp.core import (AngleReading, Dataset, SubspaceModel, circle_grid, grid_oracle,
                       objective, principal_angle, riemannian_subgradient, sign_vec,
                       unit_vector, _grid_argmin_sweep, sphere_covering)

RT2 = math.sqrt(2)


def test_sign_vec_examples():
    assert sign_vec([2.5]).tolist() == [1]
    assert sign_vec([0.0]).tolist() == [0]
    assert sign_vec([-3.0, 0.0, 4.0]).tolist() == [-1, 0, 1]
    assert sign_vec([-0.0]).tolist() == [0]


def test_objective_examples():
    data = Dataset(np.eye(2))
    assert objective(data, [1.0, 0.0]) == pytest.approx(1.0)
    assert objective(data, [1 / RT2, 1 / RT2]) == pytest.approx(RT2, abs=1e-12)
    empty = Dataset(np.zeros((2, 0)))
    assert objective(empty, [1.0, 0.0]) == 0.0
    with pytest.raises(ValueError):
        objective(data, [1.0, 0.0, 0.0])


def test_objective_is_one_homogeneous():
    rng = np.random.default_rng(0)
    cols = rng.standard_normal((4, 9))
    data = Dataset(cols / np.linalg.norm(cols, axis=0))
    b = rng.standard_normal(4)
    for c in (0.5, 2.0, 17.25):
        assert objective(data, c * b) == pytest.approx(c * objective(data, b), rel=1e-12)


def test_subgradient_examples():
    b = np.array([1 / RT2, 1 / RT2])
    data_b = Dataset(b[:, None])
    assert np.allclose(riemannian_subgradient(data_b, b), 0.0, atol=1e-12)
    # sign(0)=0 kills the orthogonal column
    data = Dataset(np.array([[1.0], [0.0]]))
    assert np.allclose(riemannian_subgradient(data, [0.0, 1.0]), 0.0)
    g = riemannian_subgradient(data, b)
    assert np.allclose(g, [0.5, -0.5], atol=1e-12)


def test_subgradient_orthogonal_to_b():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        D = int(rng.integers(2, 8))
        L = int(rng.integers(1, 12))
        cols = rng.standard_normal((D, L))
        data = Dataset(cols / np.linalg.norm(cols, axis=0))
        b = rng.standard_normal(D)
        b /= np.linalg.norm(b)
        g = riemannian_subgradient(data, b)
        assert abs(float(b @ g)) <= 1e-10


def test_principal_angle():
    model = SubspaceModel(basis=np.eye(3)[:, :2])
    assert principal_angle(model, [1.0, 0.0, 0.0]).phi_from_S == pytest.approx(0.0)
    assert principal_angle(model, [0.0, 0.0, 1.0]).phi_from_S == pytest.approx(math.pi / 2)
    m2 = SubspaceModel(basis=np.array([[1.0], [0.0]]))
    reading = principal_angle(m2, [1 / RT2, 1 / RT2])
    assert reading.phi_from_S == pytest.approx(math.pi / 4, abs=1e-12)
    assert reading.phi_from_S + reading.theta_from_complement == pytest.approx(math.pi / 2)


def test_principal_angle_basis_invariance():
    rng = np.random.default_rng(2)
    for _ in range(20):
        base, _ = np.linalg.qr(rng.standard_normal((6, 3)))
        rot, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        b = rng.standard_normal(6)
        b /= np.linalg.norm(b)
        a1 = principal_angle(SubspaceModel(basis=base), b).phi_from_S
        a2 = principal_angle(SubspaceModel(basis=base @ rot), b).phi_from_S
        assert abs(a1 - a2) <= 1e-9


def test_grid_oracle_line_instance():
    data = Dataset(np.array([[1.0, 1, 1], [0, 0, 0]]))
    b, val = grid_oracle(data, 10**6)
    assert val <= 3e-5
    assert abs(abs(b[1]) - 1.0) <= 1e-4


def test_grid_oracle_empty_and_errors():
    empty = Dataset(np.zeros((2, 0)))
    _, val = grid_oracle(empty, 1000)
    assert val == 0.0
    data = Dataset(np.eye(2))
    with pytest.raises(ValueError):
        grid_oracle(data, 99)
    with pytest.raises(ValueError):
        grid_oracle(Dataset(np.eye(4)), 1000)


def test_grid_oracle_sphere_canonical():
    data = Dataset(np.eye(3))
    _, val = grid_oracle(data, 10**5)
    assert val >= 1.0


def test_grid_oracle_monotone_in_resolution():
    rng = np.random.default_rng(3)
    cols2 = rng.standard_normal((2, 25))
    d2 = Dataset(cols2 / np.linalg.norm(cols2, axis=0))
    vals2 = [grid_oracle(d2, r)[1] for r in (200, 400, 800, 1600, 3200)]
    assert all(a >= b for a, b in zip(vals2, vals2[1:]))
    cols3 = rng.standard_normal((3, 25))
    d3 = Dataset(cols3 / np.linalg.norm(cols3, axis=0))
    vals3 = [grid_oracle(d3, r)[1] for r in (150, 411, 1000, 2718, 9001)]
    assert all(a >= b for a, b in zip(vals3, vals3[1:]))


def test_circle_fast_path_matches_sweep():
    rng = np.random.default_rng(4)
    for _ in range(25):
        L = int(rng.integers(1, 50))
        cols = rng.standard_normal((2, L))
        data = Dataset(cols / np.linalg.norm(cols, axis=0))
        res = int(rng.choice([100, 513, 2048]))
        _, fast = grid_oracle(data, res)
        _, brute = _grid_argmin_sweep(data.columns, circle_grid(res))
        assert fast == pytest.approx(brute, abs=1e-12)


def test_sphere_covering_is_prefix_nested():
    small = sphere_covering(500)
    big = sphere_covering(2000)
    assert np.array_equal(small, big[:, :500])


def test_dataset_validation():
    with pytest.raises(ValueError):
        Dataset(np.array([[1.0, 2.0], [0.0, 0.0]]))  # second column not unit
    with pytest.raises(ValueError):
        Dataset(np.eye(2), inlier_mask=[True])
    data = Dataset.from_points(np.array([[3.0, 0], [0, 0.5]]))
    assert np.allclose(np.linalg.norm(data.columns, axis=0), 1.0)
    with pytest.raises(ValueError):
        Dataset.from_points(np.array([[1e-13], [0.0]]))
    assert not data.columns.flags.writeable


def test_dataset_labels():
    data = Dataset(np.eye(3), inlier_mask=[True, True, False])
    assert data.inlier_count == 2 and data.outlier_count == 1
    assert data.inliers.shape == (3, 2) and data.outliers.shape == (3, 1)
    with pytest.raises(ValueError):
        Dataset(np.eye(3)).inlier_count  # unlabeled


def test_subspace_model_validation():
    with pytest.raises(ValueError):
        SubspaceModel()
    with pytest.raises(ValueError):
        SubspaceModel(basis=np.array([[1.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValueError):
        SubspaceModel(basis=np.eye(3)[:, :1], normals=np.eye(3)[:, :1])
    model = SubspaceModel(basis=np.eye(3)[:, :1], normals=np.eye(3)[:, 1:])
    assert model.dim == 1 and model.codim == 2


def test_angle_reading_invariant():
    AngleReading(0.3, math.pi / 2 - 0.3)
    with pytest.raises(ValueError):
        AngleReading(0.3, 0.3)


def test_unit_vector_validation():
    v = unit_vector([1.0, 0.0])
    assert not v.flags.writeable
    with pytest.raises(ValueError):
        unit_vector([1.0, 1.0])
    with pytest.raises(ValueError):
        unit_vector([1.0])
