import json
import math

import numpy as np
import pytest

from dpcp.core import Dataset, SubspaceModel
from dpcp.quantities import (GeometryStats, c_d_constant, check_alp_angles,
                             check_global_optimality, check_psgm_preconditions,
                             check_random_model_bound, estimate_stats)
from dpcp.synth import SphericalModelSpec, sample_spherical


def make_stats(c_X_min=0.5, c_X_max=0.6, c_O_min=0.3, c_O_max=0.4, eta_O=0.1,
               eta_X=0.05, N=100, M=50, D=10, d=5):
    bar = eta_O + (D / M if M else 0.0)
    return GeometryStats(c_X_min, c_X_max, c_O_min, c_O_max, eta_O, eta_X, bar,
                         N=N, M=M, D=D, d=d)


def test_c_d_values():
    assert c_d_constant(1) == pytest.approx(1.0)
    assert c_d_constant(2) == pytest.approx(2 / math.pi)
    assert c_d_constant(3) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        c_d_constant(0)


def test_c_d_bounds_and_recurrence():
    for d in range(1, 201):
        cd = c_d_constant(d)
        assert math.sqrt(2 / (math.pi * d)) <= cd <= math.sqrt(1 / d)
    for d in range(1, 200):
        assert abs(c_d_constant(d + 1) * c_d_constant(d) * d - 2 / math.pi) <= 1e-14


def test_geometry_stats_invariants():
    with pytest.raises(ValueError):
        make_stats(c_X_min=0.7, c_X_max=0.6)
    with pytest.raises(ValueError):
        GeometryStats(0.5, 0.6, 0.3, 0.4, 0.1, 0.05, 0.5, N=10, M=50, D=10, d=5)


def test_estimate_stats_degenerate_line():
    # inliers are +-e1 in the plane; the only unit alpha gives alignment 1
    cols = np.array([[1.0, -1, 1, -1], [0, 0, 0, 0]])
    data = Dataset(cols, inlier_mask=[True] * 4)
    truth = SubspaceModel(basis=np.array([[1.0], [0.0]]))
    stats = estimate_stats(data, truth, budget=500, seed=0)
    assert stats.c_X_min == pytest.approx(1.0, abs=1e-12)
    assert stats.c_X_max == pytest.approx(1.0, abs=1e-12)
    assert stats.c_O_min == stats.c_O_max == stats.eta_O == stats.eta_O_bar == 0.0


def test_estimate_stats_two_outliers_on_circle():
    # O = {e1, e2}: min over circle of (|b1|+|b2|)/2 is 1/2, max is sqrt(2)/2
    cols = np.array([[1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    data = Dataset(cols, inlier_mask=[True, False, False])
    truth = SubspaceModel(basis=np.array([[1.0], [0.0]]))
    stats = estimate_stats(data, truth, budget=20_000, seed=1)
    assert 0.5 - 1e-12 <= stats.c_O_min <= 0.502
    assert math.sqrt(2) / 2 >= stats.c_O_max >= math.sqrt(2) / 2 - 2e-3


def test_eta_estimator_single_outlier():
    # sup over b of ||(I - b b^T) e1|| approaches 1; estimator must reach 0.99
    cols = np.array([[1.0, 1.0], [0.0, 0.0]])
    data = Dataset(cols, inlier_mask=[True, False])
    truth = SubspaceModel(basis=np.array([[1.0], [0.0]]))
    stats = estimate_stats(data, truth, budget=100_000, seed=2)
    assert stats.eta_O >= 0.99


def test_estimator_monotone_in_budget():
    data, truth = sample_spherical(SphericalModelSpec(D=6, d=3, N=80, M=60, seed=8))
    prev_min, prev_max = math.inf, -math.inf
    for budget in (1000, 2000, 4000, 8000):
        stats = estimate_stats(data, truth.model, budget=budget, seed=11)
        assert stats.c_X_min <= prev_min + 1e-15
        assert stats.c_O_max >= prev_max - 1e-15
        prev_min, prev_max = stats.c_X_min, stats.c_O_max


def test_global_optimality_examples():
    report = check_global_optimality(make_stats(M=0, eta_O=0.0, c_O_min=0.0,
                                                c_O_max=0.0), N=100, M=0)
    assert report.satisfied and report.lhs == 0.0
    # eta_bar = 0.2, spread = 0.05, c_X_min = 0.6 -> lhs ~ 0.0687
    stats = make_stats(c_X_min=0.6, c_X_max=0.7, c_O_min=0.65, c_O_max=0.70,
                       eta_O=0.1, N=500, M=100, D=10)
    report = check_global_optimality(stats, N=500, M=100)
    assert report.lhs == pytest.approx(0.068718, abs=1e-5)
    assert report.satisfied
    stats = make_stats(c_X_min=0.5, c_X_max=0.6, c_O_min=0.4, c_O_max=0.4,
                       eta_O=0.9, N=100, M=100, D=10)
    report = check_global_optimality(stats, N=100, M=100)
    assert report.lhs == pytest.approx(2.0, abs=1e-12)
    assert not report.satisfied
    with pytest.raises(ValueError):
        check_global_optimality(stats, N=0, M=100)


def test_alp_angles_examples():
    # outlier-free limit
    stats = make_stats(M=0, eta_O=0.0, c_O_min=0.0, c_O_max=0.0, c_X_min=0.5,
                       c_X_max=0.8)
    rep = check_alp_angles(stats, N=100, M=0, c_X_max=0.8)
    assert not rep.vacuous
    assert rep.phi_natural == pytest.approx(0.0)
    assert rep.phi_star == pytest.approx(math.acos(0.5 / 0.8), abs=1e-12)
    # arithmetic instance: phi_natural = arctan(70 / 280)
    stats = make_stats(c_X_min=0.6, c_X_max=0.8, c_O_min=0.6, c_O_max=0.7,
                       eta_O=0.1, N=500, M=100, D=10)
    rep = check_alp_angles(stats, N=500, M=100, c_X_max=0.8)
    assert rep.phi_natural == pytest.approx(math.atan(70 / 280), abs=1e-12)
    expected_star = math.acos((math.sqrt(300**2 - 20**2) - 100 * 0.1) / 400)
    assert rep.phi_star == pytest.approx(expected_star, abs=1e-12)
    # degenerate boundary N c_X_min = M eta_bar
    stats = make_stats(c_X_min=0.2, c_X_max=0.3, eta_O=0.9, N=100, M=100, D=10)
    rep = check_alp_angles(stats, N=100, M=100, c_X_max=0.3)
    assert rep.vacuous and rep.phi_natural is None


def test_psgm_preconditions_examples():
    stats = make_stats(c_X_min=0.5, eta_X=0.1, M=0, eta_O=0.0, c_O_min=0.0,
                       c_O_max=0.0)
    rep = check_psgm_preconditions(stats, N=100, M=0, theta0=0.5)
    assert rep.satisfied
    assert rep.inputs["theta0_limit"] == pytest.approx(math.atan(0.5 / 0.1))
    # mu' arithmetic: N c_X_min = 300, M c_O_max = 200 -> 1/1200
    stats = make_stats(c_X_min=0.6, c_X_max=0.7, c_O_max=0.4, c_O_min=0.3,
                       N=500, M=500, D=10)
    rep = check_psgm_preconditions(stats, N=500, M=500, theta0=0.1)
    assert rep.inputs["mu_prime"] == pytest.approx(1 / 1200, abs=1e-15)
    # drift beats alignment: never satisfied
    stats = make_stats(c_X_min=0.2, c_X_max=0.3, eta_X=0.15, eta_O=0.2,
                       N=100, M=100, D=10)
    rep = check_psgm_preconditions(stats, N=100, M=100, theta0=1e-9)
    assert not rep.satisfied


def test_random_model_bound():
    rep = check_random_model_bound(N=10_000, M=0, D=10, d=3, t=1.0)
    assert rep.satisfied and rep.lhs == 0.0
    rep = check_random_model_bound(N=10_000, M=10_000, D=10, d=9, t=1.0, C0=1.0)
    assert rep.lhs > 0 and rep.rhs > 0 and rep.inputs["C0"] == 1.0
    with pytest.raises(ValueError):
        cap = 2 * (c_d_constant(3) * math.sqrt(100) - 2)
        check_random_model_bound(N=100, M=10, D=10, d=3, t=cap + 1)
    for mode in ("high_dim", "large_scale"):
        rep = check_random_model_bound(N=10_000, M=100, D=10, d=5, t=0.5, mode=mode)
        assert rep.name.endswith(mode)
    with pytest.raises(ValueError):
        check_random_model_bound(N=100, M=10, D=10, d=3, t=0.1, mode="bogus")


def test_condition_report_json():
    stats = make_stats()
    rep = check_global_optimality(stats, N=100, M=50)
    doc = json.loads(rep.to_json())
    assert set(doc) == {"name", "satisfied", "lhs", "rhs", "inputs", "estimator"}
    assert doc["inputs"]["N"] == 100
    assert doc["estimator"]["one_sided"] is True


def test_estimate_stats_requires_labels():
    data = Dataset(np.eye(3))
    truth = SubspaceModel(basis=np.eye(3)[:, :1])
    with pytest.raises(ValueError):
        estimate_stats(data, truth, budget=100)
