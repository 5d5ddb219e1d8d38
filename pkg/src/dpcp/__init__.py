"""Dual Principal Component Pursuit: robust subspace recovery on the sphere."""

__version__ = "0.1.0"

from .core import (AngleReading, Dataset, SubspaceModel, grid_oracle, objective,
                   principal_angle, riemannian_subgradient, sign_vec, unit_vector)
from .synth import (GroundTruth, SphericalModelSpec, derive_rng, outlier_ratio_to_M,
                    sample_spherical)
from .quantities import (AlpAngleReport, ConditionReport, GeometryStats, c_d_constant,
                         check_alp_angles, check_global_optimality,
                         check_psgm_preconditions, check_random_model_bound,
                         estimate_stats)
from .initializers import random_init, spectral_init
from .psgm import (SolveOptions, SolveReport, StepSchedule, auto_mu0, recover_normals,
                   solve, solve_mbls, step_size)
from .altsolvers import LpResult, alp_solve, alp_step, irls_solve, lp_solve
from .baselines import RansacResult, ransac
from .evaluation import (PhaseResult, RocCurve, condition_grid, f1_at_threshold,
                         phase_transition, roc_from_scores)
from .pointcloud import PlaneDetection, PointCloud, detect_plane, homogenize, load_cloud

__all__ = [name for name in dir() if not name.startswith("_")]
