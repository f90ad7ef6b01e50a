"""Optimal-transport multivariate rank statistics and two-sample tests."""

from .changepoint import CpdConfig, CpdResult, detect_change_points, lowpass, sliding_statistic
from .errors import ConvergenceError, InvalidArgumentError, NumericalError, RankOTError
from .halton import HaltonGrid, halton_grid, radical_inverse
from .inference import TestResult, null_samples, permutation_null, two_sample_test
from .projection import (ProjectionResult, maximize_psre, psre_objective, qr_retraction,
                         riemannian_gradient)
from .ranks import RankSet, hard_rank_map, joint_rank_map, soft_rank_map
from .statistics import Statistic, energy_statistic, kernel_energy_statistic, rank_energy
from .synthgen import SETTINGS, SettingSpec, generate, generate_setting
from .transport import TransportPlan, cost_matrix, sinkhorn, solve_assignment

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError", "CpdConfig", "CpdResult", "HaltonGrid", "InvalidArgumentError",
    "NumericalError", "ProjectionResult", "RankOTError", "RankSet", "SETTINGS", "SettingSpec",
    "Statistic", "TestResult", "TransportPlan", "cost_matrix", "detect_change_points",
    "energy_statistic", "generate", "generate_setting", "halton_grid", "hard_rank_map",
    "joint_rank_map", "kernel_energy_statistic", "lowpass", "maximize_psre", "null_samples",
    "permutation_null", "psre_objective", "qr_retraction", "radical_inverse", "rank_energy",
    "riemannian_gradient", "sinkhorn", "sliding_statistic", "soft_rank_map", "solve_assignment",
    "two_sample_test",
]
