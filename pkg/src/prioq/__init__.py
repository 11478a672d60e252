"""Exact tail asymptotics of a discrete-time two-class preemptive priority queue."""
from .asymptotics import (
    Regime,
    RegimeTag,
    ScanPath,
    TailAsymptotics,
    classify_regime,
    find_critical_params,
    high_joint_asym,
    low_boundary_asym,
    low_joint_asym,
    marginal_asym,
)
from .exceptions import *  # noqa: F401,F403
from .genfunc import BoundaryGF, HorizontalGF, boundary_gf, eval_P, phi_j, psi0, psi0_series, tt_star
from .kernel import (
    KernelPoint,
    SpectralData,
    branch_points,
    discriminant,
    fundamental_coeffs,
    kernel,
    kernel_coeffs,
    kernel_roots,
    spectral_data,
)
from .model import ModelParams, Region, TransitionTable, balance_residual, load_params, new_params, transition_table
from .oracle import Direction, FitResult, Method, StationaryGrid, solve_truncated, tail_fit
from .simulate import SimConfig, SimEstimate, empirical_transition_check, simulate, tv_distance

__version__ = "0.1.0"
