"""Reaction-diffusion equations driven by Levy noise.

Poisson random measure samplers, spectral Galerkin discretization of the
Dirichlet Laplacian, a frozen-coefficient exponential scheme, and numerical
diagnostics for moment bounds, convergence rates and hypothesis checks.
"""
from .coefficients import DiffusionSpec, DriftSpec, dissipativity_sample_check, drift_apply
from .gate import HypothesisReport, check_claim_spectral, check_ex01, check_main, check_stpn
from .noise import ScalarNoiseSpec, SpaceTimeNoiseSpec, SpectralNoiseSpec, spectral_moment_sum
from .prm import AtomicMeasure, IntervalDensity, LevyMeasure, PointMeasure, TemperedStable, sample_prm
from .solver import GridScheme, grid_approx_path, run_scheme, simulate_mc
from .spectral import Norm, PathRecord, SpectralField, SpectralOperator, dirichlet_laplacian

__version__ = "0.1.0"
