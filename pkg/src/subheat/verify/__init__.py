"""Executable verification suites, one per kernel or multiplier inequality."""

from .core import (
    BoundReport,
    Sample,
    SuiteContext,
    VerifySuiteConfig,
    build_context,
    dyadic_times,
    stable_within,
    suite_rng,
    uniform_within,
)
from .kernel_suites import (
    check_heat_decomposition,
    check_kernel_factorization,
    check_nis_kernel_properties,
    check_off_diagonal,
    check_on_diagonal,
    check_scaled_estimate,
    nis_operators,
    off_diagonal_window,
    random_hermitian_kernel,
)
from .multiplier_suites import (
    check_elementary_summation,
    check_maximal_domination,
    check_multiplier_kernel_bound,
    check_multiplier_lp,
    check_square_function_equivalence,
    check_wave_energy,
    dyadic_r_grid,
    frame_envelope,
    lp_operator_norm,
)
from .runner import CROSS_RESOLUTION, SUITES, compare_resolutions, companion_model, parse_suites, run_suite, run_suites

__all__ = [
    "BoundReport", "Sample", "SuiteContext", "VerifySuiteConfig", "build_context", "dyadic_times",
    "stable_within", "suite_rng", "uniform_within",
    "check_heat_decomposition", "check_kernel_factorization", "check_nis_kernel_properties",
    "check_off_diagonal", "check_on_diagonal", "check_scaled_estimate", "nis_operators",
    "off_diagonal_window", "random_hermitian_kernel",
    "check_elementary_summation", "check_maximal_domination", "check_multiplier_kernel_bound",
    "check_multiplier_lp", "check_square_function_equivalence", "check_wave_energy",
    "dyadic_r_grid", "frame_envelope", "lp_operator_norm",
    "CROSS_RESOLUTION", "SUITES", "compare_resolutions", "companion_model", "parse_suites",
    "run_suite", "run_suites",
]
