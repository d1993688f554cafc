"""Spectra, minimal errors and tractability for the periodic Gevrey kernel."""

from .budget import Budget, BudgetExhausted, FloatRangeError
from .complexity import (
    ComplexityQuery,
    ComplexityResult,
    ErrorEnclosure,
    avg_error,
    info_complexity,
    linf_worst_error,
    nor_lower_bound,
    wor_complexity_via_count,
    wor_error,
)
from .kernel import KernelParams, KernelValue, eigenvalue_at, kernel_value, lattice_value
from .lattice import LevelClass, brute_force_points, enumerate_classes, expand_class, grid_count, multiplicity
from .sampler import McErrorEstimate, SamplePath, evaluate, mc_avg_error, optimal_truncation, sample_path
from .spectrum import Spectrum, TraceEstimate, build_spectrum, power_trace, tail_bound, tail_sum, trace
from .tractability import (
    ExpRateFit,
    TractabilityProfile,
    classify,
    exp_rate_fit,
    scan,
    weak_tractability_indicator,
)

__version__ = "0.1.0"

__all__ = [
    "Budget",
    "BudgetExhausted",
    "ComplexityQuery",
    "ComplexityResult",
    "ErrorEnclosure",
    "ExpRateFit",
    "FloatRangeError",
    "KernelParams",
    "KernelValue",
    "LevelClass",
    "McErrorEstimate",
    "SamplePath",
    "Spectrum",
    "TraceEstimate",
    "TractabilityProfile",
    "avg_error",
    "brute_force_points",
    "build_spectrum",
    "classify",
    "eigenvalue_at",
    "enumerate_classes",
    "evaluate",
    "exp_rate_fit",
    "expand_class",
    "grid_count",
    "info_complexity",
    "kernel_value",
    "lattice_value",
    "linf_worst_error",
    "mc_avg_error",
    "multiplicity",
    "nor_lower_bound",
    "optimal_truncation",
    "power_trace",
    "sample_path",
    "scan",
    "tail_bound",
    "tail_sum",
    "trace",
    "weak_tractability_indicator",
    "wor_complexity_via_count",
    "wor_error",
]
