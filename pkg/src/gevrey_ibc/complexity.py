"""Minimal errors and information complexity, decided from certified enclosures.

Average case: the squared n-th minimal error is the eigenvalue mass beyond
position n.  Worst case: it is the (n+1)-th eigenvalue.  Complexity is the
smallest n whose error is at most ``epsilon`` times the normalizer (1 for the
absolute criterion, the initial error for the normalized one).
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass
from typing import NamedTuple

from .budget import Budget, BudgetExhausted, FloatRangeError
from .kernel import KernelParams
from .lattice import VALUE_EPS, grid_count
from .spectrum import Spectrum, build_spectrum, tail_sum, trace

SETTINGS = ("worst", "average")
CRITERIA = ("ABS", "NOR")
_SETTING_ALIASES = {"worst": "worst", "wor": "worst", "average": "average", "avg": "average"}

# tail goal relative to the threshold, and how much it shrinks per escalation round
_TAIL_FRACTION = 1e-6
_ESCALATION = 1e-3
_ESCALATION_ROUNDS = 3


class ErrorEnclosure(NamedTuple):
    lower: float
    upper: float


def _check_n(n: int) -> int:
    if isinstance(n, bool) or int(n) != n or n < 0:
        raise ValueError(f"n must be a nonnegative integer, got {n!r}")
    return int(n)


def avg_error(
    params: KernelParams,
    n: int,
    tail_tol: float = 1e-10,
    spec: Spectrum | None = None,
    budget: Budget | None = None,
) -> ErrorEnclosure:
    """Enclosure of the n-th minimal average-case error ``sqrt(sum_{k>n} lambda_k)``."""
    n = _check_n(n)
    if spec is None or spec.enumerated_count < n:
        spec = build_spectrum(params, max(n, 1), tail_tol, budget=budget)
        if spec.enumerated_count < n:
            raise BudgetExhausted(f"only {spec.enumerated_count} eigenvalues enumerated, need {n}", spec)
    lo, hi = tail_sum(spec, n)
    return ErrorEnclosure(math.sqrt(lo), math.sqrt(hi))


# The worst-case error in the sup norm over the unit ball of the kernel's
# Hilbert space equals the average-case L2 error, so it is the same function.
linf_worst_error = avg_error


def wor_error(params: KernelParams, n: int, budget: Budget | None = None) -> float:
    """The n-th minimal worst-case error ``sqrt(lambda_{n+1})``.

    >>> wor_error(KernelParams(1, 0.5, 1, 2), 0)
    1.0
    """
    n = _check_n(n)
    spec = build_spectrum(params, n + 1, math.inf, budget=budget)
    if spec.enumerated_count < n + 1:
        raise BudgetExhausted(f"eigenvalue {n + 1} lies beyond the enumeration budget", spec)
    return math.sqrt(spec.eigenvalue(n + 1))


@dataclass(frozen=True)
class ComplexityQuery:
    params: KernelParams
    epsilon: float
    setting: str = "average"
    criterion: str = "ABS"

    def __post_init__(self):
        eps = self.epsilon
        if not (isinstance(eps, (int, float)) and 0.0 < eps < 1.0):
            raise ValueError(f"epsilon must lie in (0, 1), got {eps!r}")
        object.__setattr__(self, "epsilon", float(eps))
        setting = _SETTING_ALIASES.get(str(self.setting).lower())
        if setting is None:
            raise ValueError(f"setting must be one of {SETTINGS}, got {self.setting!r}")
        object.__setattr__(self, "setting", setting)
        crit = str(self.criterion).upper()
        if crit not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}, got {self.criterion!r}")
        object.__setattr__(self, "criterion", crit)


@dataclass(frozen=True)
class ComplexityResult:
    """``n`` is set only when certified; otherwise the answer lies in ``[n_lo, n_hi]``.

    ``n_hi`` is None when no upper end could be certified within budget.
    """

    query: ComplexityQuery
    n: int | None
    certified: bool
    n_lo: int
    n_hi: int | None
    note: str = ""

    ROW_FIELDS = ("alpha", "beta", "p", "d", "epsilon", "setting", "criterion", "n", "certified", "n_lo", "n_hi")

    def as_row(self) -> dict:
        q = self.query
        return {
            "alpha": q.params.alpha,
            "beta": q.params.beta,
            "p": q.params.p,
            "d": q.params.d,
            "epsilon": q.epsilon,
            "setting": q.setting,
            "criterion": q.criterion,
            "n": self.n,
            "certified": self.certified,
            "n_lo": self.n_lo,
            "n_hi": self.n_hi,
        }


def _check_float_range(threshold: float, what: str) -> None:
    if not threshold >= sys.float_info.min:
        raise FloatRangeError(f"{what} = {threshold!r} is beyond float range (below the smallest normal double)")


def info_complexity(q: ComplexityQuery, budget: Budget | None = None) -> ComplexityResult:
    """Smallest n with ``e(n, d) <= epsilon * CRI``, certified from enclosures."""
    if q.setting == "worst":
        return _worst_complexity(q, budget)
    return _average_complexity(q, budget)


def _worst_complexity(q: ComplexityQuery, budget) -> ComplexityResult:
    # initial worst-case error is 1, so both criteria coincide
    params = q.params
    _check_float_range(q.epsilon**2, "epsilon^2")
    log_threshold = -2.0 * math.log(q.epsilon)
    cut = log_threshold * (1.0 - VALUE_EPS)
    value_star = (log_threshold / params.rate) ** (1.0 / params.gamma)
    spec = build_spectrum(params, 1, math.inf, value_limit=value_star, budget=budget)
    n = sum(m for log_lam, m in zip(spec.log_eigenvalues, spec.multiplicities) if -log_lam < cut)
    if spec.complete:
        return ComplexityResult(q, n, True, n, n)
    return ComplexityResult(q, None, False, n, None, "enumeration budget exhausted below the threshold level")


def _average_complexity(q: ComplexityQuery, budget) -> ComplexityResult:
    params = q.params
    eps2 = q.epsilon**2
    fraction = _TAIL_FRACTION
    last = None
    for round_ in range(_ESCALATION_ROUNDS + 1):
        if q.criterion == "ABS":
            _check_float_range(eps2, "epsilon^2")
            spec = build_spectrum(params, 1, math.inf, tail_abs=fraction * eps2, budget=budget)
            theta_lo = theta_hi = eps2
        else:
            spec = build_spectrum(params, 1, fraction * eps2, budget=budget)
            pad = spec.rounding_error
            theta_lo = eps2 * (spec.partial_sum - pad)
            theta_hi = eps2 * (spec.partial_sum + spec.tail_upper + pad)
            _check_float_range(theta_lo, "epsilon^2 * initial error^2")
        tail = spec.tail_upper
        n_hi = spec.first_position(theta_lo, tail)
        n_lo = spec.first_position(theta_hi)
        if n_lo is None:
            n_lo = spec.enumerated_count
        last = ComplexityResult(q, None, False, n_lo, n_hi, f"enclosure straddles the threshold after {round_} escalations")
        if n_hi is not None and n_lo == n_hi:
            return ComplexityResult(q, n_hi, True, n_lo, n_hi)
        fraction *= _ESCALATION
    return last


def nor_lower_bound(params: KernelParams, epsilon: float, budget: Budget | None = None) -> float:
    """``(1 - epsilon^2)`` times a certified lower bound on the trace."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    return (1.0 - epsilon**2) * trace(params, 1e-10, budget).lower


def wor_complexity_via_count(params: KernelParams, epsilon: float, budget: Budget | None = None) -> int:
    """Worst-case complexity as a strict lattice count below ``m* = (ln(eps^-2) / 2beta)^(p/alpha)``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    _check_float_range(epsilon**2, "epsilon^2")
    m_star = (-2.0 * math.log(epsilon) / params.rate) ** (params.p / params.alpha)
    return grid_count(m_star, params.d, params.p, strict=True, budget=budget)
