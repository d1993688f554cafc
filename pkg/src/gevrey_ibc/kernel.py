"""Problem instances and eigenvalues of the periodic Gevrey covariance kernel.

The kernel on the torus ``[0, 2pi]^d`` is

    K(x, y) = sum_{k in Z^d} exp(-2 beta |k|_p^alpha) exp(i k.(x - y))

so the Fourier modes ``exp(i k.x)`` are eigenfunctions of the covariance
operator with eigenvalues ``exp(-2 beta (sum |k_i|^p)^(alpha/p))``.

Every eigenvalue in the package is produced by :func:`eigenvalue_from_value`
applied to the lattice value ``sum |k_i|^p`` computed by :func:`lattice_value`,
so equal lattice points give bitwise equal eigenvalues no matter which route
(brute force, class enumeration, level counting) produced them.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np

from ._numerics import Neumaier
from .budget import BudgetExhausted, resolve

MAX_INTEGER_P = 16


@dataclass(frozen=True)
class KernelParams:
    """Smoothness ``alpha``, decay weight ``beta``, lp index ``p`` and dimension ``d``."""

    alpha: float
    beta: float
    p: float
    d: int

    def __post_init__(self):
        for name in ("alpha", "beta", "p"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")
            object.__setattr__(self, name, float(value))
        if isinstance(self.d, bool) or int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d!r}")
        object.__setattr__(self, "d", int(self.d))

    @property
    def gamma(self) -> float:
        """Exponent applied to the lattice value: ``alpha / p``."""
        return self.alpha / self.p

    @property
    def rate(self) -> float:
        """``2 * beta``, the coefficient in the exponent of every eigenvalue."""
        return 2.0 * self.beta

    @property
    def integer_p(self) -> int | None:
        """``p`` as an int when it is a small integer (exact integer lattice values)."""
        if self.p == int(self.p) and self.p <= MAX_INTEGER_P:
            return int(self.p)
        return None

    def with_dim(self, d: int) -> "KernelParams":
        return replace(self, d=d)

    def with_beta(self, beta: float) -> "KernelParams":
        return replace(self, beta=beta)


@lru_cache(maxsize=1 << 16)
def magnitude_power(m: int, p: float) -> float:
    """``m**p`` for a nonnegative integer magnitude; exact when p is an integer."""
    if m == 0:
        return 0.0
    if p == int(p):
        return float(m ** int(p))
    return float(m) ** p


def lattice_value(magnitudes: Sequence[int], p: float) -> float:
    """Correctly rounded ``sum |k_i|**p``; independent of coordinate order."""
    return math.fsum(magnitude_power(abs(int(m)), p) for m in magnitudes)


def eigenvalue_from_value(params: KernelParams, value: float) -> float:
    """``exp(-2 beta value**(alpha/p))`` for a lattice value ``sum |k_i|**p``."""
    return math.exp(-params.rate * value**params.gamma)


def log_eigenvalue_from_value(params: KernelParams, value: float) -> float:
    return -params.rate * value**params.gamma


def eigenvalue_at(params: KernelParams, k: Sequence[int]) -> float:
    """Eigenvalue belonging to the Fourier mode ``exp(i k.x)``.

    >>> eigenvalue_at(KernelParams(1, 0.5, 1, 3), (0, 0, 0))
    1.0
    """
    if len(k) != params.d:
        raise ValueError(f"lattice point has length {len(k)}, expected d={params.d}")
    return eigenvalue_from_value(params, lattice_value(k, params.p))


class KernelValue(NamedTuple):
    value: float
    tail_bound: float


def kernel_value(params: KernelParams, x, y, trunc_tol: float = 1e-12, budget=None) -> KernelValue:
    """Truncated kernel series ``sum lambda(k) cos(k.(x-y))`` with its excluded-tail bound.

    Modes are enumerated in decreasing eigenvalue order until the certified
    bound on the excluded eigenvalue mass drops below ``trunc_tol``; the
    terms are then summed with correctly rounded summation.
    """
    from .lattice import ClassStream, expand_class
    from .spectrum import horizon_for_tail, tail_bound

    if not 0.0 < trunc_tol < 1.0:
        raise ValueError("trunc_tol must lie in (0, 1)")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if x.size != params.d or y.size != params.d:
        raise ValueError(f"points must have length d={params.d}")
    delta = x - y
    budget = resolve(budget)
    deadline = budget.deadline()

    stream = ClassStream(params)
    terms = []
    check_at = 0.0
    while True:
        horizon = stream.peek_value()
        if horizon >= check_at:
            bound = tail_bound(params, horizon)
            if bound <= trunc_tol:
                break
            check_at = horizon_for_tail(params, horizon, trunc_tol)
        if stream.emitted_count >= budget.max_classes or time.monotonic() > deadline:
            raise BudgetExhausted(
                f"kernel series tail {bound:.3e} still above {trunc_tol:.3e} after "
                f"{stream.emitted_count} classes"
            )
        cls = next(stream)
        lam = eigenvalue_from_value(params, cls.value)
        pts = np.asarray(expand_class(cls, params.d), dtype=np.float64)
        acc = Neumaier()
        for c in np.cos(pts @ delta):
            acc.add(float(c))
        terms.append(lam * acc.value)
    return KernelValue(math.fsum(terms), bound)

