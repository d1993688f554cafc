"""Compensated accumulation and enclosures of one-dimensional exponential series."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np
from scipy import special

# relative slack covering libm rounding in the partial sums below
_ROUND_SLACK = 1e-13


class Neumaier:
    """Running sum with Neumaier's improved Kahan compensation."""

    __slots__ = ("_sum", "_comp")

    def __init__(self, start: float = 0.0):
        self._sum = float(start)
        self._comp = 0.0

    def add(self, x: float) -> None:
        s = self._sum
        t = s + x
        if abs(s) >= abs(x):
            self._comp += (s - t) + x
        else:
            self._comp += (x - t) + s
        self._sum = t

    @property
    def value(self) -> float:
        return self._sum + self._comp


@lru_cache(maxsize=4096)
def exp_power_series(u: float, q: float, max_terms: int = 200_000) -> tuple[float, float]:
    """Enclose ``S(u, q) = sum_{h>=1} exp(-u * h**q)`` for ``u, q > 0``.

    Terms are summed up to ``H`` where ``u*H**q`` is about 745 (below that
    everything underflows) or ``max_terms``; the remainder is bounded by
    ``int_H^inf exp(-u x**q) dx``, valid because the summand decreases in h.
    Returns ``(lower, upper)``.
    """
    if u <= 0 or q <= 0:
        raise ValueError("u and q must be positive")
    cutoff = (745.0 / u) ** (1.0 / q)
    n_terms = int(min(max_terms, max(1.0, math.ceil(cutoff))))
    h = np.arange(1, n_terms + 1, dtype=np.float64)
    partial = math.fsum(np.exp(-u * h**q))
    a = 1.0 / q
    x = u * float(n_terms) ** q
    tail = special.gamma(a) * special.gammaincc(a, x) / (q * u**a)
    if not math.isfinite(tail):
        tail = math.inf
    return partial, (partial + tail) * (1.0 + _ROUND_SLACK) + 1e-300


def log_symmetric_series_upper(u: float, q: float) -> float:
    """Upper bound on ``ln(1 + 2*S(u, q))``, the log of a full-line sum over Z."""
    _, hi = exp_power_series(u, q)
    return math.log1p(2.0 * hi)


def logsumexp(values) -> float:
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return -math.inf
    top = float(arr.max())
    if top == -math.inf:
        return top
    return top + math.log(math.fsum(np.exp(arr - top)))
