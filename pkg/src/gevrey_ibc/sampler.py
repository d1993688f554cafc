"""Random Fourier series with Gevrey covariance, and Monte Carlo checks of the error formula.

A draw is ``f(x) = sum_k a_k exp(i k.x)`` with independent complex Gaussian
coefficients, ``E|a_k|^2 = lambda(k)`` and ``a_{-k} = conj(a_k)``, over the
modes whose eigenvalues carry all but a ``tail_frac`` fraction of the trace.

Randomness is counter based: trial ``t`` of seed ``s`` reads a Philox stream
keyed by ``(s, t)`` and consumes it in mode order, so any single trial can be
regenerated on its own and trials can run in any order or in parallel.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .budget import Budget, BudgetExhausted
from .kernel import KernelParams, eigenvalue_from_value
from .lattice import expand_class
from .spectrum import Spectrum, build_spectrum, tail_sum

DEFAULT_TAIL_FRAC = 1e-6
_IMAG_TOL = 1e-10


@dataclass(frozen=True)
class _ModeLayout:
    spec: Spectrum
    modes: np.ndarray  # (M, d) int
    eigenvalues: np.ndarray  # (M,)
    reps: np.ndarray  # indices of the representative of each +-k pair
    partners: np.ndarray  # index of -k for each representative

    @property
    def draws_per_trial(self) -> int:
        return 1 + 2 * len(self.reps)


def _layout(params: KernelParams, tail_frac: float, min_count: int, budget: Budget | None) -> _ModeLayout:
    if not 0.0 < tail_frac < 1.0:
        raise ValueError("tail_frac must lie in (0, 1)")
    if budget is None:
        return _cached_layout(params, tail_frac, min_count)
    return _make_layout(params, tail_frac, min_count, budget)


@lru_cache(maxsize=16)
def _cached_layout(params, tail_frac, min_count):
    return _make_layout(params, tail_frac, min_count, None)


def _make_layout(params, tail_frac, min_count, budget) -> _ModeLayout:
    spec = build_spectrum(params, max(min_count, 1), tail_frac, keep_classes=True, budget=budget)
    if not spec.complete:
        raise BudgetExhausted("enumeration budget exhausted before the sampling cutoff", spec)
    points: list[tuple[int, ...]] = []
    eigs: list[float] = []
    for cls in spec.classes:
        pts = expand_class(cls, params.d)
        points.extend(pts)
        eigs.extend([eigenvalue_from_value(params, cls.value)] * len(pts))
    index = {pt: i for i, pt in enumerate(points)}
    reps, partners = [], []
    for i, pt in enumerate(points):
        nz = next((c for c in pt if c != 0), 0)
        if nz > 0:
            reps.append(i)
            partners.append(index[tuple(-c for c in pt)])
    return _ModeLayout(
        spec,
        np.asarray(points, dtype=np.int64).reshape(len(points), params.d),
        np.asarray(eigs),
        np.asarray(reps, dtype=np.int64),
        np.asarray(partners, dtype=np.int64),
    )


def _generator(seed: int, trial: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial,))))


def _coefficients(layout: _ModeLayout, seed: int, trial: int) -> np.ndarray:
    z = _generator(seed, trial).standard_normal(layout.draws_per_trial)
    a = np.zeros(len(layout.modes), dtype=np.complex128)
    a[0] = z[0] * math.sqrt(layout.eigenvalues[0])
    scale = np.sqrt(layout.eigenvalues[layout.reps] / 2.0)
    rep = scale * (z[1::2] + 1j * z[2::2])
    a[layout.reps] = rep
    a[layout.partners] = np.conj(rep)
    return a


@dataclass(frozen=True)
class SamplePath:
    """One draw: ``modes[j]`` carries coefficient ``coefficients[j]``.

    Modes run in nonincreasing eigenvalue order (the spectrum's order, then
    lexicographic within a class), closed under negation, origin first.
    """

    params: KernelParams
    modes: np.ndarray
    coefficients: np.ndarray
    eigenvalues: np.ndarray
    excluded_tail: float
    seed: int
    trial: int = 0

    def square_norm(self) -> float:
        """``||f||_2^2`` under the normalized measure, by Parseval."""
        return math.fsum(np.abs(self.coefficients) ** 2)

    def to_rows(self) -> list[dict]:
        return [
            {"mode": tuple(int(c) for c in k), "re": float(a.real), "im": float(a.imag)}
            for k, a in zip(self.modes, self.coefficients)
        ]


def sample_path(
    params: KernelParams,
    tail_frac: float = DEFAULT_TAIL_FRAC,
    seed: int = 0,
    trial: int = 0,
    budget: Budget | None = None,
) -> SamplePath:
    """Draw path number ``trial`` of stream ``seed``; equal arguments give identical paths."""
    layout = _layout(params, tail_frac, 1, budget)
    a = _coefficients(layout, seed, trial)
    return SamplePath(params, layout.modes, a, layout.eigenvalues, layout.spec.tail_upper, seed, trial)


def optimal_truncation(path: SamplePath, spec: Spectrum, n: int) -> SamplePath:
    """Keep the coefficients of the first ``n`` modes (largest eigenvalues), zero the rest."""
    if n < 0 or n > spec.enumerated_count:
        raise ValueError(f"n={n} outside 0..{spec.enumerated_count}")
    if n > len(path.modes):
        raise ValueError(f"path has only {len(path.modes)} modes, cannot keep {n}")
    if spec.params != path.params:
        raise ValueError("spectrum and path belong to different parameters")
    a = path.coefficients.copy()
    a[n:] = 0.0
    return replace(path, coefficients=a)


def evaluate(path: SamplePath, x) -> float | np.ndarray:
    """``f(x) = sum_k a_k exp(i k.x)`` at one point (shape (d,)) or many (shape (m, d))."""
    pts = np.asarray(x, dtype=np.float64)
    single = pts.ndim == 1
    pts = np.atleast_2d(pts)
    if pts.shape[1] != path.params.d:
        raise ValueError(f"points must have {path.params.d} coordinates")
    vals = np.exp(1j * (pts @ path.modes.T.astype(np.float64))) @ path.coefficients
    scale = float(np.sum(np.abs(path.coefficients)))
    worst = float(np.max(np.abs(vals.imag))) if vals.size else 0.0
    assert worst <= _IMAG_TOL * max(scale, 1e-300), f"imaginary residue {worst:.3e} too large"
    out = vals.real
    return float(out[0]) if single else out


@dataclass(frozen=True)
class McErrorEstimate:
    """Monte Carlo mean of the squared residual after keeping ``n`` modes.

    ``formula_value`` encloses the exact expected value; ``truncation_bias``
    bounds how far below it the sampler's own cutoff can pull the estimate.
    """

    n: int
    trials: int
    mean_sq_error: float
    std_error: float
    formula_value: tuple[float, float]
    truncation_bias: float

    @property
    def formula_mid(self) -> float:
        return 0.5 * (self.formula_value[0] + self.formula_value[1])

    def deviation(self) -> float:
        """``(mse - midpoint) / std_error``; infinite if the standard error is zero and they differ."""
        diff = self.mean_sq_error - self.formula_mid
        if self.std_error == 0.0:
            return 0.0 if diff == 0.0 else math.copysign(math.inf, diff)
        return diff / self.std_error

    def consistent(self, k: float = 3.0) -> bool:
        """``|mse - midpoint| <= k * std_error + truncation_bias + enclosure half-width``."""
        half = 0.5 * (self.formula_value[1] - self.formula_value[0])
        return abs(self.mean_sq_error - self.formula_mid) <= k * self.std_error + self.truncation_bias + half

    def as_row(self) -> dict:
        return {
            "n": self.n,
            "trials": self.trials,
            "mse": self.mean_sq_error,
            "stderr": self.std_error,
            "formula_lo": self.formula_value[0],
            "formula_hi": self.formula_value[1],
        }


def _residuals(layout: _ModeLayout, n: int, seed: int, trials: range) -> list[float]:
    out = []
    for t in trials:
        a = _coefficients(layout, seed, t)
        out.append(math.fsum(np.abs(a[n:]) ** 2))
    return out


def mc_avg_error(
    params: KernelParams,
    n: int,
    trials: int = 10_000,
    seed: int = 0,
    tail_frac: float = DEFAULT_TAIL_FRAC,
    threads: int = 1,
    budget: Budget | None = None,
) -> McErrorEstimate:
    """Average squared residual of the optimal n-term truncation over ``trials`` paths.

    Trial ``t`` uses exactly the path ``sample_path(params, tail_frac, seed, t)``.
    """
    if trials < 100:
        raise ValueError("trials must be >= 100")
    if n < 0:
        raise ValueError("n must be >= 0")
    layout = _layout(params, tail_frac, 1, budget)
    if n > len(layout.modes):
        layout = _layout(params, tail_frac, n, budget)
    if n > len(layout.modes):
        raise ValueError(f"n={n} exceeds the {len(layout.modes)} sampled modes")
    if threads > 1:
        bounds = np.linspace(0, trials, threads + 1).astype(int)
        chunks = [range(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=threads) as pool:
            res = [r for part in pool.map(lambda c: _residuals(layout, n, seed, c), chunks) for r in part]
    else:
        res = _residuals(layout, n, seed, range(trials))
    mean = math.fsum(res) / trials
    var = math.fsum((r - mean) ** 2 for r in res) / (trials - 1)
    lo, hi = tail_sum(layout.spec, n)
    return McErrorEstimate(n, trials, mean, math.sqrt(var / trials), (lo, hi), layout.spec.tail_upper)
