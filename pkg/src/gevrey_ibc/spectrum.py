"""The nonincreasing eigenvalue sequence with a certified bound on what was left out.

A :class:`Spectrum` stores the rearranged eigenvalues in run-length form.
Two construction routes produce identical runs:

``classes``
    best-first walk over magnitude multisets (:mod:`gevrey_ibc.lattice`);
    works for every ``p``.
``levels``
    for integer ``p`` the lattice values are integers, so the number of
    points on each level ``sum |k_i|^p = v`` is an exact polynomial
    coefficient; far fewer runs to visit in high dimension.

Tail certification
------------------
After enumeration every remaining point has value ``v >= V`` (the horizon).
With ``g(v) = exp(-c v^gamma)``, ``c = 2 beta tau``, ``gamma = alpha/p``, the
remaining mass is bounded by the smallest of these majorants, each reduced
to one-dimensional series ``G_q(u) = sum_{h in Z} exp(-u |h|^q)``:

* split: for ``0 < eta < 1``, ``g(v) <= exp(-c eta V^gamma) g(v)^(1-eta)`` on
  ``v >= V``, and ``v^gamma >= kappa sum |k_i|^alpha`` with ``kappa = 1`` for
  ``gamma >= 1`` (superadditivity) and ``d^(gamma-1)`` otherwise (power
  means), giving ``exp(-c eta V^gamma) G_alpha(c (1-eta) kappa)^d``;
* tangent (``gamma >= 1``): ``v^gamma`` lies above its tangent at ``V``, and a
  Chernoff weight ``exp(theta (v - V))`` extends the sum to all of Z^d:
  ``exp(-c V^gamma + u V) G_p(u)^d`` for any ``0 < u <= c gamma V^(gamma-1)``;
* sup-norm shells (``gamma < 1``, ``alpha >= 1``, small d): ``|k|_p >= |k|_inf``
  gives ``exp(-c eta V^gamma) sum_r [(2r+1)^d - (2r-1)^d] exp(-c (1-eta) r^alpha)``.

Each ``G`` is itself enclosed by :func:`gevrey_ibc._numerics.exp_power_series`.
"""

from __future__ import annotations

import bisect
import csv
import io
import json
import math
import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._numerics import Neumaier, log_symmetric_series_upper
from .budget import Budget, BudgetExhausted, resolve
from .kernel import KernelParams, eigenvalue_from_value, log_eigenvalue_from_value
from .lattice import VALUE_EPS, ClassStream, LevelClass, multiplicity

_ETAS = (0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.85, 0.9, 0.95, 0.98)
_TANGENT_U = tuple(2.0 ** (-j / 4.0) for j in range(0, 81))
_SHELL_D_MAX = 6
_SHELL_R_MAX = 100_000
_BOUND_SLACK = 1e-10
_UNIT_ROUNDOFF = 2.0**-53


# ---------------------------------------------------------------------------
# tail bounds


@lru_cache(maxsize=4096)
def _log_shell_sum(d: int, alpha: float, u: float) -> float:
    # sum_{r>=0} shell(r) exp(-u r^alpha); terms eventually have decreasing ratios for alpha >= 1
    logs = [0.0]
    r = 1
    while r < _SHELL_R_MAX:
        shell = (2 * r + 1) ** d - (2 * r - 1) ** d
        logs.append(math.log(shell) - u * r**alpha)
        if r > 1:
            ratio = math.exp(logs[-1] - logs[-2])
            if ratio <= 0.5 and logs[-1] < logs[-2]:
                nxt = (2 * r + 3) ** d - (2 * r + 1) ** d
                log_next = math.log(nxt) - u * (r + 1) ** alpha
                rho = math.exp(log_next - logs[-1])
                if rho <= 0.5:
                    arr = np.asarray(logs)
                    top = arr.max()
                    body = top + math.log(math.fsum(np.exp(arr - top)))
                    rem = log_next - math.log1p(-rho)
                    return float(np.logaddexp(body, rem))
        r += 1
    return math.inf


def log_tail_bound(params: KernelParams, horizon: float, tau: float = 1.0) -> float:
    """Log of a certified upper bound on ``sum lambda(k)^tau`` over points with value >= horizon."""
    c = params.rate * tau
    gamma = params.gamma
    d = params.d
    alpha, p = params.alpha, params.p
    V = max(0.0, float(horizon))
    if math.isinf(V):
        return -math.inf
    Vg = V**gamma
    kappa = 1.0 if gamma >= 1.0 else float(d) ** (gamma - 1.0)
    best = math.inf
    for eta in _ETAS:
        u = c * (1.0 - eta) * kappa
        best = min(best, -c * eta * Vg + d * log_symmetric_series_upper(u, alpha))
    if gamma >= 1.0 and V > 0.0:
        slope = c * gamma * V ** (gamma - 1.0)
        for f in _TANGENT_U:
            u = c * f
            if u > slope:
                continue
            best = min(best, -c * Vg + u * V + d * log_symmetric_series_upper(u, p))
    if gamma < 1.0 and alpha >= 1.0 and d <= _SHELL_D_MAX:
        for eta in _ETAS[::2]:
            best = min(best, -c * eta * Vg + _log_shell_sum(d, alpha, c * (1.0 - eta)))
    return best + _BOUND_SLACK


def tail_bound(params: KernelParams, horizon: float, tau: float = 1.0) -> float:
    """Certified upper bound on ``sum lambda(k)^tau`` over all k with ``sum |k_i|^p >= horizon``."""
    return math.exp(min(log_tail_bound(params, horizon, tau), 709.0))


def horizon_for_tail(params: KernelParams, start: float, goal: float, tau: float = 1.0) -> float:
    """A horizon ``V >= start`` with ``tail_bound(V) <= goal`` (near the smallest such)."""
    if goal >= math.inf:
        return start
    if goal <= 0.0:
        return math.inf
    log_goal = math.log(goal)

    def ok(v):
        return log_tail_bound(params, v, tau) <= log_goal

    lo = max(0.0, start)
    if ok(lo):
        return lo
    hi = max(1.0, 2.0 * lo)
    while not ok(hi):
        lo = hi
        hi *= 2.0
        if hi > 1e300:
            return math.inf
    for _ in range(60):
        if hi - lo <= 1e-9 * hi:
            break
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


# ---------------------------------------------------------------------------
# spectrum


@dataclass(frozen=True)
class TraceEstimate:
    """Enclosure ``[lower, upper]`` of a (power) trace."""

    lower: float
    upper: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    @property
    def mid(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, x: float) -> bool:
        return self.lower <= x <= self.upper


class Spectrum:
    """Rearranged eigenvalues ``lambda_1 >= lambda_2 >= ...`` in run-length form.

    Immutable once built.  ``tail_upper`` bounds the sum of every eigenvalue
    not enumerated; all points with lattice value below ``value_horizon``
    are enumerated.  ``complete`` is False when a budget stopped the build
    before its goals were met.
    """

    def __init__(
        self,
        params: KernelParams,
        eigenvalues,
        multiplicities,
        log_eigenvalues,
        tail_upper: float,
        value_horizon: float,
        complete: bool = True,
        classes=None,
        method: str = "",
    ):
        self.params = params
        self.eigenvalues = tuple(eigenvalues)
        self.multiplicities = tuple(int(m) for m in multiplicities)
        self.log_eigenvalues = tuple(log_eigenvalues)
        self.tail_upper = float(tail_upper)
        self.value_horizon = float(value_horizon)
        self.complete = complete
        self.classes = None if classes is None else tuple(classes)
        self.method = method

        starts = [0]
        for m in self.multiplicities:
            starts.append(starts[-1] + m)
        self._starts = starts
        # suffix[j] = sum over runs >= j, accumulated smallest terms first
        suffix = [0.0] * (len(self.eigenvalues) + 1)
        acc = Neumaier()
        err = Neumaier()
        for j in range(len(self.eigenvalues) - 1, -1, -1):
            term = self.eigenvalues[j] * float(self.multiplicities[j])
            acc.add(term)
            # exp of a rounded exponent: relative error grows with |log lambda|
            err.add(term * (4.0 - self.log_eigenvalues[j]))
            suffix[j] = acc.value
        self._suffix = suffix
        self.rounding_error = (err.value + 4.0 * suffix[0]) * _UNIT_ROUNDOFF

    # -- basic views ---------------------------------------------------------

    @property
    def runs(self) -> list[tuple[float, int]]:
        return list(zip(self.eigenvalues, self.multiplicities))

    @property
    def enumerated_count(self) -> int:
        return self._starts[-1]

    @property
    def partial_sum(self) -> float:
        return self._suffix[0]

    def __len__(self):
        return len(self.eigenvalues)

    def __repr__(self):
        return (
            f"Spectrum({self.params}, runs={len(self.eigenvalues)}, "
            f"count={self.enumerated_count}, partial={self.partial_sum!r}, "
            f"tail_upper={self.tail_upper!r}, complete={self.complete})"
        )

    def _run_of(self, position: int) -> int:
        # run index holding 1-based position
        if not 1 <= position <= self.enumerated_count:
            raise IndexError(f"position {position} outside 1..{self.enumerated_count}")
        return bisect.bisect_left(self._starts, position) - 1

    def eigenvalue(self, position: int) -> float:
        """``lambda_position`` (1-based)."""
        return self.eigenvalues[self._run_of(position)]

    def log_eigenvalue(self, position: int) -> float:
        return self.log_eigenvalues[self._run_of(position)]

    def expanded(self, limit: int | None = None) -> list[float]:
        """The first ``limit`` eigenvalues with repetition (all when None)."""
        out: list[float] = []
        for lam, m in zip(self.eigenvalues, self.multiplicities):
            take = m if limit is None else min(m, limit - len(out))
            out.extend([lam] * take)
            if limit is not None and len(out) >= limit:
                break
        return out

    # -- sums ----------------------------------------------------------------

    def rest_sum(self, n: int) -> float:
        """Sum of enumerated eigenvalues at positions ``> n``, accumulated directly."""
        if not 0 <= n <= self.enumerated_count:
            raise ValueError(f"n={n} outside 0..{self.enumerated_count}")
        if n == 0:
            return self._suffix[0]
        j = bisect.bisect_right(self._starts, n) - 1
        if j >= len(self.eigenvalues):
            return 0.0
        left = self._starts[j + 1] - n
        return self._suffix[j + 1] + self.eigenvalues[j] * float(left)

    def first_position(self, threshold: float, offset: float = 0.0) -> int | None:
        """Smallest n with ``rest_sum(n) + offset <= threshold``, or None if none is enumerated."""
        if offset > threshold:
            return None
        nruns = len(self.eigenvalues)
        # smallest run j whose end already satisfies the condition
        lo, hi = 0, nruns
        if self._suffix[0] + offset <= threshold:
            return 0
        while lo < hi:
            mid = (lo + hi) // 2
            if self._suffix[mid + 1] + offset <= threshold:
                hi = mid
            else:
                lo = mid + 1
        j = lo
        start, end = self._starts[j], self._starts[j + 1]
        lam = self.eigenvalues[j]
        slack = threshold - offset - self._suffix[j + 1]
        if lam > 0.0 and slack / lam < end - start:
            n = max(start, end - int(math.floor(slack / lam)))
        else:
            n = start
        while n > start and self.rest_sum(n - 1) + offset <= threshold:
            n -= 1
        while self.rest_sum(n) + offset > threshold:
            n += 1
        return n

    # -- export --------------------------------------------------------------

    def to_rows(self) -> list[dict]:
        rows = []
        acc = Neumaier()
        for lam, m, start in zip(self.eigenvalues, self.multiplicities, self._starts[1:]):
            acc.add(lam * float(m))
            rows.append(
                {"eigenvalue": lam, "multiplicity": m, "cumulative_count": start, "cumulative_sum": acc.value}
            )
        return rows

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha": self.params.alpha,
                "beta": self.params.beta,
                "p": self.params.p,
                "d": self.params.d,
                "partial_sum": self.partial_sum,
                "tail_upper": self.tail_upper,
                "value_horizon": self.value_horizon,
                "complete": self.complete,
                "runs": self.to_rows(),
            }
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["eigenvalue", "multiplicity", "cumulative_count", "cumulative_sum"])
        for row in self.to_rows():
            w.writerow(
                [
                    f"{row['eigenvalue']:.17g}",
                    row["multiplicity"],
                    row["cumulative_count"],
                    f"{row['cumulative_sum']:.17g}",
                ]
            )
        return buf.getvalue()


# ---------------------------------------------------------------------------
# construction


class _RunBuilder:
    def __init__(self, params: KernelParams, tau: float):
        self.params = params
        self.tau = tau
        self.eigs: list[float] = []
        self.mults: list[int] = []
        self.logs: list[float] = []
        self.count = 0
        self.power_acc = Neumaier()

    def add(self, value: float, mult: int) -> None:
        lam = eigenvalue_from_value(self.params, value)
        log_lam = log_eigenvalue_from_value(self.params, value)
        if self.eigs:
            last = self.eigs[-1]
            assert lam <= last, "eigenvalues out of order"
            if lam == last and lam > 0.0:
                self.mults[-1] += mult
                self.count += mult
                self._add_power(lam, log_lam, mult)
                return
        self.eigs.append(lam)
        self.mults.append(mult)
        self.logs.append(log_lam)
        self.count += mult
        self._add_power(lam, log_lam, mult)

    def _add_power(self, lam, log_lam, mult):
        w = lam if self.tau == 1.0 else math.exp(self.tau * log_lam)
        self.power_acc.add(w * float(mult))


def _goal(partial: float, tail_tol: float, tail_abs: float | None) -> float:
    goal = tail_tol * partial
    if tail_abs is not None:
        goal = min(goal, tail_abs)
    return goal


def _choose_method(params: KernelParams, method: str, keep_classes: bool) -> str:
    if method not in ("auto", "classes", "levels"):
        raise ValueError(f"unknown method {method!r}")
    if keep_classes:
        if method == "levels":
            raise ValueError("keep_classes needs the class route")
        return "classes"
    if method == "auto":
        return "levels" if params.integer_p is not None and params.d >= 2 else "classes"
    if method == "levels" and params.integer_p is None:
        raise ValueError("the level route needs a small integer p")
    return method


def build_spectrum(
    params: KernelParams,
    min_count: int = 1,
    tail_tol: float = 1e-10,
    *,
    tail_abs: float | None = None,
    value_limit: float | None = None,
    tail_power: float = 1.0,
    method: str = "auto",
    keep_classes: bool = False,
    budget: Budget | None = None,
) -> Spectrum:
    """Enumerate eigenvalues until every goal holds.

    Goals: at least ``min_count`` eigenvalues; all points with value at most
    ``value_limit``; and a certified remainder bound on ``sum lambda^tail_power``
    no larger than ``tail_tol`` times the enumerated power sum (and no larger
    than ``tail_abs`` when given).  A budget stop returns a spectrum with
    ``complete=False`` instead of raising.
    """
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    if not tail_tol > 0:
        raise ValueError("tail_tol must be positive")
    if tail_abs is not None and not tail_abs > 0:
        raise ValueError("tail_abs must be positive")
    if not tail_power > 0:
        raise ValueError("tail_power must be positive")
    budget = resolve(budget)
    route = _choose_method(params, method, keep_classes)
    vlimit = -1.0 if value_limit is None else float(value_limit) * (1.0 + VALUE_EPS)
    if route == "levels":
        return _build_levels(params, min_count, tail_tol, tail_abs, vlimit, tail_power, budget)
    return _build_classes(params, min_count, tail_tol, tail_abs, vlimit, tail_power, keep_classes, budget)


def _build_classes(params, min_count, tail_tol, tail_abs, vlimit, tau, keep_classes, budget):
    deadline = budget.deadline()
    stream = ClassStream(params)
    runs = _RunBuilder(params, tau)
    kept: list[LevelClass] = []
    check_at = 0.0
    complete = False
    while True:
        horizon = stream.peek_value()
        if runs.count >= min_count and horizon > vlimit and horizon >= check_at:
            goal = _goal(runs.power_acc.value, tail_tol, tail_abs)
            if log_tail_bound(params, horizon, tau) <= _safe_log(goal):
                complete = True
                break
            check_at = horizon_for_tail(params, horizon, goal, tau)
            if check_at <= horizon:
                check_at = math.nextafter(horizon, math.inf)
        if stream.emitted_count >= budget.max_classes or time.monotonic() > deadline:
            break
        cls = next(stream)
        runs.add(cls.value, multiplicity(cls, params.d))
        if keep_classes:
            kept.append(cls)
    horizon = stream.peek_value()
    return Spectrum(
        params,
        runs.eigs,
        runs.mults,
        runs.logs,
        tail_bound(params, horizon),
        horizon,
        complete,
        kept if keep_classes else None,
        "classes",
    )


def _safe_log(x: float) -> float:
    if x <= 0.0:
        return -math.inf
    if math.isinf(x):
        return math.inf
    return math.log(x)


@lru_cache(maxsize=32)
def level_counts(d: int, p: int, vmax: int) -> tuple[int, ...]:
    """``N[v] = #{k in Z^d : sum |k_i|^p = v}`` for ``v = 0..vmax``, exact integers."""
    if p == 1:
        out = [1] + [0] * vmax
        for v in range(1, vmax + 1):
            out[v] = sum(2**j * math.comb(d, j) * math.comb(v - 1, j - 1) for j in range(1, min(d, v) + 1))
        return tuple(out)
    cur = np.zeros(vmax + 1, dtype=object)
    cur[0] = 1
    powers = []
    h = 1
    while h**p <= vmax:
        powers.append(h**p)
        h += 1
    for _ in range(d):
        nxt = cur.copy()
        for s in powers:
            nxt[s:] += 2 * cur[: vmax + 1 - s]
        cur = nxt
    return tuple(int(x) for x in cur)


def _build_levels(params, min_count, tail_tol, tail_abs, vlimit, tau, budget):
    ip = params.integer_p
    deadline = budget.deadline()
    # partial power sum is at least 1 (the origin), so this horizon is conservative
    first_goal = _goal(1.0, tail_tol, tail_abs)
    vmax = max(1, math.ceil(max(vlimit, 0.0)), math.ceil(min(horizon_for_tail(params, 0.0, first_goal, tau), 1e18)))
    complete = False
    while True:
        if vmax > budget.max_levels:
            vmax = budget.max_levels
            counts = level_counts(params.d, ip, vmax)
            runs = _levels_to_runs(params, counts, tau)
            break
        counts = level_counts(params.d, ip, vmax)
        runs = _levels_to_runs(params, counts, tau)
        horizon = vmax + 1
        if runs.count < min_count:
            vmax *= 2
            continue
        goal = _goal(runs.power_acc.value, tail_tol, tail_abs)
        if log_tail_bound(params, horizon, tau) <= _safe_log(goal):
            complete = True
            break
        if time.monotonic() > deadline:
            break
        need = horizon_for_tail(params, horizon, goal, tau)
        vmax = max(vmax + 1, math.ceil(min(need, 1e18)))
    horizon = float(vmax + 1)
    return Spectrum(
        params, runs.eigs, runs.mults, runs.logs, tail_bound(params, horizon), horizon, complete, None, "levels"
    )


def _levels_to_runs(params, counts, tau) -> _RunBuilder:
    runs = _RunBuilder(params, tau)
    for v, n in enumerate(counts):
        if n:
            runs.add(float(v), n)
    return runs


# ---------------------------------------------------------------------------
# traces and tail sums


def trace(params: KernelParams, rel_tol: float = 1e-10, budget: Budget | None = None, **kw) -> TraceEstimate:
    """Enclosure of the trace ``sum_k lambda_k`` of width at most ``rel_tol`` times its lower end."""
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    spec = build_spectrum(params, 1, rel_tol, budget=budget, **kw)
    if not spec.complete:
        raise BudgetExhausted(
            f"trace enclosure for {params} still {spec.tail_upper:.3e} wide after "
            f"{spec.enumerated_count} eigenvalues",
            spec,
        )
    pad = spec.rounding_error
    return TraceEstimate(spec.partial_sum - pad, spec.partial_sum + spec.tail_upper + pad)


def power_trace(
    params: KernelParams, tau: float, rel_tol: float = 1e-10, budget: Budget | None = None, **kw
) -> TraceEstimate:
    """Enclosure of ``sum_k lambda_k^tau`` built from the eigenvalues of ``params`` raised to ``tau``."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if tau == 1.0:
        return trace(params, rel_tol, budget, **kw)
    if not 0.0 < rel_tol < 1.0:
        raise ValueError("rel_tol must lie in (0, 1)")
    spec = build_spectrum(params, 1, rel_tol, tail_power=tau, budget=budget, **kw)
    if not spec.complete:
        raise BudgetExhausted(f"power trace (tau={tau}) for {params} exceeded the budget", spec)
    acc = Neumaier()
    err = Neumaier()
    for log_lam, m in zip(reversed(spec.log_eigenvalues), reversed(spec.multiplicities)):
        term = math.exp(tau * log_lam) * float(m)
        acc.add(term)
        err.add(term * (4.0 - tau * log_lam))
    total = acc.value
    pad = (err.value + 4.0 * total) * _UNIT_ROUNDOFF
    return TraceEstimate(total - pad, total + tail_bound(params, spec.value_horizon, tau) + pad)


def tail_sum(spec: Spectrum, n: int) -> tuple[float, float]:
    """Enclosure of ``sum_{k > n} lambda_k``; the enumerated part is summed directly."""
    lower = spec.rest_sum(n)
    return lower, lower + spec.tail_upper
