"""Tractability classification and empirical scans.

:func:`classify` encodes the known truth tables for Gevrey kernels; it does
not infer anything from numerics.  :func:`scan`, :func:`exp_rate_fit` and
:func:`weak_tractability_indicator` produce desk-scale evidence that can be
compared against those tables.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ._numerics import logsumexp
from .budget import Budget, BudgetExhausted
from .complexity import ComplexityQuery, ComplexityResult, _SETTING_ALIASES, CRITERIA, info_complexity
from .kernel import KernelParams
from .spectrum import build_spectrum, power_trace, trace

ALG_NOTIONS = ("ALG-SPT", "ALG-PT", "ALG-QPT", "ALG-UWT", "ALG-WT")
EXP_NOTIONS = ("EXP-SPT", "EXP-PT", "EXP-QPT", "EXP-UWT", "EXP-WT")

# Plain-language grounds for each worst-case entry.
_WOR_BASIS = {
    "ALG-SPT": "worst case: never algebraically (strongly) polynomially tractable",
    "ALG-PT": "worst case: never algebraically (strongly) polynomially tractable",
    "ALG-QPT": "worst case: quasi-polynomial tractability holds exactly when alpha >= p",
    "ALG-UWT": "worst case: uniform weak tractability always holds",
    "ALG-WT": "worst case: weak tractability always holds",
    "ALG-(s,t)-WT": "worst case: (s,t)-weak tractability holds for all s, t > 0",
    "curse": "worst case: no curse (weak tractability holds)",
    "EXP": "worst case: exponential convergence with exponent alpha/d, not uniform in d",
    "EXP-SPT": "worst case: not exponentially uniformly weakly tractable, so no stronger EXP notion",
    "EXP-PT": "worst case: not exponentially uniformly weakly tractable, so no stronger EXP notion",
    "EXP-QPT": "worst case: not exponentially uniformly weakly tractable, so no stronger EXP notion",
    "EXP-UWT": "worst case: exponential uniform weak tractability never holds",
    "EXP-WT": "worst case: exponential weak tractability holds exactly when alpha > p",
    "EXP-(s,t)-WT": "worst case: exponential (s,t)-weak tractability holds exactly when t > 1 or s > p/alpha",
}

_AVG_BASIS = {
    "ALG-SPT": "average case: never algebraically (strongly) polynomially tractable",
    "ALG-PT": "average case: never algebraically (strongly) polynomially tractable",
    "ALG-QPT": "average case: never quasi-polynomially tractable",
    "ALG-UWT": "average case: uniform weak, weak and (s,t<=1)-weak tractability all hold exactly when alpha > p",
    "ALG-WT": "average case: uniform weak, weak and (s,t<=1)-weak tractability all hold exactly when alpha > p",
    "ALG-(s,t)-WT": "average case: holds for every s when t > 1; for t <= 1 exactly when alpha > p",
    "curse": "average case: curse of dimensionality exactly when alpha <= p (normalized complexity >= (3/4) A^d)",
    "EXP": "average case: exponential convergence with exponent alpha/d, not uniform in d",
    "EXP-SPT": "average case: never EXP-SPT, EXP-PT, EXP-QPT or EXP-UWT",
    "EXP-PT": "average case: never EXP-SPT, EXP-PT, EXP-QPT or EXP-UWT",
    "EXP-QPT": "average case: never EXP-SPT, EXP-PT, EXP-QPT or EXP-UWT",
    "EXP-UWT": "average case: never EXP-SPT, EXP-PT, EXP-QPT or EXP-UWT",
    "EXP-WT": "average case: exponential weak tractability exactly when alpha > p",
    "EXP-(s,t)-WT": (
        "average case: holds when t > 1; for t <= 1 and s <= 1 exactly when s > p/alpha; "
        "for t <= 1 and s > 1 exactly when alpha > p"
    ),
}

_ASYMMETRY_NOTE = (
    "The worst-case exponential (s,t) rule has no split at s = 1, while the average-case rule "
    "does; both are encoded as stated rather than harmonized."
)


@dataclass(frozen=True)
class TractabilityProfile:
    """Tractability flags for one ``(alpha, p)`` pair in one setting.

    ``flags`` maps notion names (``"ALG-QPT"``, ``"EXP-WT"``, ``"curse"``,
    ``"EXP"``, ``"UEXP"``, ...) to booleans; the two (s,t) notions are
    predicates reached through :meth:`alg_st_wt` and :meth:`exp_st_wt`.
    ``basis`` gives the ground for each entry.
    """

    alpha: float
    beta: float
    p: float
    setting: str
    criterion: str
    flags: dict
    basis: dict
    _alg_st: Callable[[float, float], bool] = field(repr=False, compare=False)
    _exp_st: Callable[[float, float], bool] = field(repr=False, compare=False)
    note: str = ""

    def __getitem__(self, notion: str) -> bool:
        return self.flags[notion]

    def alg_st_wt(self, s: float, t: float) -> bool:
        _check_st(s, t)
        return self._alg_st(s, t)

    def exp_st_wt(self, s: float, t: float) -> bool:
        _check_st(s, t)
        return self._exp_st(s, t)

    def exponent(self, d: int) -> float:
        """Exponent of exponential convergence, ``alpha / d``."""
        if d < 1:
            raise ValueError("d must be >= 1")
        return self.alpha / d

    def report(self) -> str:
        lines = [f"alpha={self.alpha!r} beta={self.beta!r} p={self.p!r} setting={self.setting} criterion={self.criterion}"]
        for name, value in self.flags.items():
            lines.append(f"  {name:<14} {'yes' if value else 'no ':<4} {self.basis.get(name, '')}")
        lines.append(f"  {'ALG-(s,t)-WT':<14} pred {self.basis['ALG-(s,t)-WT']}")
        lines.append(f"  {'EXP-(s,t)-WT':<14} pred {self.basis['EXP-(s,t)-WT']}")
        lines.append(f"  {'exponent':<14} alpha/d")
        if self.note:
            lines.append(f"  note: {self.note}")
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "p": self.p,
            "setting": self.setting,
            "criterion": self.criterion,
            "flags": dict(self.flags),
            "basis": dict(self.basis),
            "exponent": "alpha/d",
            "note": self.note,
        }


def _check_st(s: float, t: float) -> None:
    if not (s > 0 and t > 0):
        raise ValueError("s and t must be positive")


def classify(alpha: float, beta: float, p: float, setting: str = "average", criterion: str = "ABS") -> TractabilityProfile:
    """Truth table of tractability notions for the Gevrey kernel with these parameters.

    ``beta`` and the error criterion do not change any entry; they are
    validated and recorded.

    >>> classify(2, 1, 1, "average")["ALG-UWT"]
    True
    >>> classify(1, 1, 1, "worst")["ALG-QPT"]
    True
    """
    for name, value in (("alpha", alpha), ("beta", beta), ("p", p)):
        if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
            raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    setting_key = _SETTING_ALIASES.get(str(setting).lower())
    if setting_key is None:
        raise ValueError(f"unknown setting {setting!r}")
    crit = str(criterion).upper()
    if crit not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    alpha, beta, p = float(alpha), float(beta), float(p)

    if setting_key == "worst":
        flags = {
            "ALG-SPT": False,
            "ALG-PT": False,
            "ALG-QPT": alpha >= p,
            "ALG-UWT": True,
            "ALG-WT": True,
            "curse": False,
            "EXP": True,
            "UEXP": False,
            "EXP-SPT": False,
            "EXP-PT": False,
            "EXP-QPT": False,
            "EXP-UWT": False,
            "EXP-WT": alpha > p,
        }

        def alg_st(s, t):
            return True

        def exp_st(s, t):
            return t > 1 or s > p / alpha

        basis, note = _WOR_BASIS, _ASYMMETRY_NOTE
    else:
        flags = {
            "ALG-SPT": False,
            "ALG-PT": False,
            "ALG-QPT": False,
            "ALG-UWT": alpha > p,
            "ALG-WT": alpha > p,
            "curse": alpha <= p,
            "EXP": True,
            "UEXP": False,
            "EXP-SPT": False,
            "EXP-PT": False,
            "EXP-QPT": False,
            "EXP-UWT": False,
            "EXP-WT": alpha > p,
        }

        def alg_st(s, t):
            return t > 1 or alpha > p

        def exp_st(s, t):
            if t > 1:
                return True
            if s <= 1:
                return s > p / alpha
            return alpha > p

        basis, note = _AVG_BASIS, _ASYMMETRY_NOTE
    basis = dict(basis)
    basis["UEXP"] = basis["EXP"]
    return TractabilityProfile(alpha, beta, p, setting_key, crit, flags, basis, alg_st, exp_st, note)


# ---------------------------------------------------------------------------
# scans


@dataclass(frozen=True)
class ScanRow:
    result: ComplexityResult
    log_n: float | None
    ratios: dict

    def as_row(self) -> dict:
        row = self.result.as_row()
        row["log_n"] = self.log_n
        row.update(self.ratios)
        return row


def _ratio_columns(n: int | None, eps: float, d: int, st_pairs) -> tuple[float | None, dict]:
    if n is None or n < 1:
        log_n = None if n is None else -math.inf
    else:
        log_n = math.log(n)
    cols = {}
    for s, t in st_pairs:
        alg_den = eps ** (-s) + d**t
        exp_den = (1.0 + math.log(1.0 / eps)) ** s + d**t
        cols[f"alg_ratio_s{s:g}_t{t:g}"] = None if log_n is None else log_n / alg_den
        cols[f"exp_ratio_s{s:g}_t{t:g}"] = None if log_n is None else log_n / exp_den
    return log_n, cols


def scan(
    alpha: float,
    beta: float,
    p: float,
    epsilons: Sequence[float],
    dims: Sequence[int],
    setting: str = "average",
    criterion: str = "NOR",
    st_pairs: Sequence[tuple[float, float]] = ((1.0, 1.0),),
    threads: int = 1,
    budget: Budget | None = None,
) -> list[ScanRow]:
    """Complexity over an ``epsilon x d`` grid with the usual tractability ratio columns.

    Rows come back in (d, epsilon) order whatever the thread count.  Cells
    that exhaust the budget come back uncertified.
    """
    if not epsilons or not dims:
        raise ValueError("need at least one epsilon and one dimension")
    queries = [
        ComplexityQuery(KernelParams(alpha, beta, p, d), eps, setting, criterion) for d in dims for eps in epsilons
    ]

    def run(q: ComplexityQuery) -> ScanRow:
        try:
            res = info_complexity(q, budget)
        except BudgetExhausted as exc:
            res = ComplexityResult(q, None, False, 0, None, str(exc))
        log_n, cols = _ratio_columns(res.n, q.epsilon, q.params.d, st_pairs)
        return ScanRow(res, log_n, cols)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(run, queries))
    return [run(q) for q in queries]


# ---------------------------------------------------------------------------
# exponential rate fits


@dataclass(frozen=True)
class ExpRateFit:
    d: int
    fitted_exponent: float
    fit_residual: float
    n_range: tuple[int, int]
    setting: str = "worst"
    intercept: float = 0.0


def _log_inverse_errors(params: KernelParams, ns: list[int], setting: str, budget) -> list[float]:
    # returns ln ln(1/e(n)) for each n, never forming e(n) itself
    n_max = max(ns)
    spec = build_spectrum(params, n_max + 1, math.inf, budget=budget)
    if spec.enumerated_count < n_max + 1:
        raise BudgetExhausted(f"need {n_max + 1} eigenvalues for the fit", spec)
    if setting == "worst":
        return [math.log(-0.5 * spec.log_eigenvalue(n + 1)) for n in ns]
    # enumerate far enough that the unenumerated mass is negligible next to every tail
    log_last = spec.log_eigenvalue(n_max + 1)
    value_limit = ((-log_last + 50.0) / params.rate) ** (1.0 / params.gamma)
    spec = build_spectrum(params, n_max + 1, math.inf, value_limit=value_limit, budget=budget)
    if not spec.complete:
        raise BudgetExhausted("enumeration budget exhausted before the fit tail was resolved", spec)
    logs = np.asarray(spec.log_eigenvalues)
    counts = np.asarray(spec.multiplicities, dtype=np.float64)
    ends = np.cumsum(spec.multiplicities)
    out = []
    for n in ns:
        j = int(np.searchsorted(ends, n, side="right"))
        parts = [float(logs[j]) + math.log(float(ends[j] - n))] if j < len(logs) else []
        if j + 1 < len(logs):
            parts.append(logsumexp(logs[j + 1 :] + np.log(counts[j + 1 :])))
        log_tail = logsumexp(parts)
        if not -log_tail > 0:
            raise ValueError(f"tail at n={n} is not below 1; use larger n")
        out.append(math.log(-0.5 * log_tail))
    return out


def exp_rate_fit(params: KernelParams, n_grid: Sequence[int], setting: str = "worst", budget: Budget | None = None) -> ExpRateFit:
    """Least-squares slope of ``ln ln(1/e(n))`` against ``ln n``; estimates ``alpha/d``.

    Errors are handled through their logarithms, so grids whose errors
    underflow double precision are fine.
    """
    setting_key = _SETTING_ALIASES.get(str(setting).lower())
    if setting_key is None:
        raise ValueError(f"unknown setting {setting!r}")
    ns = sorted({int(n) for n in n_grid})
    if len(ns) < 2:
        raise ValueError("need at least two distinct n")
    floor = 2**params.d
    if ns[0] < floor:
        raise ValueError(f"every n must be >= 2^d = {floor}")
    y = np.asarray(_log_inverse_errors(params, ns, setting_key, budget))
    x = np.log(np.asarray(ns, dtype=np.float64))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    return ExpRateFit(params.d, float(slope), rms, (ns[0], ns[-1]), setting_key, float(intercept))


def geometric_n_grid(lo: int, hi: int, num: int) -> list[int]:
    """``num`` integers spread geometrically over ``[lo, hi]`` (duplicates removed)."""
    if not (1 <= lo <= hi) or num < 1:
        raise ValueError("need 1 <= lo <= hi and num >= 1")
    return sorted({int(round(v)) for v in np.geomspace(lo, hi, num)})


# ---------------------------------------------------------------------------
# sufficient-condition diagnostic


def weak_tractability_indicator(
    alpha: float,
    beta: float,
    p: float,
    tau: float,
    t: float,
    dims: Sequence[int],
    criterion: str = "NOR",
    rel_tol: float = 1e-8,
    budget: Budget | None = None,
) -> list[float]:
    """``ln((sum_j lambda_j^tau)^(1/tau) / CRI_d) / d^t`` for each d.

    ``CRI_d`` is the initial average-case error ``sqrt(trace)`` for NOR and 1
    for ABS.  Values tending to 0 as d grows indicate (s,t)-weak
    tractability for every s.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    if not t > 0:
        raise ValueError("t must be positive")
    crit = str(criterion).upper()
    if crit not in CRITERIA:
        raise ValueError(f"unknown criterion {criterion!r}")
    out = []
    for d in dims:
        params = KernelParams(alpha, beta, p, d)
        log_power = math.log(power_trace(params, tau, rel_tol, budget).mid) / tau
        log_cri = 0.5 * math.log(trace(params, rel_tol, budget).mid) if crit == "NOR" else 0.0
        out.append((log_power - log_cri) / d**t)
    return out
