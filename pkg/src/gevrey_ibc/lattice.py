"""Lattice points of Z^d grouped by their sorted magnitude multiset.

All points obtained from one another by permuting coordinates and flipping
signs share ``sum |k_i|^p`` and hence one eigenvalue.  A :class:`LevelClass`
stands for such an orbit; :func:`multiplicity` gives its exact size.

Classes are generated best-first in nondecreasing value order.  The
canonical form of a class is its nonincreasing tuple of nonzero magnitudes,
and every nonempty tuple has exactly one parent:

* drop the trailing entry when it equals 1, otherwise
* decrement the trailing entry.

Each parent has at most two children (append a 1, increment the trailing
entry) and every child has a strictly larger value, so a heap seeded with
the origin pops every class exactly once in value order without a seen-set.
"""

from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

from .budget import BudgetExhausted, resolve
from .kernel import KernelParams, eigenvalue_at, lattice_value, magnitude_power

# relative slack, toward inclusion, for comparisons against value limits
VALUE_EPS = 2.0**-40

SMALL_D_CAP = 4
POINT_CAP = 2_000_000


@dataclass(frozen=True, order=False)
class LevelClass:
    """An orbit of lattice points under signed coordinate permutations.

    ``magnitudes`` is a tuple of ``(magnitude, count)`` pairs with strictly
    decreasing magnitudes; zero coordinates are implicit.
    """

    magnitudes: tuple[tuple[int, int], ...]
    value: float
    support: int

    @classmethod
    def from_sorted(cls, mags: tuple[int, ...], p: float) -> "LevelClass":
        runs = tuple((m, len(list(g))) for m, g in itertools.groupby(mags))
        return cls(runs, lattice_value(mags, p), len(mags))

    def sorted_magnitudes(self) -> tuple[int, ...]:
        return tuple(m for m, c in self.magnitudes for _ in range(c))

    def __str__(self):
        if not self.magnitudes:
            return "origin"
        return "{" + ", ".join(f"{m}x{c}" for m, c in self.magnitudes) + "}"


@lru_cache(maxsize=None)
def _factorial(n: int) -> int:
    return math.factorial(n)


def multiplicity(cls: LevelClass, d: int) -> int:
    """Number of lattice points in the class: ``2^s d! / (z! prod c_j!)``.

    Exact integer arithmetic; ``s`` is the support and ``z = d - s``.
    """
    if cls.support > d:
        raise ValueError(f"class support {cls.support} exceeds dimension {d}")
    denom = _factorial(d - cls.support)
    for _, count in cls.magnitudes:
        denom *= _factorial(count)
    return (2**cls.support) * _factorial(d) // denom


class ClassStream:
    """Iterator over the classes of Z^d in nondecreasing value order.

    Ties are broken by the lexicographic order of the nonincreasing
    magnitude tuple.  Single consumer; keep one stream per thread.
    """

    def __init__(self, params: KernelParams):
        self.params = params
        self.emitted_count = 0
        self.max_value_emitted = -math.inf
        self._heap: list[tuple[float, tuple[int, ...]]] = [(0.0, ())]

    def __iter__(self) -> Iterator[LevelClass]:
        return self

    def peek_value(self) -> float:
        """Smallest value not yet emitted; every unemitted class has value >= this."""
        return self._heap[0][0] if self._heap else math.inf

    def __next__(self) -> LevelClass:
        if not self._heap:
            raise StopIteration
        value, mags = heapq.heappop(self._heap)
        p = self.params.p
        if len(mags) < self.params.d:
            child = mags + (1,)
            heapq.heappush(self._heap, (_tuple_value(child, p), child))
        if mags and (len(mags) == 1 or mags[-1] < mags[-2]):
            child = mags[:-1] + (mags[-1] + 1,)
            heapq.heappush(self._heap, (_tuple_value(child, p), child))
        assert value >= self.max_value_emitted, "class stream emitted out of order"
        self.emitted_count += 1
        self.max_value_emitted = value
        runs = tuple((m, len(list(g))) for m, g in itertools.groupby(mags))
        return LevelClass(runs, value, len(mags))


def _tuple_value(mags: tuple[int, ...], p: float) -> float:
    return math.fsum(magnitude_power(m, p) for m in mags)


@dataclass
class ClassList:
    """Result of :func:`enumerate_classes`; ``truncated`` marks a budget stop."""

    classes: list[LevelClass]
    truncated: bool = False
    multiplicities: list[int] = field(default_factory=list)

    def __iter__(self):
        return iter(self.classes)

    def __len__(self):
        return len(self.classes)

    def __getitem__(self, i):
        return self.classes[i]

    @property
    def values(self) -> list[float]:
        return [c.value for c in self.classes]


def enumerate_classes(
    params: KernelParams,
    value_limit: float = math.inf,
    class_limit: int | None = None,
    budget=None,
) -> ClassList:
    """All classes with value <= ``value_limit``, or the first ``class_limit`` of them.

    At least one of the two limits must be finite.  If the class budget runs
    out first, the classes found so far are returned with ``truncated=True``.
    """
    if math.isinf(value_limit) and class_limit is None:
        raise ValueError("give a finite value_limit or a class_limit")
    if class_limit is not None and class_limit < 1:
        raise ValueError("class_limit must be >= 1")
    if value_limit < 0:
        raise ValueError("value_limit must be >= 0")
    budget = resolve(budget)
    limit = value_limit * (1.0 + VALUE_EPS)
    stream = ClassStream(params)
    out: list[LevelClass] = []
    while stream.peek_value() <= limit:
        if class_limit is not None and len(out) >= class_limit:
            break
        if len(out) >= budget.max_classes:
            return ClassList(out, True, [multiplicity(c, params.d) for c in out])
        out.append(next(stream))
    return ClassList(out, False, [multiplicity(c, params.d) for c in out])


def grid_count(m: float, d: int, p: float, strict: bool = False, budget=None) -> int:
    """Exact ``#{k in Z^d : sum |k_i|^p <= m}``.

    With ``strict=True`` the boundary is excluded: points whose value is
    within relative ``2**-40`` of ``m`` are treated as ties and dropped.
    """
    if m < 0:
        raise ValueError("m must be >= 0")
    params = KernelParams(1.0, 1.0, p, d)
    classes = enumerate_classes(params, value_limit=m, budget=budget)
    if classes.truncated:
        raise BudgetExhausted(f"grid_count(m={m}, d={d}, p={p}) exceeded the class budget")
    if not strict:
        return sum(classes.multiplicities)
    cut = m * (1.0 - VALUE_EPS)
    return sum(mu for c, mu in zip(classes, classes.multiplicities) if c.value < cut)


def _distinct_permutations(items: list[int]) -> Iterator[tuple[int, ...]]:
    # items sorted ascending; standard next-permutation walk
    a = list(items)
    n = len(a)
    while True:
        yield tuple(a)
        i = n - 2
        while i >= 0 and a[i] >= a[i + 1]:
            i -= 1
        if i < 0:
            return
        j = n - 1
        while a[j] <= a[i]:
            j -= 1
        a[i], a[j] = a[j], a[i]
        a[i + 1 :] = reversed(a[i + 1 :])


def expand_class(cls: LevelClass, d: int) -> list[tuple[int, ...]]:
    """All lattice points of a class, sorted lexicographically."""
    padded = sorted(cls.sorted_magnitudes() + (0,) * (d - cls.support))
    points = []
    for perm in _distinct_permutations(padded):
        nz = [i for i, v in enumerate(perm) if v]
        for signs in itertools.product((1, -1), repeat=len(nz)):
            pt = list(perm)
            for i, s in zip(nz, signs):
                pt[i] *= s
            points.append(tuple(pt))
    points.sort()
    return points


def brute_force_points(
    params: KernelParams,
    linf_radius: int,
    small_d_cap: int = SMALL_D_CAP,
    point_cap: int = POINT_CAP,
) -> list[tuple[tuple[int, ...], float]]:
    """Every point of the box ``|k|_inf <= linf_radius`` with its eigenvalue, sorted descending.

    Test oracle; deliberately shares nothing with the class machinery except
    the eigenvalue formula.
    """
    d = params.d
    if d > small_d_cap:
        raise ValueError(f"brute force limited to d <= {small_d_cap}")
    if linf_radius < 0:
        raise ValueError("linf_radius must be >= 0")
    if (2 * linf_radius + 1) ** d > point_cap:
        raise ValueError(f"box of radius {linf_radius} in d={d} exceeds {point_cap} points")
    axis = range(-linf_radius, linf_radius + 1)
    pts = [(k, eigenvalue_at(params, k)) for k in itertools.product(axis, repeat=d)]
    pts.sort(key=lambda item: -item[1])
    return pts
