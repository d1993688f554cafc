"""Enumeration budgets and the exceptions raised when they run out."""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

DEFAULT_MAX_CLASSES = 1_000_000
DEFAULT_MAX_LEVELS = 4_000_000
DEFAULT_TIME_MS = 10_000
BUDGET_ENV = "GEVREY_BUDGET_MS"


class BudgetExhausted(RuntimeError):
    """Raised when an enumeration budget runs out before a goal is certified.

    ``partial`` holds whatever partial result the caller could salvage
    (usually an incomplete :class:`~gevrey_ibc.spectrum.Spectrum`).
    """

    def __init__(self, msg, partial=None):
        super().__init__(msg)
        self.partial = partial


class FloatRangeError(ValueError):
    """A threshold falls below the smallest positive normal double."""


def _env_time_ms() -> int:
    raw = os.environ.get(BUDGET_ENV)
    if raw is None or raw == "":
        return DEFAULT_TIME_MS
    try:
        value = int(float(raw))
    except ValueError as exc:
        raise ValueError(f"{BUDGET_ENV} must be a number of milliseconds, got {raw!r}") from exc
    if value <= 0:
        raise ValueError(f"{BUDGET_ENV} must be positive, got {raw!r}")
    return value


@dataclass
class Budget:
    """Caps for one query: classes enumerated, integer levels, and a soft wall-clock limit.

    The time cap defaults to ``GEVREY_BUDGET_MS`` when set.
    """

    max_classes: int = DEFAULT_MAX_CLASSES
    max_levels: int = DEFAULT_MAX_LEVELS
    time_ms: int = field(default_factory=_env_time_ms)

    def __post_init__(self):
        if self.max_classes < 1 or self.max_levels < 1 or self.time_ms <= 0:
            raise ValueError("budget caps must be positive")

    def deadline(self) -> float:
        return time.monotonic() + self.time_ms / 1000.0


def resolve(budget: Budget | None) -> Budget:
    return Budget() if budget is None else budget
