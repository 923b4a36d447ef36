"""Nonnegative reals stored as base-2 logarithms.

Certificate thresholds live at magnitudes like 2**-1466, far below what a
double can hold. ``LogScalar`` keeps the exponent itself in a double, so
products, powers, minima and comparisons reduce to exact (or near-exact)
arithmetic on exponents. Addition goes through a stable log-sum-exp.

Zero is encoded as ``log2 = -inf`` and the infinite marker (used for laws
whose carre du champ is bounded away from zero) as ``log2 = +inf``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True, order=False)
class LogScalar:
    """A nonnegative real x represented by log2(x)."""

    log2: float

    # -- constructors ------------------------------------------------------

    @classmethod
    def from_float(cls, value: float) -> "LogScalar":
        if value < 0:
            raise ValueError(f"LogScalar is nonnegative, got {value}")
        if value == 0:
            return cls(-math.inf)
        return cls(math.log2(value))

    @classmethod
    def from_log2(cls, log2_value: float) -> "LogScalar":
        return cls(float(log2_value))

    @classmethod
    def zero(cls) -> "LogScalar":
        return cls(-math.inf)

    @classmethod
    def one(cls) -> "LogScalar":
        return cls(0.0)

    @classmethod
    def infinite(cls) -> "LogScalar":
        return cls(math.inf)

    # -- predicates --------------------------------------------------------

    @property
    def flag(self) -> str:
        """One of ``zero`` / ``positive`` / ``infinite``."""
        if self.log2 == -math.inf:
            return "zero"
        if self.log2 == math.inf:
            return "infinite"
        return "positive"

    @property
    def is_zero(self) -> bool:
        return self.log2 == -math.inf

    @property
    def is_infinite(self) -> bool:
        return self.log2 == math.inf

    # -- conversions -------------------------------------------------------

    def to_float(self) -> float:
        """Round-trip to a double; over/underflows to inf/0 silently."""
        if self.is_zero:
            return 0.0
        if self.is_infinite:
            return math.inf
        try:
            return 2.0 ** self.log2
        except OverflowError:
            return math.inf

    # -- arithmetic ---------------------------------------------------------

    def __mul__(self, other: "LogScalar") -> "LogScalar":
        if (self.is_zero and other.is_infinite) or (self.is_infinite and other.is_zero):
            raise ValueError("0 * inf is undefined for LogScalar")
        return LogScalar(self.log2 + other.log2)

    def __truediv__(self, other: "LogScalar") -> "LogScalar":
        if other.is_zero:
            raise ZeroDivisionError("LogScalar division by zero")
        if self.is_infinite and other.is_infinite:
            raise ValueError("inf / inf is undefined for LogScalar")
        return LogScalar(self.log2 - other.log2)

    def __pow__(self, exponent: float) -> "LogScalar":
        if exponent == 0:
            return LogScalar.one()
        if self.is_zero and exponent < 0:
            raise ZeroDivisionError("0 cannot be raised to a negative power")
        return LogScalar(self.log2 * exponent)

    def __add__(self, other: "LogScalar") -> "LogScalar":
        if self.is_infinite or other.is_infinite:
            return LogScalar.infinite()
        hi, lo = (self.log2, other.log2) if self.log2 >= other.log2 else (other.log2, self.log2)
        if lo == -math.inf:
            return LogScalar(hi)
        return LogScalar(hi + math.log2(1.0 + 2.0 ** (lo - hi)))

    def ldexp(self, k: int) -> "LogScalar":
        """Multiply by 2**k, exact in exponent arithmetic."""
        if self.is_zero or self.is_infinite:
            return self
        return LogScalar(self.log2 + k)

    # -- ordering -----------------------------------------------------------

    def __lt__(self, other: "LogScalar") -> bool:
        return self.log2 < other.log2

    def __le__(self, other: "LogScalar") -> bool:
        return self.log2 <= other.log2

    def __gt__(self, other: "LogScalar") -> bool:
        return self.log2 > other.log2

    def __ge__(self, other: "LogScalar") -> bool:
        return self.log2 >= other.log2

    def __repr__(self) -> str:
        return f"LogScalar(2^{self.log2})"


def minimum(a: LogScalar, b: LogScalar) -> LogScalar:
    return a if a.log2 <= b.log2 else b


def maximum(a: LogScalar, b: LogScalar) -> LogScalar:
    return a if a.log2 >= b.log2 else b


def as_logscalar(value: "LogScalar | float | int") -> LogScalar:
    """Coerce plain nonnegative numbers; LogScalar values pass through."""
    if isinstance(value, LogScalar):
        return value
    return LogScalar.from_float(float(value))
