"""Ordered products of 2x2 factors indexed by a totally ordered set.

Only finite truncations are ever multiplied. The error against the full
(infinite) product is bounded by :func:`estimate_tail` from the sum of
deviation norms of the omitted factors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

from .errors import InvalidArgumentError
from .plane import Mat2


@dataclass(frozen=True)
class OrderedFactor:
    position: Any
    factor: Mat2
    deviation_norm: float

    @classmethod
    def of(cls, position: Any, factor: Mat2) -> OrderedFactor:
        return cls(position, factor, factor.deviation_norm())


@dataclass(frozen=True)
class ProductResult:
    value: Mat2
    tail_bound: float
    factors_used: int
    norm_sum: float


def _check_order(factors: Sequence[OrderedFactor]) -> None:
    for prev, cur in zip(factors, factors[1:]):
        if not prev.position < cur.position:
            raise InvalidArgumentError(
                "factor positions must be strictly increasing",
                previous=prev.position,
                current=cur.position,
            )


def product_in_order(factors: Sequence[OrderedFactor]) -> ProductResult:
    """Left-to-right product in position order; tail_bound is left at 0."""
    _check_order(factors)
    value = Mat2.identity()
    norm_sum = 0.0
    for f in factors:
        value = value @ f.factor
        norm_sum += f.deviation_norm
    return ProductResult(value, 0.0, len(factors), norm_sum)


def product_inverse(factors: Sequence[OrderedFactor]) -> Mat2:
    """Inverse of the ordered product: reversed product of inverses."""
    _check_order(factors)
    value = Mat2.identity()
    for f in reversed(factors):
        value = value @ f.factor.inv()
    return value


def estimate_tail(omitted_norm_sum: float, current_norm_sum: float) -> float:
    """Bound on |full - truncated| when the omitted factors' deviation norms sum to at most omitted_norm_sum."""
    if omitted_norm_sum < 0 or current_norm_sum < 0:
        raise InvalidArgumentError(
            "norm sums must be non-negative", omitted=omitted_norm_sum, current=current_norm_sum
        )
    if omitted_norm_sum == 0:
        return 0.0
    return omitted_norm_sum * math.exp(current_norm_sum + omitted_norm_sum)


def geometric_tail(c: float, ratio: float, n: int) -> float:
    """sum_{k > n} c * ratio**k, for 0 <= ratio < 1."""
    if not 0 <= ratio < 1:
        raise InvalidArgumentError("geometric ratio must lie in [0, 1)", ratio=ratio)
    return c * ratio ** (n + 1) / (1.0 - ratio)
