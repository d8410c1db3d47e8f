"""Exact max-plus arithmetic over the rationals.

Values are either minus infinity (the additive identity, absorbing under
multiplication) or an exact ``Fraction``.  Three carrier sets are supported:
all rationals, nonnegative rationals, and the naturals; membership is a
parse-time guard, the value type is shared.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

RationalLike = Union[int, Fraction]


class DioidKind(enum.Enum):
    """Carrier set of the max-plus structure."""

    MAX_PLUS_Q = "maxplus-q"
    MAX_PLUS_NONNEG_Q = "maxplus-nonneg-q"
    MAX_PLUS_N = "maxplus-n"

    @classmethod
    def from_name(cls, name: str) -> "DioidKind":
        for kind in cls:
            if kind.value == name:
                return kind
        raise ValueError(f"unknown dioid kind {name!r}")

    def admits(self, w: "Weight") -> bool:
        """Membership test for finite values; minus infinity belongs to all kinds."""
        if w.is_neg_inf:
            return True
        frac = w.frac
        if self is DioidKind.MAX_PLUS_Q:
            return True
        if self is DioidKind.MAX_PLUS_NONNEG_Q:
            return frac >= 0
        return frac >= 0 and frac.denominator == 1


@dataclass(frozen=True)
class Weight:
    """A max-plus value: minus infinity or an exact rational.

    ``frac is None`` encodes minus infinity.  ``Fraction`` keeps the
    representation canonical (reduced, positive denominator).
    """

    frac: Fraction | None

    @staticmethod
    def of(value: RationalLike) -> "Weight":
        return Weight(Fraction(value))

    @property
    def is_neg_inf(self) -> bool:
        return self.frac is None

    def __str__(self) -> str:
        return format_weight(self)

    def __repr__(self) -> str:
        return f"Weight({format_weight(self)})"


NEG_INF = Weight(None)
ZERO = NEG_INF
ONE = Weight(Fraction(0))


def oplus(a: Weight, b: Weight) -> Weight:
    """Max of two values; minus infinity is the identity."""
    if a.is_neg_inf:
        return b
    if b.is_neg_inf:
        return a
    return a if a.frac >= b.frac else b


def otimes(a: Weight, b: Weight) -> Weight:
    """Rational addition; minus infinity absorbs."""
    if a.is_neg_inf or b.is_neg_inf:
        return NEG_INF
    return Weight(a.frac + b.frac)


def canonical_leq(a: Weight, b: Weight) -> bool:
    """a precedes b iff oplus(a, b) == b; total, with minus infinity at the bottom."""
    return oplus(a, b) == b


def canonical_lt(a: Weight, b: Weight) -> bool:
    return a != b and canonical_leq(a, b)


def power(a: Weight, n: int) -> Weight:
    """n-fold multiplication; n = 0 yields the multiplicative identity."""
    if n < 0:
        raise ValueError("negative exponent")
    if n == 0:
        return ONE
    if a.is_neg_inf:
        return NEG_INF
    return Weight(a.frac * n)


def pump_exponent(a: Weight, target: Weight, cap: int = 10**6) -> int | None:
    """Smallest n >= 1 with a**n strictly beyond target, in the direction of a.

    For a above the identity the search is for ``a**n > target``, for a below
    it for ``a**n < target``.  Returns None when no n up to ``cap`` works (the
    existence statements this supports have no effective bound in general; the
    cap is documented rather than guessed tight).
    """
    if a.is_neg_inf or a == ONE:
        return None
    if target.is_neg_inf:
        return 1
    av, tv = a.frac, target.frac
    if av > 0:
        n = max(1, int(tv / av) + 1)
        while n <= cap and av * n <= tv:
            n += 1
    else:
        n = max(1, int(tv / av) + 1)
        while n <= cap and av * n >= tv:
            n += 1
    return n if n <= cap else None


def format_weight(w: Weight) -> str:
    """Render: integers bare, other rationals as p/q, minus infinity as -inf."""
    if w.is_neg_inf:
        return "-inf"
    if w.frac.denominator == 1:
        return str(w.frac.numerator)
    return f"{w.frac.numerator}/{w.frac.denominator}"


def parse_weight(text: str) -> Weight:
    """Inverse of format_weight; accepts an optional sign on the numerator."""
    text = text.strip()
    if text in ("-inf", "-INF", "-Inf"):
        return NEG_INF
    try:
        return Weight(Fraction(text))
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"bad weight literal {text!r}") from exc
