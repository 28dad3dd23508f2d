"""Small helpers for exact rational bookkeeping."""
from __future__ import annotations

from fractions import Fraction
from math import isqrt

Rational = Fraction

# default number of fractional bits kept when a square root has to be rounded
SQRT_BITS = 96


def to_fraction(x) -> Fraction:
    """Parse ints, floats (exactly), Fractions and ``"num/den"``/decimal strings."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x)


def frac_str(x: Fraction) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def dec_str(x: Fraction, digits: int = 6) -> str:
    return f"{float(x):.{digits}e}"


def sqrt_up(x: Fraction, bits: int = SQRT_BITS) -> Fraction:
    """Smallest multiple of 2**-bits that is >= sqrt(x)."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("sqrt of a negative number")
    # sqrt(x) * 2**bits = sqrt(x * 4**bits)
    scaled = x * (1 << (2 * bits))
    n = -(-scaled.numerator // scaled.denominator)  # ceil
    r = isqrt(n)
    if r * r < n:
        r += 1
    return Fraction(r, 1 << bits)


def sqrt_down(x: Fraction, bits: int = SQRT_BITS) -> Fraction:
    """Largest multiple of 2**-bits that is <= sqrt(x)."""
    x = Fraction(x)
    if x < 0:
        raise ValueError("sqrt of a negative number")
    scaled = x * (1 << (2 * bits))
    return Fraction(isqrt(scaled.numerator // scaled.denominator), 1 << bits)


def norm2(v) -> Fraction:
    return sum((Fraction(a) * a for a in v), Fraction(0))


def inner(a, b) -> Fraction:
    return sum((Fraction(x) * y for x, y in zip(a, b)), Fraction(0))


def vsub(a, b) -> list[Fraction]:
    return [Fraction(x) - y for x, y in zip(a, b)]
