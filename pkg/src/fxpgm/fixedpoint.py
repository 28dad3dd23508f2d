"""Bit-exact signed fixed-point arithmetic with exact rational shadows.

Every :class:`Tracked` value carries the fixed-point result actually produced
by the hardware-like computation together with the value the same expression
would have had in exact arithmetic.  ``err = shadow - value`` is therefore the
exact accumulated error, and ``exact(t)`` / ``err(t)`` mirror the accessors of
the verification tool used to certify the solver.

Products are formed at ``2q`` fractional bits and rounded once back to ``q``
bits; additions, subtractions, min/max and clamps are exact.  Every result is
range checked and raises :class:`FxOverflow` when ``|raw| >= 2**(p+q)``.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import FxOverflow

__all__ = [
    "RoundingMode", "FxFormat", "FxValue", "Tracked", "TrackedVector",
    "round_shift", "quantize", "fx_exact", "track", "exact_tracked", "convert",
    "add", "sub", "neg", "mul", "minimum", "maximum", "clamp", "dot", "matvec",
    "err", "exact", "format_fx", "parse_fx",
]


class RoundingMode(str, Enum):
    FLOOR = "floor"
    TOWARD_ZERO = "toward-zero"
    NEAREST = "nearest"  # round half up


def round_shift(num: int, shift: int, mode: RoundingMode = RoundingMode.FLOOR) -> int:
    """Round ``num / 2**shift`` to an integer."""
    if shift == 0:
        return num
    if mode is RoundingMode.FLOOR:
        return num >> shift
    if mode is RoundingMode.TOWARD_ZERO:
        return -((-num) >> shift) if num < 0 else num >> shift
    if mode is RoundingMode.NEAREST:
        return (num + (1 << (shift - 1))) >> shift
    raise ValueError(f"unknown rounding mode {mode!r}")


def _round_fraction(x: Fraction, mode: RoundingMode) -> int:
    n, d = x.numerator, x.denominator
    if mode is RoundingMode.FLOOR:
        return n // d
    if mode is RoundingMode.TOWARD_ZERO:
        return -((-n) // d) if n < 0 else n // d
    if mode is RoundingMode.NEAREST:
        return (2 * n + d) // (2 * d)
    raise ValueError(f"unknown rounding mode {mode!r}")


@dataclass(frozen=True, order=True)
class FxFormat:
    """Signed ``(p.q)`` format: ``p`` integer bits, ``q`` fractional bits."""

    p: int
    q: int
    signed: bool = True

    def __post_init__(self):
        if self.p < 0 or self.q < 0:
            raise ValueError("p and q must be nonnegative")
        if self.p + self.q + 1 > 63:
            raise ValueError(f"format p{self.p}.q{self.q} does not fit a 64-bit word")
        if not self.signed:
            raise ValueError("only signed formats are supported")

    @property
    def scale(self) -> int:
        return 1 << self.q

    @property
    def ulp(self) -> Fraction:
        return Fraction(1, 1 << self.q)

    @property
    def raw_limit(self) -> int:
        """Raw magnitudes must stay strictly below this."""
        return 1 << (self.p + self.q)

    def fits(self, raw: int) -> bool:
        return -self.raw_limit < raw < self.raw_limit

    def __str__(self):
        return f"p{self.p}.q{self.q}"

    @classmethod
    def parse(cls, text: str) -> "FxFormat":
        """Accept ``"p8.q8"`` or ``"8.8"``."""
        m = re.fullmatch(r"p?(\d+)\.q?(\d+)", text.strip())
        if not m:
            raise ValueError(f"bad fixed-point format {text!r}")
        return cls(int(m.group(1)), int(m.group(2)))


@dataclass(frozen=True)
class FxValue:
    raw: int
    fmt: FxFormat

    def __post_init__(self):
        if not self.fmt.fits(self.raw):
            raise FxOverflow(f"raw {self.raw} overflows {self.fmt}")

    @property
    def value(self) -> Fraction:
        return Fraction(self.raw, self.fmt.scale)

    def __str__(self):
        return format_fx(self)


@dataclass(frozen=True)
class Tracked:
    """A fixed-point value paired with its exact shadow."""

    fx: FxValue
    shadow: Fraction

    @property
    def raw(self) -> int:
        return self.fx.raw

    @property
    def fmt(self) -> FxFormat:
        return self.fx.fmt

    @property
    def value(self) -> Fraction:
        return self.fx.value

    @property
    def err(self) -> Fraction:
        return self.shadow - self.fx.value

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __neg__(self):
        return neg(self)

    def __mul__(self, other):
        return mul(self, other)


TrackedVector = tuple  # tuple[Tracked, ...] sharing one format


def quantize(x, fmt: FxFormat, mode: RoundingMode = RoundingMode.FLOOR) -> FxValue:
    x = Fraction(x)
    return FxValue(_round_fraction(x * fmt.scale, mode), fmt)


def fx_exact(x, fmt: FxFormat) -> FxValue:
    """Like :func:`quantize` but refuses values that are not on the grid."""
    x = Fraction(x)
    scaled = x * fmt.scale
    if scaled.denominator != 1:
        raise ValueError(f"{x} is not representable in {fmt}")
    return FxValue(scaled.numerator, fmt)


def exact_tracked(fx: FxValue) -> Tracked:
    return Tracked(fx, fx.value)


def track(x, fmt: FxFormat, mode: RoundingMode = RoundingMode.FLOOR) -> Tracked:
    """Freshly quantized input: its shadow is the grid value, so err = 0."""
    return exact_tracked(quantize(x, fmt, mode))


def track_vector(xs: Iterable, fmt: FxFormat, mode: RoundingMode = RoundingMode.FLOOR) -> TrackedVector:
    return tuple(track(x, fmt, mode) for x in xs)


def convert(t: Tracked, fmt: FxFormat, mode: RoundingMode = RoundingMode.FLOOR) -> Tracked:
    """Re-quantize into another format; the shadow is untouched."""
    shift = fmt.q - t.fmt.q
    if shift >= 0:
        raw = t.raw << shift
    else:
        raw = round_shift(t.raw, -shift, mode)
    return Tracked(FxValue(raw, fmt), t.shadow)


def _as_tracked(x) -> Tracked:
    if isinstance(x, Tracked):
        return x
    if isinstance(x, FxValue):
        return exact_tracked(x)
    raise TypeError(f"expected Tracked or FxValue, got {type(x).__name__}")


def _same_fmt(a: Tracked, b: Tracked) -> FxFormat:
    if a.fmt != b.fmt:
        raise ValueError(f"format mismatch: {a.fmt} vs {b.fmt}")
    return a.fmt


def add(a, b) -> Tracked:
    a, b = _as_tracked(a), _as_tracked(b)
    fmt = _same_fmt(a, b)
    return Tracked(FxValue(a.raw + b.raw, fmt), a.shadow + b.shadow)


def sub(a, b) -> Tracked:
    a, b = _as_tracked(a), _as_tracked(b)
    fmt = _same_fmt(a, b)
    return Tracked(FxValue(a.raw - b.raw, fmt), a.shadow - b.shadow)


def neg(a) -> Tracked:
    a = _as_tracked(a)
    return Tracked(FxValue(-a.raw, a.fmt), -a.shadow)


def mul(a, b, mode: RoundingMode = RoundingMode.FLOOR) -> Tracked:
    a, b = _as_tracked(a), _as_tracked(b)
    fmt = _same_fmt(a, b)
    raw = round_shift(a.raw * b.raw, fmt.q, mode)
    return Tracked(FxValue(raw, fmt), a.shadow * b.shadow)


def minimum(a, b) -> Tracked:
    a, b = _as_tracked(a), _as_tracked(b)
    _same_fmt(a, b)
    fx = a.fx if a.raw <= b.raw else b.fx
    return Tracked(fx, min(a.shadow, b.shadow))


def maximum(a, b) -> Tracked:
    a, b = _as_tracked(a), _as_tracked(b)
    _same_fmt(a, b)
    fx = a.fx if a.raw >= b.raw else b.fx
    return Tracked(fx, max(a.shadow, b.shadow))


def clamp(x, lo: FxValue, hi: FxValue) -> Tracked:
    """Saturate to ``[lo, hi]``; the shadow is clamped to the same interval."""
    if lo.raw > hi.raw:
        raise ValueError("clamp requires lo <= hi")
    return minimum(maximum(x, lo), hi)


def dot(a: Sequence, b: Sequence, mode: RoundingMode = RoundingMode.FLOOR) -> Tracked:
    """Inner product: each product rounded once, partial sums exact."""
    if len(a) != len(b):
        raise ValueError("dot of vectors with different lengths")
    if not a:
        raise ValueError("dot of empty vectors")
    acc = None
    for x, y in zip(a, b):
        term = mul(x, y, mode)
        acc = term if acc is None else add(acc, term)
    return acc


def matvec(M: Sequence[Sequence[FxValue]], x: Sequence, mode: RoundingMode = RoundingMode.FLOOR,
           offset: Sequence[FxValue] | None = None) -> TrackedVector:
    """Row-wise :func:`dot` of a constant matrix with ``x``, plus an optional exact offset."""
    if any(len(row) != len(x) for row in M):
        raise ValueError("matrix and vector dimensions do not conform")
    out = [dot(row, x, mode) for row in M]
    if offset is not None:
        if len(offset) != len(out):
            raise ValueError("offset length does not match")
        out = [add(r, o) for r, o in zip(out, offset)]
    return tuple(out)


def err(t: Tracked) -> Fraction:
    return t.err


def exact(t: Tracked) -> Fraction:
    return t.shadow


_FX_RE = re.compile(r"\s*(-?\d+)@p(\d+)\.q(\d+)\s*")


def format_fx(fx: FxValue) -> str:
    return f"{fx.raw}@{fx.fmt}"


def parse_fx(text: str) -> FxValue:
    m = _FX_RE.fullmatch(text)
    if not m:
        raise ValueError(f"bad fixed-point literal {text!r}")
    return FxValue(int(m.group(1)), FxFormat(int(m.group(2)), int(m.group(3))))
