"""Squared-norm assertion program over a box of fixed-point inputs.

The program computes ``r = <a, a>`` and ``mu = b*r`` for ``a`` ranging over
``[-a_hat, a_hat]^m`` and asserts ``|err(r)| <= chi`` and ``exact(mu) >= xi``.
Additions are exact, so the error of ``r`` is the sum of the per-element
product errors and its extremes decompose element by element.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from ..fixedpoint import FxFormat, RoundingMode, dot, exact, err, mul, track, track_vector
from .types import Verdict, VerdictKind


@dataclass(frozen=True)
class ExampleParams:
    p: int = 8
    q: int = 8
    m: int = 20
    a_hat: Fraction = Fraction(1, 8)
    b: Fraction = Fraction(3, 2)
    xi: Fraction = Fraction(0)
    chi: Fraction = Fraction("0.069580078125")
    mode: RoundingMode = RoundingMode.FLOOR

    @property
    def fmt(self) -> FxFormat:
        return FxFormat(self.p, self.q)


def element_errors(params: ExampleParams) -> dict[int, Fraction]:
    """``err(a*a)`` for every raw grid value ``a`` in ``[-a_hat, a_hat]``."""
    fmt = params.fmt
    r = int(Fraction(params.a_hat) * fmt.scale)
    return {raw: err(mul(track(Fraction(raw, fmt.scale), fmt), track(Fraction(raw, fmt.scale), fmt),
                         params.mode))
            for raw in range(-r, r + 1)}


def program(a, params: ExampleParams):
    """Run the program on one input vector; returns ``(err(r), exact(mu))``."""
    fmt = params.fmt
    av = track_vector(a, fmt, params.mode)
    r = dot(av, av, params.mode)
    mu = mul(track(params.b, fmt, params.mode), r, params.mode)
    return err(r), exact(mu)


def run_assertion_example(params: ExampleParams = ExampleParams()) -> Verdict:
    """Decide the assertion exactly over the whole input box.

    ``stats`` carries ``tight`` (max ``|err(r)|``), ``theoretical``
    (``m * 2**-q``), ``improvement`` (``theoretical/tight - 1``) and
    ``witness`` (an input vector attaining ``tight``).
    """
    fmt = params.fmt
    errs = element_errors(params)
    hi_raw = max(errs, key=lambda k: (errs[k], -abs(k), k))
    lo_raw = min(errs, key=lambda k: (errs[k], abs(k), k))
    hi, lo = errs[hi_raw], errs[lo_raw]
    m = params.m
    if m * hi >= -m * lo:
        tight, w_raw = m * hi, hi_raw
    else:
        tight, w_raw = -m * lo, lo_raw
    witness = tuple(Fraction(w_raw, fmt.scale) for _ in range(m))
    theoretical = m * fmt.ulp
    # exact(mu) = b * sum(a_i^2): minimised at a = 0, or at the corner when b < 0
    b = Fraction(params.b)
    mu_arg = Fraction(0) if b >= 0 else Fraction(params.a_hat)
    min_mu = b * m * mu_arg ** 2
    stats = {
        "tight": tight,
        "theoretical": theoretical,
        "improvement": theoretical / tight - 1 if tight else None,
        "witness": witness,
        "points_per_element": len(errs),
    }
    if tight > params.chi:
        return Verdict(VerdictKind.FAIL, None, "exhaustive-per-element", "|err(r)| > chi", stats)
    if min_mu < params.xi:
        stats["witness"] = tuple(mu_arg for _ in range(m))
        return Verdict(VerdictKind.FAIL, None, "exhaustive-per-element", "exact(mu) < xi", stats)
    return Verdict(VerdictKind.PASS, None, "exhaustive-per-element", "assertion holds", stats)
