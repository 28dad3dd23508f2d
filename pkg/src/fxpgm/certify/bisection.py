"""Bisection on a monotone PASS/FAIL oracle over exact rational thresholds."""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import BackendInconclusive
from ..rational import sqrt_down, sqrt_up
from .types import BoundQuery, VerdictKind, Witness


@dataclass
class BisectionStats:
    init: Fraction
    tol: Fraction
    n_pass: int = 0
    n_fail: int = 0
    n_unknown: int = 0
    durations: list[float] = field(default_factory=list)
    backends: set[str] = field(default_factory=set)

    @property
    def total_time(self) -> float:
        return sum(self.durations)

    @property
    def pf(self) -> str:
        s = f"{self.n_pass}/{self.n_fail}"
        return s + (f" ({self.n_unknown} unknown)" if self.n_unknown else "")


@dataclass
class BisectionResult:
    bound: Fraction                 # sqrt of the passing end, rounded to stay sound
    b_pass: Fraction
    b_fail: Fraction | None         # not-PASS end; None if nothing above ever failed
    tight: bool                     # False when UNKNOWN verdicts were absorbed
    stats: BisectionStats
    witness: Witness | None = None  # witness at the failing end, if any

    @property
    def bracket(self) -> tuple[Fraction | None, Fraction]:
        return self.b_fail, self.b_pass


def bisect_bound(query: BoundQuery, lo, hi, tol, backend, ceiling=None) -> BisectionResult:
    """Narrow ``[lo, hi]`` until the PASS and FAIL thresholds are within ``tol``.

    For upper-bound queries PASS lies above; ``hi`` is grown by 4x until it
    passes (up to ``ceiling``, default ``2**(2p)``).  For the lower-bound
    assumption query PASS lies below and ``hi`` is grown until it stops
    passing.  UNKNOWN counts as not-PASS, which keeps the result sound but
    marks it non-tight.
    """
    lo, hi, tol = Fraction(lo), Fraction(hi), Fraction(tol)
    if tol <= 0 or lo < 0 or hi <= lo:
        raise ValueError("need 0 <= lo < hi and tol > 0")
    ceiling = Fraction(4) ** query.fmt.p if ceiling is None else Fraction(ceiling)
    stats = BisectionStats(init=hi, tol=tol)
    tight = True
    fail_w = None

    def probe(t):
        nonlocal tight, fail_w
        t0 = time.perf_counter()
        v = backend.check(query.at(t))
        stats.durations.append(time.perf_counter() - t0)
        stats.backends.add(v.backend)
        if v.kind is VerdictKind.PASS:
            stats.n_pass += 1
            return True
        if v.kind is VerdictKind.FAIL:
            stats.n_fail += 1
            fail_w = v.witness
        else:
            stats.n_unknown += 1
            tight = False
        return False

    lower = query.which.lower
    if not lower:
        while not probe(hi):
            lo = hi
            if hi >= ceiling:
                raise BackendInconclusive(f"no PASS for {query.which.value} up to {ceiling}")
            hi = min(hi * 4, ceiling)
        while hi - lo > tol:
            mid = (lo + hi) / 2
            if probe(mid):
                hi = mid
            else:
                lo = mid
        return BisectionResult(sqrt_up(hi), hi, lo, tight, stats, fail_w)

    # lower-bound query: PASS at lo, find where it stops passing
    if not probe(lo):
        raise BackendInconclusive(f"{query.which.value} does not PASS at {lo}")
    while probe(hi):
        lo = hi
        if hi >= ceiling:
            return BisectionResult(sqrt_down(lo), lo, None, tight, stats)
        hi = min(hi * 4, ceiling)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        if probe(mid):
            lo = mid
        else:
            hi = mid
    return BisectionResult(sqrt_down(lo), lo, hi, tight, stats, fail_w)
