"""Verification backends deciding a :class:`BoundQuery`.

``Exhaustive``
    enumerates every realization and grid point; sound and complete while the
    search space stays under ``cap``.
``RandomFalsify``
    samples points through the Tracked arithmetic; only ever FAIL or UNKNOWN.
``AnalyticBound``
    worst-case per-operation error accumulation; only ever PASS or UNKNOWN.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from math import isqrt

import numpy as np

from ..errors import FxOverflow, SearchSpaceTooLarge
from ..fixedpoint import FxFormat, RoundingMode
from ..qp import ProblemFamily
from ..rational import sqrt_down, sqrt_up
from .engine import RawRealization, evaluate, quantity_value
from .pointwise import fixed_problem, step_quantities
from .types import BoundQuery, Verdict, VerdictKind, Which, Witness


def realizations(fam: ProblemFamily, fmt: FxFormat, tau, mode: RoundingMode, stride: int = 1):
    """Yield ``(q_index, c, l, u, RawRealization)`` in enumeration order."""
    for qi, Q in enumerate(fam.Qset):
        for l, u in fam.box_realizations():
            for c in fam.c_realizations(stride):
                yield qi, c, l, u, RawRealization.build(Q, c, l, u, tau, fmt, mode)


def search_space_size(fam: ProblemFamily, fmt: FxFormat, stride: int = 1) -> int:
    s = fmt.scale
    boxes = 0
    for l, u in fam.box_realizations():
        pts = 1
        for a, b in zip(l, u):
            pts *= int((b - a) * s) + 1
        boxes += pts
    n_c = 1
    for ax in fam.grid(fam.c_min, fam.c_max, stride):
        n_c *= len(ax)
    return len(fam.Qset) * n_c * boxes


@dataclass
class ScanResult:
    which: Which
    value: Fraction | None          # extreme of the asserted quantity (None: empty scope)
    witness: Witness | None
    points: int
    elapsed: float
    overflow: Witness | None = None


@dataclass
class Exhaustive:
    cap: int = 200_000_000
    workers: int = 1
    stride: int = 1
    chunk: int = 1 << 17
    name: str = "exhaustive"
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def scan(self, query: BoundQuery) -> ScanResult:
        """Extreme of the query's quantity over the whole search space.

        One pass computes every quantity at once; results are cached per
        (family, format, step, exit threshold, rounding).
        """
        e = query.eps_hat if query.which.needs_eps_hat else None
        key = (query.family, query.fmt, query.tau, e, query.mode, self.stride)
        if key not in self._cache:
            self._cache[key] = self._scan_all(query.family, query.fmt, query.tau,
                                              query.eps_hat_raw if e is not None else None,
                                              query.mode)
        return self._cache[key][query.which]

    def _scan_all(self, fam, fmt, tau, e_raw, mode) -> dict:
        total = search_space_size(fam, fmt, self.stride)
        if total > self.cap:
            raise SearchSpaceTooLarge(f"{total} points exceed the exhaustive cap {self.cap}")
        t0 = time.perf_counter()
        whichs = [w for w in Which if w is not Which.OVERFLOW and (e_raw is not None or not w.needs_eps_hat)]
        best: dict = {}
        overflow = None
        pool = ThreadPoolExecutor(self.workers) if self.workers > 1 else None
        try:
            for qi, c, l, u, R in realizations(fam, fmt, tau, mode, self.stride):
                bounds = list(range(0, R.n_points, self.chunk)) + [R.n_points]
                spans = list(zip(bounds[:-1], bounds[1:]))
                work = (lambda sp: _scan_chunk(R, sp, whichs, e_raw))
                parts = list(pool.map(work, spans)) if pool else [work(sp) for sp in spans]
                for ov_idx, hits in parts:  # chunk order == enumeration order
                    if overflow is None and ov_idx is not None:
                        overflow = Witness(Which.OVERFLOW, qi, c, l, u, R.point_at(ov_idx), fmt,
                                           note="intermediate exceeds integer bits")
                    for w, (num, idx, d2) in hits.items():
                        cur = best.get(w)
                        if cur is None or (num < cur[0] if w.lower else num > cur[0]):
                            best[w] = (num, (qi, c, l, u, R.point_at(idx), d2))
        finally:
            if pool:
                pool.shutdown()
        elapsed = time.perf_counter() - t0
        out = {Which.OVERFLOW: ScanResult(Which.OVERFLOW, None, None, total, elapsed, overflow)}
        for w in whichs:
            value = witness = None
            if w in best:
                num, (qi, c, l, u, x, d2) = best[w]
                value = quantity_value(w.quantity, num, fmt)
                witness = Witness(w, qi, c, l, u, x, fmt, value, d2)
            out[w] = ScanResult(w, value, witness, total, elapsed, overflow)
        return out

    def check(self, query: BoundQuery) -> Verdict:
        t0 = time.perf_counter()
        res = self.scan(query)
        stats = {"points": res.points, "extreme": res.value, "scan_time": res.elapsed}
        if query.which is Which.OVERFLOW:
            if res.overflow is not None:
                return Verdict(VerdictKind.FAIL, res.overflow, self.name, "overflow", stats)
            return Verdict(VerdictKind.PASS, None, self.name, "no overflow", stats)
        if res.overflow is not None:
            raise FxOverflow(f"overflow at {query.fmt} during {query.which.value} check", res.overflow)
        stats["time"] = time.perf_counter() - t0
        if res.value is not None and query.which.violates(res.value, query.threshold):
            return Verdict(VerdictKind.FAIL, res.witness, self.name, "violation", stats)
        if self.stride > 1:
            return Verdict(VerdictKind.UNKNOWN, None, self.name, "coarsened c grid cannot prove PASS", stats)
        return Verdict(VerdictKind.PASS, None, self.name, "holds on every point", stats)


def _scan_chunk(R: RawRealization, span, whichs, e_raw):
    """Overflow index and, per query kind, ``(extreme numerator, flat index, d2_raw)``."""
    start, stop = span
    A = evaluate(R, R.points(start, stop))
    ov_idx = start + int(np.argmax(A.overflow)) if A.overflow.any() else None
    below = above = None
    if e_raw is not None:
        below = np.nonzero(A.d2_raw < e_raw)[0]
        above = np.nonzero(A.d2_raw >= e_raw)[0]
    hits = {}
    for w in whichs:
        sel = None if w is Which.OMEGA_SQ else (above if w is Which.ASSUMPTION else below)
        vals = getattr(A, w.quantity)
        if sel is not None:
            if sel.size == 0:
                continue
            vals = vals[sel]
        k = int(np.argmin(vals)) if w.lower else int(np.argmax(vals))
        idx = k if sel is None else int(sel[k])
        hits[w] = (int(vals[k]), start + idx, int(A.d2_raw[idx]))
    return ov_idx, hits


@dataclass
class RandomFalsify:
    samples: int = 2000
    seed: int = 0
    name: str = "falsify"

    def check(self, query: BoundQuery) -> Verdict:
        fam, fmt = query.family, query.fmt
        rng = np.random.default_rng(self.seed)
        s = fmt.scale
        e_raw = query.eps_hat_raw
        c_axes = fam.grid(fam.c_min, fam.c_max)
        l_axes = fam.grid(fam.l_min, fam.l_max)
        u_axes = fam.grid(fam.u_min, fam.u_max)
        t0 = time.perf_counter()
        for _ in range(self.samples):
            qi = int(rng.integers(len(fam.Qset)))
            c = tuple(ax[int(rng.integers(len(ax)))] for ax in c_axes)
            l = tuple(ax[int(rng.integers(len(ax)))] for ax in l_axes)
            u = tuple(ax[int(rng.integers(len(ax)))] for ax in u_axes)
            x = tuple(int(rng.integers(int(a * s), int(b * s) + 1)) for a, b in zip(l, u))
            try:
                fp = fixed_problem(fam, qi, c, l, u, fmt, query.tau, query.mode)
                vals = step_quantities(fp, x)
            except FxOverflow:
                w = Witness(Which.OVERFLOW, qi, c, l, u, x, fmt, note="overflow")
                if query.which is Which.OVERFLOW:
                    return Verdict(VerdictKind.FAIL, w, self.name, "overflow")
                raise FxOverflow(f"overflow at {fmt}", w)
            if query.which is Which.OVERFLOW:
                continue
            if query.which.selects(vals["d2_raw"], e_raw):
                v = vals[query.which.quantity]
                if query.which.violates(v, query.threshold):
                    w = Witness(query.which, qi, c, l, u, x, fmt, v, vals["d2_raw"])
                    return Verdict(VerdictKind.FAIL, w, self.name, "violation",
                                   {"time": time.perf_counter() - t0})
        return Verdict(VerdictKind.UNKNOWN, None, self.name, f"no violation in {self.samples} samples",
                       {"time": time.perf_counter() - t0})


# rounding error interval (exact - rounded) in ulps, per mode
_ERR = {
    RoundingMode.FLOOR: (Fraction(0), Fraction(1)),
    RoundingMode.TOWARD_ZERO: (Fraction(-1), Fraction(1)),
    RoundingMode.NEAREST: (Fraction(-1, 2), Fraction(1, 2)),
}
# same, for nonnegative operands (squares)
_ERR_NONNEG = {
    RoundingMode.FLOOR: (Fraction(0), Fraction(1)),
    RoundingMode.TOWARD_ZERO: (Fraction(0), Fraction(1)),
    RoundingMode.NEAREST: (Fraction(-1, 2), Fraction(1, 2)),
}


@dataclass
class AnalyticBound:
    """Conservative worst-case accumulation of per-operation rounding errors."""

    dp_limit: int = 256
    name: str = "analytic"

    def omega_sq(self, fam: ProblemFamily, fmt: FxFormat, tau, mode: RoundingMode) -> Fraction:
        lo, hi = _ERR[mode]
        tau = Fraction(tau)
        tau_exact = tau.denominator == 1
        total = Fraction(0)
        for i in range(fam.n):
            # products with integer-valued Q entries are exact
            k = max(sum(1 for v in Q[i] if Fraction(v).denominator != 1) for Q in fam.Qset)
            elo = tau * k * lo + (0 if tau_exact else lo)
            ehi = tau * k * hi + (0 if tau_exact else hi)
            m = max(abs(elo), abs(ehi)) * fmt.ulp
            total += m * m
        return total

    def _widths(self, fam: ProblemFamily, fmt: FxFormat) -> list[int]:
        return [int((b - a) * fmt.scale) for a, b in zip(fam.l_min, fam.u_max)]

    def theta_sq(self, fam: ProblemFamily, fmt: FxFormat, eps_hat, mode: RoundingMode) -> Fraction:
        q = fmt.q
        budget = int(Fraction(eps_hat) * fmt.scale) - 1  # sum of rounded squares is <= this
        widths = self._widths(fam, fmt)
        half = mode is RoundingMode.NEAREST and q >= 1

        def max_d2(k: int, w: int) -> int:
            lim = (2 * k + 1) * (1 << (q - 1)) - 1 if half else (k + 1) * (1 << q) - 1
            d = min(isqrt(lim), w)
            return d * d

        if budget <= self.dp_limit:
            best = [0] * (budget + 1)
            for w in widths:
                row = [max_d2(k, w) for k in range(budget + 1)]
                best = [max(row[k] + best[b - k] for k in range(b + 1)) for b in range(budget + 1)]
            num = best[budget]
        else:
            per = (budget + len(widths)) * (1 << q) - (len(widths) if not half else 0)
            num = min(per, sum(w * w for w in widths))
        return Fraction(num, 1 << (2 * q))

    def bound(self, query: BoundQuery) -> Fraction | None:
        fam, fmt, mode = query.family, query.fmt, query.mode
        om2 = self.omega_sq(fam, fmt, query.tau, mode)
        w = query.which
        if w is Which.OMEGA_SQ or w is Which.OMEGA_SMALL_SQ:
            return om2
        th2 = self.theta_sq(fam, fmt, query.eps_hat, mode)
        if w is Which.THETA_SQ:
            return th2
        if w is Which.DELTA_SQ:
            d = sqrt_up(th2) + sqrt_up(om2)
            box = Fraction(sum(x * x for x in self._widths(fam, fmt)), 1 << (2 * fmt.q))
            return min(d * d, box)
        if w is Which.ASSUMPTION:
            lo, _ = _ERR_NONNEG[mode]
            floor_sq = query.eps_hat + fam.n * lo * fmt.ulp
            if floor_sq <= 0:
                return None
            e = sqrt_down(floor_sq) - sqrt_up(om2)
            return e * e if e > 0 else None
        raise ValueError(f"no analytic bound for {w.value}")

    def overflow_free(self, fam: ProblemFamily, fmt: FxFormat, tau, mode: RoundingMode) -> bool:
        lim = fmt.raw_limit
        s = fmt.scale
        xm = max(max(abs(v) for v in fam.l_min), max(abs(v) for v in fam.u_max)) * s
        cm = max(max(abs(a), abs(b)) for a, b in zip(fam.c_min, fam.c_max)) * s
        tau = Fraction(tau)
        ok = xm < lim and cm < lim and tau * s < lim
        for Q in fam.Qset:
            for row in Q:
                acc = Fraction(0)
                for v in row:
                    ok &= abs(v) * s < lim
                    acc += abs(v) * xm + 1
                    ok &= acc < lim
                h = acc + cm
                g = tau * h + 1
                ok &= h < lim and g < lim and xm + g < lim
        acc = Fraction(0)
        for w in self._widths(fam, fmt):
            acc += Fraction(w * w, s) + 1
            ok &= w < lim and acc < lim
        return bool(ok)

    def check(self, query: BoundQuery) -> Verdict:
        t0 = time.perf_counter()
        if query.which is Which.OVERFLOW:
            ok = self.overflow_free(query.family, query.fmt, query.tau, query.mode)
            kind = VerdictKind.PASS if ok else VerdictKind.UNKNOWN
            return Verdict(kind, None, self.name, "interval magnitude bound",
                           {"time": time.perf_counter() - t0})
        b = self.bound(query)
        stats = {"bound": b, "time": time.perf_counter() - t0}
        if b is None:
            return Verdict(VerdictKind.UNKNOWN, None, self.name, "no useful analytic bound", stats)
        holds = query.threshold <= b if query.which.lower else query.threshold >= b
        if holds:
            return Verdict(VerdictKind.PASS, None, self.name, "implied by worst-case bound", stats)
        return Verdict(VerdictKind.UNKNOWN, None, self.name, "threshold tighter than analytic bound", stats)


def make_backend(kind: str, cap: int = 200_000_000, seed: int = 0, samples: int = 2000, workers: int = 1):
    if kind == "exhaustive":
        return Exhaustive(cap=cap, workers=workers)
    if kind == "falsify":
        return RandomFalsify(samples=samples, seed=seed)
    if kind == "analytic":
        return AnalyticBound()
    raise ValueError(f"unknown backend {kind!r}")
