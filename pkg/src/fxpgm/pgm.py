"""Proximal gradient method on box QPs, in exact and in fixed-point arithmetic.

The fixed-point step evaluates ``g = tau*(Q x + c)`` as

1. per-row fixed-point dot of ``Q`` with ``x`` (one rounding per product),
2. exact addition of ``c``,
3. one rounded multiplication by ``tau``,

followed by the exact subtraction ``x - g`` and the exact clamp onto
``[l, u]``.  Inputs of every step are re-seeded as error free, so the shadow
of the new iterate is exactly ``T_tau(x)`` of the current one.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from itertools import product
from typing import Sequence

import numpy as np

from .errors import IterationLimit
from .fixedpoint import (FxFormat, FxValue, RoundingMode, Tracked, TrackedVector, clamp, dot,
                         exact_tracked, fx_exact, matvec, mul, sub)
from .qp import BoxQP, grad, f_value, matvec_exact
from .rational import norm2

GRADIENT_ORDER = "row-dot(Q,x) -> +c exact -> *tau rounded"


def composite_map(qp: BoxQP, tau, x) -> list[Fraction]:
    """One exact PGM step ``min(u, max(l, x - tau*grad f(x)))``."""
    tau = Fraction(tau)
    g = grad(qp, x)
    return [min(ui, max(li, Fraction(xi) - tau * gi)) for xi, gi, li, ui in zip(x, g, qp.l, qp.u)]


def pgm_exact(qp: BoxQP, tau, x0, k: int) -> list[list[Fraction]]:
    """Iterates ``x^0 .. x^k`` of the exact method."""
    xs = [[Fraction(v) for v in x0]]
    for _ in range(k):
        xs.append(composite_map(qp, tau, xs[-1]))
    return xs


@dataclass(frozen=True)
class FixedProblem:
    """A realization stored on the solver grid, ready for fixed-point steps."""

    Q: tuple[tuple[FxValue, ...], ...]
    c: tuple[FxValue, ...]
    l: tuple[FxValue, ...]
    u: tuple[FxValue, ...]
    tau: FxValue
    fmt: FxFormat
    mode: RoundingMode = RoundingMode.FLOOR

    @property
    def n(self) -> int:
        return len(self.c)


def to_fixed(qp: BoxQP, fmt: FxFormat, tau, mode: RoundingMode = RoundingMode.FLOOR) -> FixedProblem:
    """Place problem data and step size on the ``fmt`` grid (must be exact)."""
    return FixedProblem(
        Q=tuple(tuple(fx_exact(v, fmt) for v in row) for row in qp.Q),
        c=tuple(fx_exact(v, fmt) for v in qp.c),
        l=tuple(fx_exact(v, fmt) for v in qp.l),
        u=tuple(fx_exact(v, fmt) for v in qp.u),
        tau=fx_exact(tau, fmt),
        fmt=fmt,
        mode=RoundingMode(mode),
    )


def fresh(x: Sequence) -> TrackedVector:
    """Drop accumulated error: shadows become the fixed-point values."""
    out = []
    for v in x:
        out.append(exact_tracked(v.fx if isinstance(v, Tracked) else v))
    return tuple(out)


def grid_point(raw: Sequence[int], fmt: FxFormat) -> TrackedVector:
    return tuple(exact_tracked(FxValue(int(r), fmt)) for r in raw)


def gradient_fixed(fp: FixedProblem, x: TrackedVector) -> TrackedVector:
    """``tau*(Q x + c)`` in fixed point; shadows give ``tau*grad f(x)`` exactly."""
    h = matvec(fp.Q, x, fp.mode, offset=fp.c)
    return tuple(mul(fp.tau, hi, fp.mode) for hi in h)


def dhat2(a: Sequence[Tracked], b: Sequence[Tracked], mode: RoundingMode = RoundingMode.FLOOR) -> Tracked:
    """Fixed-point ``||a - b||^2``: exact difference, then a rounded dot product."""
    diff = [sub(x, y) for x, y in zip(a, b)]
    return dot(diff, diff, mode)


@dataclass(frozen=True)
class Step:
    x: TrackedVector       # input iterate, error free
    g: TrackedVector       # fixed-point tau*grad
    x_next: TrackedVector  # shadow == T_tau(x)
    d2: Tracked            # fixed-point ||x - x_next||^2


def fixed_step(fp: FixedProblem, x: Sequence) -> Step:
    x = fresh(x)
    g = gradient_fixed(fp, x)
    x_next = tuple(clamp(sub(xi, gi), li, ui) for xi, gi, li, ui in zip(x, g, fp.l, fp.u))
    return Step(x, g, x_next, dhat2(x, x_next, fp.mode))


class ExitReason(str, Enum):
    TOLERANCE = "ToleranceHit"
    KMAX = "KmaxHit"


@dataclass(frozen=True)
class StepRecord:
    k: int
    x_raw: tuple[int, ...]
    d2_raw: int
    d2_exact: Fraction
    err_g2: Fraction  # ||err(g)||^2
    err_x2: Fraction  # ||err(x^{k+1})||^2 = ||x^{k+1} - T(x^k)||^2


@dataclass
class PgmTrace:
    exit_reason: ExitReason
    k: int                    # iterations performed
    output: TrackedVector     # x^{k+1} on tolerance exit, x^{kmax} otherwise
    last_step: Step | None
    records: list[StepRecord] = field(default_factory=list)

    @property
    def output_values(self) -> list[Fraction]:
        return [t.value for t in self.output]

    def iterates(self) -> list[list[Fraction]]:
        """Recorded ``x^k`` values followed by the output (full retention only)."""
        fmt = self.output[0].fmt
        return [[Fraction(r, fmt.scale) for r in rec.x_raw] for rec in self.records] + [self.output_values]

    def to_csv(self, path) -> None:
        n = len(self.output)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["k"] + [f"x{i}_raw" for i in range(n)] +
                       ["d2_raw", "d2_exact", "err_g_norm2", "err_x_norm2"])
            for r in self.records:
                w.writerow([r.k, *r.x_raw, r.d2_raw, _q(r.d2_exact), _q(r.err_g2), _q(r.err_x2)])


def _q(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def pgm_fixed(fp: FixedProblem, x0: Sequence, eps_hat, k_max: int, retain: str = "full") -> PgmTrace:
    """Fixed-point PGM, exiting on ``dhat2 < eps_hat`` or after ``k_max`` steps.

    ``retain`` is ``"full"`` (a record per step) or ``"exit"`` (last step only).
    Raises :class:`FxOverflow` when the integer bits are insufficient.
    """
    if retain not in ("full", "exit"):
        raise ValueError("retain must be 'full' or 'exit'")
    eps_hat = Fraction(eps_hat)
    if eps_hat <= 0:
        raise ValueError("eps_hat must be positive")
    x = fresh(x0)
    for xi, li, ui in zip(x, fp.l, fp.u):
        if not (li.raw <= xi.raw <= ui.raw):
            raise ValueError("starting point outside the box")
    records: list[StepRecord] = []
    k = 0
    step = None
    if k_max <= 0:
        return PgmTrace(ExitReason.KMAX, 0, x, None, records)
    while True:
        step = fixed_step(fp, x)
        rec = StepRecord(
            k, tuple(t.raw for t in x), step.d2.raw, step.d2.shadow,
            norm2(t.err for t in step.g), norm2(t.err for t in step.x_next))
        if retain == "full":
            records.append(rec)
        else:
            records[:] = [rec]
        if step.d2.value < eps_hat:
            return PgmTrace(ExitReason.TOLERANCE, k, step.x_next, step, records)
        k += 1
        x = fresh(step.x_next)
        if k >= k_max:
            return PgmTrace(ExitReason.KMAX, k, x, step, records)


# -- reference solution ----------------------------------------------------

@dataclass(frozen=True)
class ReferenceSolution:
    x: tuple[Fraction, ...]
    f: Fraction
    residual: Fraction  # ||x - T_tau(x)||^2 at tau = 1/L-ish; zero for exact KKT points


def _solve(A: list[list[Fraction]], b: list[Fraction]) -> list[Fraction]:
    n = len(A)
    M = [row[:] + [bi] for row, bi in zip(A, b)]
    for k in range(n):
        piv = next(i for i in range(k, n) if M[i][k] != 0)
        M[k], M[piv] = M[piv], M[k]
        for i in range(n):
            if i != k and M[i][k]:
                f = M[i][k] / M[k][k]
                for j in range(k, n + 1):
                    M[i][j] -= f * M[k][j]
    return [M[i][n] / M[i][i] for i in range(n)]


def _candidate(qp: BoxQP, lower: set[int], upper: set[int]) -> list[Fraction]:
    n = qp.n
    x: list[Fraction] = [Fraction(0)] * n
    for i in lower:
        x[i] = qp.l[i]
    for i in upper:
        x[i] = qp.u[i]
    free = [i for i in range(n) if i not in lower and i not in upper]
    if free:
        A = [[qp.Q[i][j] for j in free] for i in free]
        b = [-qp.c[i] - sum((qp.Q[i][j] * x[j] for j in range(n) if j not in free), Fraction(0))
             for i in free]
        for i, v in zip(free, _solve(A, b)):
            x[i] = v
    return x


def is_kkt(qp: BoxQP, x: Sequence[Fraction]) -> bool:
    g = grad(qp, x)
    for xi, gi, li, ui in zip(x, g, qp.l, qp.u):
        if xi < li or xi > ui:
            return False
        if li < xi < ui and gi != 0:
            return False
        if xi == li and gi < 0 and li != ui:
            return False
        if xi == ui and gi > 0:
            return False
    return True


def _float_guess(qp: BoxQP, tol: float, iters: int) -> np.ndarray:
    Q = np.array([[float(v) for v in row] for row in qp.Q])
    c = np.array([float(v) for v in qp.c])
    l = np.array([float(v) for v in qp.l])
    u = np.array([float(v) for v in qp.u])
    step = 1.0 / np.linalg.eigvalsh(Q)[-1]
    x = np.clip(np.zeros(qp.n), l, u)
    y, t = x.copy(), 1.0
    for _ in range(iters):
        x_new = np.clip(y - step * (Q @ y + c), l, u)
        if np.max(np.abs(x_new - x)) < tol:
            return x_new
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        y = x_new + ((t - 1) / t_new) * (x_new - x)
        if np.dot(x_new - x, Q @ x + c) > 0:  # adaptive restart
            y, t_new = x_new.copy(), 1.0
        x, t = x_new, t_new
    return x


def solve_reference(qp: BoxQP, tol: float = 1e-12, max_iter: int = 100000,
                    enumerate_max_n: int = 10) -> ReferenceSolution:
    """Exact optimum of the box QP, as rationals.

    A floating-point accelerated projected-gradient run guesses the active
    set, primal-dual active-set updates in exact arithmetic refine it, and the
    candidate is accepted only if it satisfies the KKT conditions exactly.
    Small problems fall back to enumerating every active set.
    """
    xf = _float_guess(qp, tol, max_iter)
    gf = np.array([float(v) for v in grad(qp, [Fraction(v) for v in xf])])
    scale = 1e-9 * (1 + np.max(np.abs(xf)))
    lower = {i for i in range(qp.n) if xf[i] <= float(qp.l[i]) + scale and gf[i] >= 0}
    upper = {i for i in range(qp.n) if xf[i] >= float(qp.u[i]) - scale and gf[i] <= 0} - lower
    seen = set()
    for _ in range(4 * qp.n + 10):
        key = (frozenset(lower), frozenset(upper))
        if key in seen:
            break
        seen.add(key)
        x = _candidate(qp, lower, upper)
        if is_kkt(qp, x):
            return _reference(qp, x)
        g = grad(qp, x)
        lam = [g[i] if (i in lower or i in upper) else Fraction(0) for i in range(qp.n)]
        lower = {i for i in range(qp.n) if lam[i] + (qp.l[i] - x[i]) > 0}
        upper = {i for i in range(qp.n) if lam[i] + (qp.u[i] - x[i]) < 0} - lower
    if qp.n <= enumerate_max_n:
        for labels in product((0, 1, 2), repeat=qp.n):
            lo = {i for i, s in enumerate(labels) if s == 1}
            up = {i for i, s in enumerate(labels) if s == 2}
            x = _candidate(qp, lo, up)
            if is_kkt(qp, x):
                return _reference(qp, x)
    raise IterationLimit("could not identify the optimal active set")


def _reference(qp: BoxQP, x: list[Fraction]) -> ReferenceSolution:
    # residual at unit step is zero exactly at a KKT point
    res = norm2(a - b for a, b in zip(x, composite_map(qp, 1, x)))
    return ReferenceSolution(tuple(x), f_value(qp, x), res)


__all__ = [
    "GRADIENT_ORDER", "composite_map", "pgm_exact", "FixedProblem", "to_fixed", "fresh",
    "grid_point", "gradient_fixed", "dhat2", "Step", "fixed_step", "ExitReason", "StepRecord",
    "PgmTrace", "pgm_fixed", "ReferenceSolution", "solve_reference", "is_kkt", "matvec_exact",
]
