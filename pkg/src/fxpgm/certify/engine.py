"""Vectorized integer evaluation of one fixed-point PGM step over a grid of points.

Everything is kept as exact integers with fixed power-of-two denominators:

* raw solver values are scaled by ``2**q``;
* exact gradient-step values (``x - tau*grad f(x)``) are scaled by ``2**(3q)``.

Returned squared norms are numerators over ``2**(6q)`` (``omega_sq``,
``delta_sq``, ``omega_small_sq``) or ``2**(2q)`` (``theta_sq``).  When a
computation could exceed 62 bits the arrays fall back to Python integers
(``dtype=object``), which is slower but still exact.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..fixedpoint import FxFormat, RoundingMode

DENOM_POW = {"omega_sq": 6, "delta_sq": 6, "omega_small_sq": 6, "theta_sq": 2}


def round_shift_array(a: np.ndarray, shift: int, mode: RoundingMode) -> np.ndarray:
    if shift == 0:
        return a
    if mode is RoundingMode.FLOOR:
        return a >> shift
    if mode is RoundingMode.TOWARD_ZERO:
        return np.where(a < 0, -((-a) >> shift), a >> shift)
    if mode is RoundingMode.NEAREST:
        return (a + (1 << (shift - 1))) >> shift
    raise ValueError(f"unknown rounding mode {mode!r}")


@dataclass(frozen=True)
class RawRealization:
    """One realization with every datum as a raw integer at the solver ``q``."""

    Q: tuple[tuple[int, ...], ...]
    c: tuple[int, ...]
    l: tuple[int, ...]
    u: tuple[int, ...]
    tau: int
    fmt: FxFormat
    mode: RoundingMode

    @classmethod
    def build(cls, Q, c, l, u, tau, fmt: FxFormat, mode: RoundingMode) -> "RawRealization":
        s = fmt.scale

        def raw(x):
            v = Fraction(x) * s
            if v.denominator != 1:
                raise ValueError(f"{x} is not on the {fmt} grid")
            return v.numerator

        return cls(tuple(tuple(raw(v) for v in row) for row in Q), tuple(raw(v) for v in c),
                   tuple(raw(v) for v in l), tuple(raw(v) for v in u), raw(tau), fmt, RoundingMode(mode))

    @property
    def n(self) -> int:
        return len(self.c)

    @property
    def axis_sizes(self) -> tuple[int, ...]:
        return tuple(hi - lo + 1 for lo, hi in zip(self.l, self.u))

    @property
    def n_points(self) -> int:
        out = 1
        for s in self.axis_sizes:
            out *= s
        return out

    def bits_needed(self) -> int:
        q, n = self.fmt.q, self.n
        xm = max(max(abs(v) for v in self.l), max(abs(v) for v in self.u), 1)
        qm = max(max(abs(v) for row in self.Q for v in row), 1)
        cm = max(max(abs(v) for v in self.c), 1)
        ex = abs(self.tau) * (n * qm * xm + cm * (1 << q)) + 1
        big = max(ex, 2 * xm << (2 * q)) * 4
        return (n * big * big).bit_length() + 2

    def points(self, start: int, stop: int) -> np.ndarray:
        """Grid points with flat indices in ``[start, stop)``, lexicographic order."""
        dtype = object if self.bits_needed() > 62 else np.int64
        idx = np.arange(start, stop, dtype=np.int64)
        sizes = self.axis_sizes
        cols = []
        for k in range(self.n - 1, -1, -1):
            idx, r = np.divmod(idx, sizes[k])
            cols.append(r + self.l[k])
        X = np.stack(cols[::-1], axis=1)
        return X.astype(dtype) if dtype is object else X

    def point_at(self, flat: int) -> tuple[int, ...]:
        out = []
        for k in range(self.n - 1, -1, -1):
            flat, r = divmod(flat, self.axis_sizes[k])
            out.append(r + self.l[k])
        return tuple(out[::-1])


@dataclass
class StepArrays:
    d2_raw: np.ndarray
    omega_sq: np.ndarray
    delta_sq: np.ndarray
    omega_small_sq: np.ndarray
    theta_sq: np.ndarray
    overflow: np.ndarray  # bool per point: some intermediate left the p-bit range


def evaluate(R: RawRealization, X: np.ndarray) -> StepArrays:
    """One fixed-point PGM step at every row of ``X`` (raw grid points)."""
    q, n, mode = R.fmt.q, R.n, R.mode
    limit = R.fmt.raw_limit
    obj = X.dtype == object
    over = np.zeros(X.shape[0], dtype=bool)

    def flag(a):
        nonlocal over
        over = over | (np.abs(a) >= limit)

    def const(v):
        return v if not obj else int(v)

    H, EX, G = [], [], []
    one_q = const(1 << q)
    for i in range(n):
        s = None
        ex_dot = None
        for j in range(n):
            qij = const(R.Q[i][j])
            prod = qij * X[:, j]
            p = round_shift_array(prod, q, mode)
            flag(p)
            s = p if s is None else s + p
            flag(s)
            ex_dot = prod if ex_dot is None else ex_dot + prod
        h = s + const(R.c[i])
        flag(h)
        ex = const(R.tau) * (ex_dot + const(R.c[i]) * one_q)
        g = round_shift_array(const(R.tau) * h, q, mode)
        flag(g)
        H.append(h)
        EX.append(ex)
        G.append(g)

    s2 = const(1 << (2 * q))
    omega_sq = delta_sq = omega_small_sq = theta_sq = d2 = None
    for i in range(n):
        x = X[:, i]
        y = x - G[i]
        flag(y)
        xp = np.clip(y, const(R.l[i]), const(R.u[i]))
        xs = x * s2
        t = np.clip(xs - EX[i], const(R.l[i]) * s2, const(R.u[i]) * s2)  # T(x) at 2^-3q
        e = EX[i] - G[i] * s2
        dx = x - xp
        flag(dx)
        dd = round_shift_array(dx * dx, q, mode)
        flag(dd)
        d2 = dd if d2 is None else d2 + dd
        flag(d2)
        terms = (e * e, (xs - t) ** 2, (t - xp * s2) ** 2, dx * dx)
        if omega_sq is None:
            omega_sq, delta_sq, omega_small_sq, theta_sq = terms
        else:
            omega_sq = omega_sq + terms[0]
            delta_sq = delta_sq + terms[1]
            omega_small_sq = omega_small_sq + terms[2]
            theta_sq = theta_sq + terms[3]
    return StepArrays(d2, omega_sq, delta_sq, omega_small_sq, theta_sq, over)


def quantity_value(name: str, numerator: int, fmt: FxFormat) -> Fraction:
    return Fraction(int(numerator), 1 << (DENOM_POW[name] * fmt.q))
