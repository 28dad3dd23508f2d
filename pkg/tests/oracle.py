"""Independent exact-rational reference evaluators used by the tests.

Nothing here imports the package's arithmetic: rounding is done with
``math.floor`` on Fractions and ranges are checked directly on values.
"""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import product

HALF = Fraction(1, 2)


def rnd(x: Fraction, mode: str) -> int:
    """Round a rational to an integer."""
    if mode == "floor":
        return math.floor(x)
    if mode == "toward-zero":
        return math.trunc(x)
    if mode == "nearest":
        return math.floor(x + HALF)
    raise ValueError(mode)


def to_grid(x: Fraction, q: int, mode: str) -> Fraction:
    return Fraction(rnd(Fraction(x) * 2 ** q, mode), 2 ** q)


def in_range(v: Fraction, p: int) -> bool:
    return abs(v) < 2 ** p


def clip(v, lo, hi):
    return max(lo, min(hi, v))


def one_step(Q, c, l, u, tau, q, mode, x):
    """Every quantity of one fixed-point PGM step from grid point ``x``."""
    n = len(x)
    g_hat, g_true = [], []
    for i in range(n):
        h = sum((to_grid(Q[i][j] * x[j], q, mode) for j in range(n)), Fraction(0)) + c[i]
        g_hat.append(to_grid(tau * h, q, mode))
        g_true.append(tau * (sum((Q[i][j] * x[j] for j in range(n)), Fraction(0)) + c[i]))
    xn = [clip(x[i] - g_hat[i], l[i], u[i]) for i in range(n)]
    T = [clip(x[i] - g_true[i], l[i], u[i]) for i in range(n)]
    d2 = sum((to_grid((x[i] - xn[i]) ** 2, q, mode) for i in range(n)), Fraction(0))
    return {
        "d2": d2,
        "omega_sq": sum((a - b) ** 2 for a, b in zip(g_true, g_hat)),
        "delta_sq": sum((a - b) ** 2 for a, b in zip(x, T)),
        "omega_small_sq": sum((a - b) ** 2 for a, b in zip(xn, T)),
        "theta_sq": sum((a - b) ** 2 for a, b in zip(x, xn)),
    }


def brute_extremes(Q, c_list, l, u, tau, q, mode, eps_hat):
    """Pure-Python enumeration of every grid point of every ``c``."""
    s = 2 ** q
    axes = [range(int(a * s), int(b * s) + 1) for a, b in zip(l, u)]
    out = {"omega_sq": None, "assumption": None, "delta_sq": None, "omega_small_sq": None,
           "theta_sq": None}

    def up(k, v):
        out[k] = v if out[k] is None else max(out[k], v)

    for c in c_list:
        for raw in product(*axes):
            x = [Fraction(r, s) for r in raw]
            r = one_step(Q, c, l, u, tau, q, mode, x)
            up("omega_sq", r["omega_sq"])
            if r["d2"] >= eps_hat:
                v = r["delta_sq"]
                out["assumption"] = v if out["assumption"] is None else min(out["assumption"], v)
            else:
                up("delta_sq", r["delta_sq"])
                up("omega_small_sq", r["omega_small_sq"])
                up("theta_sq", r["theta_sq"])
    return out


class ProgramOracle:
    """Straight-line fixed-point program evaluated with plain rationals.

    Each variable is ``(value, shadow, p, q)``.  An operation whose result
    leaves the ``p``-bit range records an overflow and stops the program.
    """

    def __init__(self, mode: str):
        self.mode = mode
        self.vars: list[tuple[Fraction, Fraction, int, int]] = []
        self.overflow = False

    def _push(self, v, s, p, q):
        if not in_range(v, p):
            self.overflow = True
            raise OverflowError
        self.vars.append((v, s, p, q))

    def input(self, x, p, q):
        v = to_grid(Fraction(x), q, self.mode)
        self._push(v, v, p, q)

    def add(self, i, j):
        a, b = self.vars[i], self.vars[j]
        self._push(a[0] + b[0], a[1] + b[1], a[2], a[3])

    def sub(self, i, j):
        a, b = self.vars[i], self.vars[j]
        self._push(a[0] - b[0], a[1] - b[1], a[2], a[3])

    def neg(self, i):
        a = self.vars[i]
        self._push(-a[0], -a[1], a[2], a[3])

    def mul(self, i, j):
        a, b = self.vars[i], self.vars[j]
        self._push(to_grid(a[0] * b[0], a[3], self.mode), a[1] * b[1], a[2], a[3])

    def convert(self, i, p, q):
        a = self.vars[i]
        v = a[0] if q >= a[3] else to_grid(a[0], q, self.mode)
        self._push(v, a[1], p, q)

    def minimum(self, i, j):
        a, b = self.vars[i], self.vars[j]
        self._push(min(a[0], b[0]), min(a[1], b[1]), a[2], a[3])

    def maximum(self, i, j):
        a, b = self.vars[i], self.vars[j]
        self._push(max(a[0], b[0]), max(a[1], b[1]), a[2], a[3])

    def dot(self, pairs):
        acc = None
        for i, j in pairs:
            a, b = self.vars[i], self.vars[j]
            v = to_grid(a[0] * b[0], a[3], self.mode)
            if not in_range(v, a[2]):
                self.overflow = True
                raise OverflowError
            s = a[1] * b[1]
            if acc is None:
                acc = (v, s)
            else:
                acc = (acc[0] + v, acc[1] + s)
                if not in_range(acc[0], a[2]):
                    self.overflow = True
                    raise OverflowError
        a = self.vars[pairs[0][0]]
        self._push(acc[0], acc[1], a[2], a[3])
