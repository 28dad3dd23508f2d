"""Box-constrained QP data, the uncertainty family around it, and its constants.

A realization is ``min 1/2 x'Qx + c'x  s.t.  l <= x <= u`` with every datum
on the ``(p'.q')`` grid.  A :class:`ProblemFamily` holds a finite set of
admissible ``Q`` matrices and componentwise ranges for ``c``, ``l`` and ``u``.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from math import floor
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DimensionMismatch, NonSymmetric, NotPositiveDefinite, Underflow
from .fixedpoint import FxFormat, RoundingMode

Matrix = tuple[tuple[Fraction, ...], ...]
Vector = tuple[Fraction, ...]


def as_matrix(M) -> Matrix:
    return tuple(tuple(Fraction(v) for v in row) for row in M)


def as_vector(v) -> Vector:
    return tuple(Fraction(x) for x in v)


def on_grid(x: Fraction, fmt: FxFormat) -> bool:
    return (Fraction(x) * fmt.scale).denominator == 1 and fmt.fits(int(Fraction(x) * fmt.scale))


def is_symmetric(M) -> bool:
    n = len(M)
    return all(len(row) == n for row in M) and all(
        M[i][j] == M[j][i] for i in range(n) for j in range(i + 1, n))


def is_positive_definite(M) -> bool:
    """Exact test: Gaussian elimination without pivoting has positive pivots."""
    A = [[Fraction(v) for v in row] for row in M]
    n = len(A)
    for k in range(n):
        piv = A[k][k]
        if piv <= 0:
            return False
        for i in range(k + 1, n):
            f = A[i][k] / piv
            if f:
                for j in range(k + 1, n):
                    A[i][j] -= f * A[k][j]
    return True


@dataclass(frozen=True)
class BoxQP:
    Q: Matrix
    c: Vector
    l: Vector
    u: Vector
    data_fmt: FxFormat | None = None

    def __post_init__(self):
        object.__setattr__(self, "Q", as_matrix(self.Q))
        for name in ("c", "l", "u"):
            object.__setattr__(self, name, as_vector(getattr(self, name)))
        n = len(self.Q)
        if any(len(v) != n for v in (self.c, self.l, self.u)):
            raise DimensionMismatch("Q, c, l, u dimensions differ")
        if not is_symmetric(self.Q):
            raise NonSymmetric("Q is not symmetric")
        if any(lo >= hi for lo, hi in zip(self.l, self.u)):
            raise ValueError("require l < u componentwise")
        if self.data_fmt is not None:
            entries = [v for row in self.Q for v in row] + list(self.c + self.l + self.u)
            if not all(on_grid(v, self.data_fmt) for v in entries):
                raise ValueError(f"problem data not representable in {self.data_fmt}")

    @property
    def n(self) -> int:
        return len(self.Q)


@dataclass(frozen=True)
class ProblemFamily:
    """Finite set of ``Q`` matrices plus box ranges for ``c``, ``l`` and ``u``."""

    Qset: tuple[Matrix, ...]
    c_min: Vector
    c_max: Vector
    l_min: Vector
    l_max: Vector
    u_min: Vector
    u_max: Vector
    data_fmt: FxFormat
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "Qset", tuple(as_matrix(Q) for Q in self.Qset))
        for name in ("c_min", "c_max", "l_min", "l_max", "u_min", "u_max"):
            object.__setattr__(self, name, as_vector(getattr(self, name)))
        if not self.Qset:
            raise ValueError("Qset must not be empty")
        n = len(self.Qset[0])
        vecs = (self.c_min, self.c_max, self.l_min, self.l_max, self.u_min, self.u_max)
        if any(len(Q) != n for Q in self.Qset) or any(len(v) != n for v in vecs):
            raise DimensionMismatch("family dimensions differ")
        if any(a > b for a, b in zip(self.c_min, self.c_max)):
            raise ValueError("require c_min <= c_max")
        if any(a > b for a, b in zip(self.l_min, self.l_max)) or \
                any(a > b for a, b in zip(self.u_min, self.u_max)):
            raise ValueError("empty l or u range")
        if any(a >= b for a, b in zip(self.l_max, self.u_min)):
            raise ValueError("require l_max < u_min")
        for Q in self.Qset:
            if not is_symmetric(Q):
                raise NonSymmetric("a Q in the family is not symmetric")
            if not is_positive_definite(Q):
                raise NotPositiveDefinite("a Q in the family is not positive definite")
        entries = [v for Q in self.Qset for row in Q for v in row] + [x for v in vecs for x in v]
        if not all(on_grid(v, self.data_fmt) for v in entries):
            raise ValueError(f"family data not representable in {self.data_fmt}")

    @classmethod
    def fixed_box(cls, Q, c_min, c_max, l, u, data_fmt: FxFormat, Qset=None, **meta):
        """Family with a fixed box ``[l, u]`` (the common case)."""
        return cls(tuple(Qset) if Qset else (Q,), c_min, c_max, l, l, u, u, data_fmt, meta)

    @classmethod
    def singleton(cls, qp: BoxQP, data_fmt: FxFormat | None = None):
        fmt = data_fmt or qp.data_fmt
        return cls.fixed_box(qp.Q, qp.c, qp.c, qp.l, qp.u, fmt)

    @property
    def n(self) -> int:
        return len(self.Qset[0])

    @property
    def fixed_bounds(self) -> bool:
        return self.l_min == self.l_max and self.u_min == self.u_max

    def grid(self, lo: Vector, hi: Vector, stride: int = 1) -> list[list[Fraction]]:
        """Per-coordinate grid points of ``[lo, hi]`` at the data precision."""
        s = self.data_fmt.scale
        axes = []
        for a, b in zip(lo, hi):
            ra, rb = int(a * s), int(b * s)
            pts = list(range(ra, rb + 1, stride))
            if pts[-1] != rb:
                pts.append(rb)
            axes.append([Fraction(r, s) for r in pts])
        return axes

    def c_realizations(self, stride: int = 1) -> Iterator[Vector]:
        return (tuple(c) for c in product(*self.grid(self.c_min, self.c_max, stride)))

    def box_realizations(self) -> Iterator[tuple[Vector, Vector]]:
        for l in product(*self.grid(self.l_min, self.l_max)):
            for u in product(*self.grid(self.u_min, self.u_max)):
                yield tuple(l), tuple(u)

    def count(self, stride: int = 1) -> int:
        def card(lo, hi, st):
            return int(np.prod([len(ax) for ax in self.grid(lo, hi, st)], dtype=object))
        return (len(self.Qset) * card(self.c_min, self.c_max, stride)
                * card(self.l_min, self.l_max, 1) * card(self.u_min, self.u_max, 1))

    def realization(self, qi: int, c, l, u) -> BoxQP:
        return BoxQP(self.Qset[qi], c, l, u, self.data_fmt)


@dataclass(frozen=True)
class Constants:
    L: Fraction
    sigma: Fraction
    tau: Fraction

    def __post_init__(self):
        if not (0 < self.sigma <= self.L):
            raise ValueError("require 0 < sigma <= L")
        if not (0 < self.tau <= 1 / self.L):
            raise ValueError("require 0 < tau <= 1/L")


def eigen_extrema(M) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a symmetric matrix (floating point)."""
    if not is_symmetric(M):
        raise NonSymmetric("eigen_extrema needs a symmetric matrix")
    A = np.array([[float(v) for v in row] for row in M], dtype=float)
    w = np.linalg.eigvalsh(A)
    return float(w[0]), float(w[-1])


def _shift_pd(M, s: Fraction, sign: int) -> bool:
    """Is ``sign*(M - s I)`` positive definite?"""
    n = len(M)
    A = [[sign * (Fraction(M[i][j]) - (s if i == j else 0)) for j in range(n)] for i in range(n)]
    return is_positive_definite(A)


def certified_extrema(M, exact_check_max_n: int = 48) -> tuple[Fraction, Fraction]:
    """Rational ``(sigma, L)`` with ``sigma <= lambda_min`` and ``L >= lambda_max``.

    Floating-point eigenvalues are widened by ``10 * eps * ||M||``; for small
    matrices the enclosure is then confirmed with exact elimination and the
    margin grown until it holds.
    """
    lo, hi = eigen_extrema(M)
    if lo <= 0:
        raise NotPositiveDefinite(f"smallest eigenvalue {lo:.3e} is not positive")
    scale = max(abs(lo), abs(hi))
    margin = 10 * sys.float_info.epsilon * scale
    n = len(M)
    for _ in range(60):
        sigma = Fraction(lo) - Fraction(margin)
        L = Fraction(hi) + Fraction(margin)
        if sigma <= 0:
            raise NotPositiveDefinite("matrix too close to singular to bound sigma > 0")
        if n > exact_check_max_n or (_shift_pd(M, sigma, 1) and _shift_pd(M, L, -1)):
            return sigma, L
        margin *= 4
    raise NotPositiveDefinite("could not certify eigenvalue enclosure")


def family_constants(fam: ProblemFamily) -> tuple[Fraction, Fraction]:
    """``(L, sigma)``: largest smoothness and smallest strong-convexity constants."""
    bounds = [certified_extrema(Q) for Q in fam.Qset]
    return max(b[1] for b in bounds), min(b[0] for b in bounds)


def step_size(L, fmt: FxFormat) -> Fraction:
    """Largest grid value ``tau`` with ``tau <= 1/L``."""
    L = Fraction(L)
    if L <= 0:
        raise ValueError("L must be positive")
    k = floor(Fraction(fmt.scale) / L)
    if k <= 0:
        raise Underflow(f"1/L = {float(1 / L):.3e} is below the resolution of {fmt}")
    if not fmt.fits(k):
        raise ValueError(f"1/L does not fit the integer bits of {fmt}")
    return Fraction(k, fmt.scale)


def constants(fam: ProblemFamily, fmt: FxFormat) -> Constants:
    L, sigma = family_constants(fam)
    return Constants(L, sigma, step_size(L, fmt))


def matvec_exact(Q, x) -> list[Fraction]:
    return [sum((Fraction(a) * b for a, b in zip(row, x)), Fraction(0)) for row in Q]


def grad(qp: BoxQP, x) -> list[Fraction]:
    if len(x) != qp.n:
        raise DimensionMismatch("x has the wrong dimension")
    return [g + ci for g, ci in zip(matvec_exact(qp.Q, x), qp.c)]


def f_value(qp: BoxQP, x) -> Fraction:
    if len(x) != qp.n:
        raise DimensionMismatch("x has the wrong dimension")
    Qx = matvec_exact(qp.Q, x)
    return sum((Fraction(xi) * (qxi / 2 + ci) for xi, qxi, ci in zip(x, Qx, qp.c)), Fraction(0))


# -- problem files ---------------------------------------------------------

def _raw(v: Sequence[Fraction], fmt: FxFormat) -> list[int]:
    out = []
    for x in v:
        s = Fraction(x) * fmt.scale
        if s.denominator != 1:
            raise ValueError(f"{x} is not on the {fmt} grid")
        out.append(s.numerator)
    return out


def _unraw(v, fmt: FxFormat) -> tuple[Fraction, ...]:
    return tuple(Fraction(int(r), fmt.scale) for r in v)


def problem_to_dict(fam: ProblemFamily, fmt: FxFormat, rounding: RoundingMode = RoundingMode.FLOOR) -> dict:
    d = fam.data_fmt
    out = {
        "format": {"p": fmt.p, "q": fmt.q, "p_prime": d.p, "q_prime": d.q,
                   "rounding": RoundingMode(rounding).value},
        "n": fam.n,
        "Q": [_raw(row, d) for row in fam.Qset[0]],
        "c_min": _raw(fam.c_min, d),
        "c_max": _raw(fam.c_max, d),
    }
    if fam.fixed_bounds:
        out["l"] = _raw(fam.l_min, d)
        out["u"] = _raw(fam.u_min, d)
    else:
        for name in ("l_min", "l_max", "u_min", "u_max"):
            out[name] = _raw(getattr(fam, name), d)
    if len(fam.Qset) > 1:
        out["Q_set"] = [[_raw(row, d) for row in Q] for Q in fam.Qset]
    if fam.meta:
        out["meta"] = fam.meta
    return out


def problem_from_dict(obj: dict) -> tuple[ProblemFamily, FxFormat, RoundingMode]:
    f = obj["format"]
    fmt = FxFormat(int(f["p"]), int(f["q"]))
    dfmt = FxFormat(int(f.get("p_prime", f["p"])), int(f.get("q_prime", f["q"])))
    rounding = RoundingMode(f.get("rounding", "floor"))
    if "Q_set" in obj:
        Qset = tuple(tuple(_unraw(row, dfmt) for row in Q) for Q in obj["Q_set"])
    else:
        Qset = (tuple(_unraw(row, dfmt) for row in obj["Q"]),)
    if "l" in obj:
        l_min = l_max = _unraw(obj["l"], dfmt)
        u_min = u_max = _unraw(obj["u"], dfmt)
    else:
        l_min, l_max = _unraw(obj["l_min"], dfmt), _unraw(obj["l_max"], dfmt)
        u_min, u_max = _unraw(obj["u_min"], dfmt), _unraw(obj["u_max"], dfmt)
    fam = ProblemFamily(Qset, _unraw(obj["c_min"], dfmt), _unraw(obj["c_max"], dfmt),
                        l_min, l_max, u_min, u_max, dfmt, obj.get("meta", {}))
    return fam, fmt, rounding


def save_problem(path, fam: ProblemFamily, fmt: FxFormat, rounding=RoundingMode.FLOOR) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(fam, fmt, rounding), indent=1) + "\n")


def load_problem(path) -> tuple[ProblemFamily, FxFormat, RoundingMode]:
    return problem_from_dict(json.loads(Path(path).read_text()))
