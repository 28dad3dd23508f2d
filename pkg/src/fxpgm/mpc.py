"""Condensed box-QP families from linear MPC problems.

The MPC cost over prediction horizon ``N_p`` with move blocking after ``N_c``
inputs is

    sum_{i<N_p} |x_i - x_r|^2_{W_x} + |u_i - u_r|^2_{W_u} + |x_{N_p} - x_r|^2_P

with ``x_{i+1} = A x_i + B u_i``.  Eliminating the states leaves a QP in the
stacked free inputs ``z``.  ``objective_scale`` multiplies the cost before it
is written as ``1/2 z'Qz + c'z + const``: with scale 1 the matrix ``Q`` is
twice the quadratic-form matrix, with scale 1/2 it equals it.

All condensation arithmetic is exact over the rationals: floating-point model
matrices are converted to fractions without rounding first.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import ceil, floor
from typing import Sequence

import numpy as np
import scipy.linalg

from .errors import DimensionMismatch, Divergence, FxOverflow, NotPositiveDefinite
from .fixedpoint import FxFormat, RoundingMode, quantize
from .qp import ProblemFamily, is_positive_definite

FMatrix = list[list[Fraction]]


def _fmat(M) -> FMatrix:
    return [[Fraction(v) for v in row] for row in np.atleast_2d(np.asarray(M, dtype=object))]


def _mul(A: FMatrix, B: FMatrix) -> FMatrix:
    Bt = list(zip(*B))
    return [[sum((a * b for a, b in zip(row, col)), Fraction(0)) for col in Bt] for row in A]


def _add(A: FMatrix, B: FMatrix) -> FMatrix:
    return [[a + b for a, b in zip(r, s)] for r, s in zip(A, B)]


def _scale(k, A: FMatrix) -> FMatrix:
    return [[k * a for a in row] for row in A]


def _T(A: FMatrix) -> FMatrix:
    return [list(col) for col in zip(*A)]


def _zeros(r: int, c: int) -> FMatrix:
    return [[Fraction(0)] * c for _ in range(r)]


def _eye(n: int) -> FMatrix:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def _mv(A: FMatrix, x) -> list[Fraction]:
    return [sum((a * Fraction(b) for a, b in zip(row, x)), Fraction(0)) for row in A]


def _quad(W: FMatrix, v) -> Fraction:
    return sum((a * b for a, b in zip(v, _mv(W, v))), Fraction(0))


@dataclass(frozen=True)
class LtiModel:
    A: np.ndarray
    B: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.atleast_2d(np.asarray(self.B, dtype=float))
        if A.shape[0] != A.shape[1] or B.shape[0] != A.shape[0]:
            raise DimensionMismatch(f"A {A.shape} and B {B.shape} do not conform")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def n_u(self) -> int:
        return self.B.shape[1]


def _pd(M: np.ndarray) -> bool:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    return bool(np.allclose(M, M.T)) and bool(np.all(np.linalg.eigvalsh((M + M.T) / 2) > 0))


@dataclass
class MpcParams:
    N_p: int
    N_c: int
    W_x: np.ndarray
    W_u: np.ndarray
    u_min: Sequence[float]
    u_max: Sequence[float]
    P: np.ndarray | None = None        # None: solve the DARE
    state_box: tuple | None = None     # (lo, hi) for the current state
    ref_box: tuple | None = None       # (lo, hi) for (x_r, u_r) stacked
    objective_scale: Fraction = Fraction(1)

    def __post_init__(self):
        if not self.N_p >= self.N_c >= 1:
            raise ValueError("need N_p >= N_c >= 1")
        self.W_x = np.atleast_2d(np.asarray(self.W_x, dtype=float))
        self.W_u = np.atleast_2d(np.asarray(self.W_u, dtype=float))
        if self.P is not None:
            self.P = np.atleast_2d(np.asarray(self.P, dtype=float))
        for name in ("W_x", "W_u", "P"):
            M = getattr(self, name)
            if M is not None and not _pd(M):
                raise NotPositiveDefinite(f"{name} is not symmetric positive definite")
        if any(a > b for a, b in zip(self.u_min, self.u_max)):
            raise ValueError("need u_min <= u_max")
        self.objective_scale = Fraction(self.objective_scale)
        if self.objective_scale <= 0:
            raise ValueError("objective_scale must be positive")


def dare_terminal(A, B, W_x, W_u, tol: float = 1e-12, max_iter: int = 100_000) -> np.ndarray:
    """Riccati recursion from ``P = W_x`` until successive iterates agree to ``tol``."""
    A, B = np.atleast_2d(np.asarray(A, float)), np.atleast_2d(np.asarray(B, float))
    W_x, W_u = np.atleast_2d(np.asarray(W_x, float)), np.atleast_2d(np.asarray(W_u, float))
    P = W_x.copy()
    for _ in range(max_iter):
        BtP = B.T @ P
        K = np.linalg.solve(W_u + BtP @ B, BtP @ A)
        Pn = A.T @ P @ A - A.T @ P @ B @ K + W_x
        Pn = (Pn + Pn.T) / 2
        if not np.all(np.isfinite(Pn)):
            raise Divergence("Riccati recursion produced non-finite values")
        if np.max(np.abs(Pn - P)) <= tol:
            return Pn
        P = Pn
    raise Divergence(f"Riccati recursion did not settle within {max_iter} iterations")


def three_mass_spring(ts: float = 0.2, method: str = "zoh", walls: bool = False) -> LtiModel:
    """Three unit masses joined by unit springs, forces acting on the outer masses.

    State is (positions, velocities).  With ``walls`` the outer masses are also
    tied to fixed walls by unit springs.
    """
    if ts <= 0:
        raise ValueError("sample time must be positive")
    K = np.array([[-1.0, 1, 0], [1, -2, 1], [0, 1, -1]])
    if walls:
        K -= np.diag([1.0, 0, 1])
    Ac = np.block([[np.zeros((3, 3)), np.eye(3)], [K, np.zeros((3, 3))]])
    Bc = np.zeros((6, 2))
    Bc[3, 0] = Bc[5, 1] = 1.0
    return discretize(Ac, Bc, ts, method)


def discretize(Ac, Bc, ts: float, method: str = "zoh") -> LtiModel:
    Ac, Bc = np.atleast_2d(np.asarray(Ac, float)), np.atleast_2d(np.asarray(Bc, float))
    nx, nu = Bc.shape
    if method.lower() == "zoh":
        M = np.zeros((nx + nu, nx + nu))
        M[:nx, :nx], M[:nx, nx:] = Ac, Bc
        E = scipy.linalg.expm(M * ts)
        return LtiModel(E[:nx, :nx], E[:nx, nx:])
    if method.lower() in ("euler", "forwardeuler", "forward-euler"):
        return LtiModel(np.eye(nx) + ts * Ac, ts * Bc)
    raise ValueError(f"unknown discretization {method!r}")


@dataclass
class CondensedMap:
    """Affine map ``c = G_x x0 + G_r x_r + G_u u_r`` (objective scale included)."""

    G_x: FMatrix
    G_r: FMatrix
    G_u: FMatrix

    def __call__(self, x0, x_r, u_r) -> list[Fraction]:
        return [a + b + c for a, b, c in zip(_mv(self.G_x, x0), _mv(self.G_r, x_r), _mv(self.G_u, u_r))]

    @property
    def blocks(self) -> list[FMatrix]:
        return [self.G_x, self.G_r, self.G_u]


@dataclass
class Condensed:
    Q: FMatrix
    c_map: CondensedMap
    l: list[Fraction]
    u: list[Fraction]
    data: dict = field(default_factory=dict)  # exact A, B, P, W used


def _exact_data(model: LtiModel, params: MpcParams) -> dict:
    P = params.P if params.P is not None else dare_terminal(model.A, model.B, params.W_x, params.W_u)
    return {"A": _fmat(model.A), "B": _fmat(model.B), "W_x": _fmat(params.W_x),
            "W_u": _fmat(params.W_u), "P": _fmat(P)}


def _selector(i: int, N_c: int, n_u: int) -> FMatrix:
    E = _zeros(n_u, n_u * N_c)
    b = min(i, N_c - 1)
    for k in range(n_u):
        E[k][b * n_u + k] = Fraction(1)
    return E


def condense(model: LtiModel, params: MpcParams) -> Condensed:
    nx, nu = model.n_x, model.n_u
    if params.W_x.shape != (nx, nx) or params.W_u.shape != (nu, nu):
        raise DimensionMismatch("weights do not match the model dimensions")
    if params.P is not None and params.P.shape != (nx, nx):
        raise DimensionMismatch("P does not match the model dimensions")
    if len(params.u_min) != nu or len(params.u_max) != nu:
        raise DimensionMismatch("input bounds do not match n_u")
    d = _exact_data(model, params)
    A, B, Wx, Wu, P = d["A"], d["B"], d["W_x"], d["W_u"], d["P"]
    n = nu * params.N_c
    H = _zeros(n, n)
    Gx, Gr, Gu = _zeros(n, nx), _zeros(n, nx), _zeros(n, nu)
    S = _zeros(nx, n)   # x_i = A^i x0 + S z
    Ai = _eye(nx)       # A^i
    for i in range(params.N_p + 1):
        W = P if i == params.N_p else Wx
        StW = _mul(_T(S), W)
        H = _add(H, _mul(StW, S))
        Gx = _add(Gx, _scale(2, _mul(StW, Ai)))
        Gr = _add(Gr, _scale(-2, StW))
        if i == params.N_p:
            break
        E = _selector(i, params.N_c, nu)
        EtWu = _mul(_T(E), Wu)
        H = _add(H, _mul(EtWu, E))
        Gu = _add(Gu, _scale(-2, EtWu))
        S = _add(_mul(A, S), _mul(B, E))
        Ai = _mul(A, Ai)
    k = params.objective_scale
    Q = _scale(2 * k, H)
    cmap = CondensedMap(_scale(k, Gx), _scale(k, Gr), _scale(k, Gu))
    l = [Fraction(v) for v in params.u_min] * params.N_c
    u = [Fraction(v) for v in params.u_max] * params.N_c
    return Condensed(Q, cmap, l, u, d)


def rollout_cost(cond: Condensed, params: MpcParams, z, x0, x_r, u_r) -> Fraction:
    """Scaled MPC cost of input sequence ``z`` by simulating the dynamics."""
    A, B, Wx, Wu, P = (cond.data[k] for k in ("A", "B", "W_x", "W_u", "P"))
    nu = len(Wu)
    x = [Fraction(v) for v in x0]
    xr = [Fraction(v) for v in x_r]
    ur = [Fraction(v) for v in u_r]
    total = Fraction(0)
    for i in range(params.N_p):
        b = min(i, params.N_c - 1)
        ui = [Fraction(v) for v in z[b * nu:(b + 1) * nu]]
        total += _quad(Wx, [a - r for a, r in zip(x, xr)]) + _quad(Wu, [a - r for a, r in zip(ui, ur)])
        x = [p + q for p, q in zip(_mv(A, x), _mv(B, ui))]
    total += _quad(P, [a - r for a, r in zip(x, xr)])
    return params.objective_scale * total


def condensed_value(cond: Condensed, z, x0, x_r, u_r, const: Fraction = Fraction(0)) -> Fraction:
    z = [Fraction(v) for v in z]
    c = cond.c_map(x0, x_r, u_r)
    return _quad(cond.Q, z) / 2 + sum((a * b for a, b in zip(c, z)), Fraction(0)) + const


def c_range(cond: Condensed, state_box, ref_box) -> tuple[list[Fraction], list[Fraction]]:
    """Exact componentwise image of the affine ``c`` map over the boxes.

    ``ref_box`` bounds ``(x_r, u_r)`` stacked; degenerate intervals fix them.
    """
    lo = [Fraction(v) for v in state_box[0]] + [Fraction(v) for v in ref_box[0]]
    hi = [Fraction(v) for v in state_box[1]] + [Fraction(v) for v in ref_box[1]]
    G = [a + b + c for a, b, c in zip(*cond.c_map.blocks)]
    if len(G[0]) != len(lo):
        raise DimensionMismatch("boxes do not match the c map inputs")
    cmin, cmax = [], []
    for row in G:
        cmin.append(sum((g * (lo[j] if g > 0 else hi[j]) for j, g in enumerate(row)), Fraction(0)))
        cmax.append(sum((g * (hi[j] if g > 0 else lo[j]) for j, g in enumerate(row)), Fraction(0)))
    return cmin, cmax


def _q(x: Fraction, fmt: FxFormat, how) -> Fraction:
    raw = how(Fraction(x) * fmt.scale)
    if not fmt.fits(raw):
        raise FxOverflow(f"{float(x):.6g} does not fit {fmt}")
    return Fraction(raw, fmt.scale)


def quantize_problem(Q, l, u, c_min, c_max, fmt: FxFormat, **meta) -> ProblemFamily:
    """Store the QP data on the ``fmt`` grid.

    ``Q`` is rounded to nearest (symmetry is preserved entrywise), the ``c``
    range is rounded outward and the box inward, so every realization and
    every feasible point of the stored problem is also one of the original.
    """
    Qq = [[quantize(v, fmt, RoundingMode.NEAREST).value for v in row] for row in Q]
    for row in Qq:
        for v in row:
            if not fmt.fits(int(v * fmt.scale)):
                raise FxOverflow(f"Q entry {float(v):.6g} does not fit {fmt}")
    if not is_positive_definite(Qq):
        raise NotPositiveDefinite("quantized Q is not positive definite")
    cmin = [_q(v, fmt, floor) for v in c_min]
    cmax = [_q(v, fmt, ceil) for v in c_max]
    lq = [_q(v, fmt, ceil) for v in l]
    uq = [_q(v, fmt, floor) for v in u]
    meta = {"Q_rounding": "nearest", "c_rounding": "outward", "box_rounding": "inward", **meta}
    return ProblemFamily.fixed_box(Qq, cmin, cmax, lq, uq, fmt, **meta)


# full-scale case study settings and the published L, sigma
CASE_STUDY = {
    "ts": 0.2, "method": "zoh", "walls": True, "N_p": 5, "N_c": 2,
    "W_x": 0.5, "W_u": 0.25, "u_max": 0.5, "objective_scale": Fraction(1, 2),
    "position_bound": 0.5, "velocity_bound": 1.0,
}
REPORTED_L = Fraction("4.9645")
REPORTED_SIGMA = Fraction("0.3532")


def case_study(ts: float | None = None, method: str | None = None, walls: bool | None = None,
               objective_scale=None) -> tuple[LtiModel, MpcParams]:
    cs = CASE_STUDY
    model = three_mass_spring(cs["ts"] if ts is None else ts, method or cs["method"],
                              cs["walls"] if walls is None else walls)
    pos, vel, um = cs["position_bound"], cs["velocity_bound"], cs["u_max"]
    x_hi = [pos] * 3 + [vel] * 3
    x_lo = [-v for v in x_hi]
    params = MpcParams(
        N_p=cs["N_p"], N_c=cs["N_c"], W_x=cs["W_x"] * np.eye(6), W_u=cs["W_u"] * np.eye(2),
        u_min=[-um, -um], u_max=[um, um],
        state_box=(x_lo, x_hi), ref_box=(x_lo + [-um, -um], x_hi + [um, um]),
        objective_scale=cs["objective_scale"] if objective_scale is None else objective_scale)
    return model, params


def build_family(model: LtiModel, params: MpcParams, fmt: FxFormat, **meta) -> tuple[ProblemFamily, Condensed]:
    cond = condense(model, params)
    nx, nu = model.n_x, model.n_u
    sbox = params.state_box or ([-1.0] * nx, [1.0] * nx)
    rbox = params.ref_box or (list(sbox[0]) + list(params.u_min), list(sbox[1]) + list(params.u_max))
    cmin, cmax = c_range(cond, sbox, rbox)
    fam = quantize_problem(cond.Q, cond.l, cond.u, cmin, cmax, fmt,
                           N_p=params.N_p, N_c=params.N_c, n_u=nu,
                           objective_scale=str(params.objective_scale), **meta)
    return fam, cond
