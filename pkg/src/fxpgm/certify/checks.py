"""Per-bound checks and witness files."""
from __future__ import annotations

import json
from fractions import Fraction
from pathlib import Path

from ..fixedpoint import FxFormat, RoundingMode
from ..qp import ProblemFamily
from .types import BoundQuery, Verdict, VerdictKind, Which, Witness

_EXIT = {"delta": Which.DELTA_SQ, "omega": Which.OMEGA_SMALL_SQ, "theta": Which.THETA_SQ}


def check_omega(fam: ProblemFamily, fmt: FxFormat, tau, omega_sq, backend,
                mode: RoundingMode = RoundingMode.FLOOR) -> Verdict:
    return backend.check(BoundQuery(Which.OMEGA_SQ, omega_sq, fam, fmt, tau, None, mode))


def check_assumption(fam: ProblemFamily, fmt: FxFormat, tau, eps_hat, eps_sq, backend,
                     mode: RoundingMode = RoundingMode.FLOOR) -> Verdict:
    return backend.check(BoundQuery(Which.ASSUMPTION, eps_sq, fam, fmt, tau, eps_hat, mode))


def check_exit_bound(fam: ProblemFamily, fmt: FxFormat, tau, eps_hat, which, b_sq, backend,
                     mode: RoundingMode = RoundingMode.FLOOR) -> Verdict:
    """``which`` is a :class:`Which` or one of ``"delta"``, ``"omega"``, ``"theta"``."""
    # Which is itself a str enum, so test for it first
    w = which if isinstance(which, Which) else _EXIT.get(which) or Which(which)
    if w not in _EXIT.values():
        raise ValueError(f"{w} is not an exit-conditioned bound")
    return backend.check(BoundQuery(w, b_sq, fam, fmt, tau, eps_hat, mode))


def data_fits(fam: ProblemFamily, fmt: FxFormat, tau) -> Witness | None:
    """A witness if some problem datum is not representable at ``fmt``."""
    lim = fmt.raw_limit
    s = fmt.scale

    def bad(v):
        return abs(Fraction(v) * s) >= lim

    for qi, Q in enumerate(fam.Qset):
        if any(bad(v) for row in Q for v in row):
            return Witness(Which.OVERFLOW, qi, tuple(fam.c_min), tuple(fam.l_min), tuple(fam.u_max),
                           (), fmt, note="Q entry not representable")
    for name, vec in (("c_min", fam.c_min), ("c_max", fam.c_max), ("l", fam.l_min), ("u", fam.u_max)):
        if any(bad(v) for v in vec):
            return Witness(Which.OVERFLOW, 0, tuple(fam.c_min), tuple(fam.l_min), tuple(fam.u_max),
                           (), fmt, note=f"{name} not representable")
    if bad(tau):
        return Witness(Which.OVERFLOW, 0, tuple(fam.c_min), tuple(fam.l_min), tuple(fam.u_max),
                       (), fmt, note="tau not representable")
    return None


def validate_integer_bits(fam: ProblemFamily, fmt: FxFormat, tau, eps_hat, backend,
                          mode: RoundingMode = RoundingMode.FLOOR) -> Verdict:
    """PASS iff one PGM step never leaves the ``p``-bit integer range.

    ``eps_hat`` only matters through the exit test, whose accumulation is
    always computed, so it is accepted for interface symmetry.
    """
    w = data_fits(fam, fmt, tau)
    if w is not None:
        return Verdict(VerdictKind.FAIL, w, "data-check", w.note)
    return backend.check(BoundQuery(Which.OVERFLOW, 0, fam, fmt, tau, None, mode))


def save_witness(path, w: Witness, data_fmt: FxFormat) -> None:
    Path(path).write_text(json.dumps(w.to_dict(data_fmt), indent=2) + "\n")


def load_witness(path) -> Witness:
    return Witness.from_dict(json.loads(Path(path).read_text()))
