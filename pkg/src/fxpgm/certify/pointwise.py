"""Single-point evaluation through the Tracked arithmetic (the replay path)."""
from __future__ import annotations

from fractions import Fraction

from ..fixedpoint import FxFormat, RoundingMode
from ..pgm import FixedProblem, fixed_step, grid_point, to_fixed
from ..qp import BoxQP, ProblemFamily
from ..rational import norm2
from .types import Which, Witness


def step_quantities(fp: FixedProblem, x_raw) -> dict:
    """Every asserted quantity of one step from ``x_raw``, via shadows."""
    st = fixed_step(fp, grid_point(x_raw, fp.fmt))
    x = [t.value for t in st.x]
    xn = [t.value for t in st.x_next]
    tx = [t.shadow for t in st.x_next]
    return {
        "d2_raw": st.d2.raw,
        "omega_sq": norm2(t.err for t in st.g),
        "delta_sq": norm2(a - b for a, b in zip(x, tx)),
        "omega_small_sq": norm2(t.err for t in st.x_next),
        "theta_sq": norm2(a - b for a, b in zip(x, xn)),
        "d2_exact": st.d2.shadow,
    }


def fixed_problem(fam: ProblemFamily, q_index: int, c, l, u, fmt: FxFormat, tau,
                  mode: RoundingMode) -> FixedProblem:
    qp = BoxQP(fam.Qset[q_index], c, l, u, fam.data_fmt)
    return to_fixed(qp, fmt, tau, mode)


def replay(w: Witness, fam: ProblemFamily, tau, mode: RoundingMode = RoundingMode.FLOOR,
           eps_hat: Fraction | None = None) -> tuple[Fraction | None, bool]:
    """Re-run a witness bit-exactly.

    Returns ``(value, in_scope)``: the offending quantity recomputed through
    :mod:`fxpgm.fixedpoint`, and whether the point satisfies the exit-test
    condition of the query.  Overflow witnesses re-raise ``FxOverflow``.
    """
    fp = fixed_problem(fam, w.q_index, w.c, w.l, w.u, w.fmt, tau, mode)
    vals = step_quantities(fp, w.x_raw)
    if w.which is Which.OVERFLOW:
        return None, True
    e_raw = None if eps_hat is None else int(Fraction(eps_hat) * w.fmt.scale)
    return vals[w.which.quantity], w.which.selects(vals["d2_raw"], e_raw)
