import math
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fxpgm.errors import InvalidRange, PreconditionViolated
from fxpgm.fixedpoint import FxFormat
from fxpgm.guarantee import (Certificate, assemble_certificate, bound_D, contraction_C, exit_bounds,
                             kmax_exact, kmax_fixed, kmax_mode_bounds, min_eps, smallest_power)
from fxpgm.qp import ProblemFamily

TAU = F(422429, 2 ** 21)
SIGMA, L = F("0.3532"), F("4.9645")
OMEGA, EPS = F("1.711e-6"), F("6.8949e-4")


def test_kmax_exact_examples():
    assert kmax_exact(EPS ** 2 / 4, 1, TAU, SIGMA) == 217
    assert kmax_exact(1, 1, F(1, 2), 1) == 0
    assert kmax_exact(F(1, 4), 1, F(1, 2), 1) == 2
    with pytest.raises(InvalidRange):
        kmax_exact(2, 1, F(1, 2), 1)


def test_contraction_examples():
    assert contraction_C(TAU, SIGMA, 0, EPS) == 1 - TAU * SIGMA
    assert f"{float(contraction_C(TAU, SIGMA, OMEGA, EPS)):.5f}" == "0.93817"
    with pytest.raises(PreconditionViolated):
        contraction_C(TAU, SIGMA, OMEGA, min_eps(TAU, SIGMA, OMEGA))


def test_kmax_fixed_examples():
    C = contraction_C(TAU, SIGMA, OMEGA, EPS)
    assert kmax_fixed(C, 1, EPS) == 250
    assert kmax_fixed(F(1, 2), 1, 2) == 0
    assert kmax_fixed(F(1, 2), 1, F(2, 2 ** 5)) == 10
    with pytest.raises(InvalidRange):
        kmax_fixed(F(1, 2), 1, 3)


def test_exit_bounds_examples():
    assert exit_bounds(0, 0, 0, 0, TAU, L, SIGMA) == (0, 0)
    assert exit_bounds(1, 1, 1, 1, 1, 1, 1) == (3, F(13, 2))
    dist, fgap = exit_bounds(F("1.383e-3"), OMEGA, F("1.381e-3"), OMEGA, TAU, L, SIGMA)
    assert abs(dist - F("0.0389")) <= F("5e-4")
    assert abs(fgap - F("2.7165e-4")) <= F("5e-7")


def test_kmax_mode_examples():
    assert kmax_mode_bounds(EPS, 0, TAU) == (EPS / 2, EPS ** 2 / (8 * TAU))
    assert kmax_mode_bounds(4 * OMEGA, OMEGA, TAU)[1] == 0
    dist, _ = kmax_mode_bounds(EPS, OMEGA, TAU)
    assert f"{float(dist):.4g}" == "0.0003447"
    with pytest.raises(InvalidRange):
        kmax_mode_bounds(OMEGA, OMEGA, TAU)


def test_bound_D_examples():
    box = [F(-1, 2)] * 4, [F(1, 2)] * 4
    Q = [[int(i == j) for j in range(4)] for i in range(4)]
    fam = ProblemFamily.fixed_box(Q, [0] * 4, [0] * 4, *box, FxFormat(2, 2))
    assert bound_D(fam, [[0] * 4]) == 1
    assert bound_D(fam, [box[0]]) == 4
    with pytest.raises(InvalidRange):
        bound_D(fam, [[1, 0, 0, 0]])
    with pytest.raises(InvalidRange):
        bound_D(fam, [])


def test_precondition_message_names_threshold():
    with pytest.raises(PreconditionViolated, match=r"9\.6198e-05.*increase q or eps"):
        assemble_certificate(fmt=FxFormat(10, 21), tau=TAU, L=L, sigma=SIGMA, Omega=OMEGA,
                             eps=F("9e-5"), eps_hat=F(1, 2 ** 21), delta=0, Theta=0)


def test_failed_check_blocks_assembly():
    with pytest.raises(PreconditionViolated):
        assemble_certificate(fmt=FxFormat(10, 21), tau=TAU, L=L, sigma=SIGMA, Omega=OMEGA, eps=EPS,
                             eps_hat=F(1, 2 ** 21), delta=0, Theta=0, checks={"overflow": "FAIL"})


def test_degenerate_omega_recovers_exact_rate():
    c = assemble_certificate(fmt=FxFormat(10, 21), tau=TAU, L=L, sigma=SIGMA, Omega=0, eps=EPS,
                             eps_hat=F(1, 2 ** 21), delta=0, Theta=0)
    assert c.C == 1 - TAU * SIGMA and c.k_max == c.k_exact and c.min_eps == 0


def test_certificate_roundtrip(tmp_path):
    c = assemble_certificate(fmt=FxFormat(10, 21), tau=TAU, L=L, sigma=SIGMA, Omega=OMEGA, eps=EPS,
                             eps_hat=F(1, 2 ** 21), delta=F("1.383e-3"), Theta=F("1.381e-3"),
                             D_inferred=True, provenance={"Omega": "table"})
    c.save(tmp_path / "c.json")
    back = Certificate.load(tmp_path / "c.json")
    assert back == c
    assert back.recompute() == c
    back.save(tmp_path / "d.json")
    assert (tmp_path / "c.json").read_bytes() == (tmp_path / "d.json").read_bytes()


@settings(max_examples=200, deadline=None)
@given(st.fractions(min_value=F(1, 100), max_value=F(99, 100), max_denominator=1000),
       st.fractions(min_value=F(1, 10 ** 6), max_value=1, max_denominator=10 ** 6))
def test_smallest_power_is_minimal(base, ratio):
    k = smallest_power(base, ratio)
    assert base ** k <= ratio
    assert k == 0 or base ** (k - 1) > ratio
    assert abs(k - max(0, math.ceil(math.log(ratio) / math.log(base)))) <= 1
