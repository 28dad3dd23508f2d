from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracle import rnd
from fxpgm import fixedpoint as fx
from fxpgm.errors import FxOverflow
from fxpgm.fixedpoint import FxFormat, FxValue, RoundingMode

MODES = list(RoundingMode)


@pytest.mark.parametrize("x, mode, raw", [
    (F(-5, 8), RoundingMode.FLOOR, -3),
    (F(-5, 8), RoundingMode.TOWARD_ZERO, -2),
    (F(-5, 8), RoundingMode.NEAREST, -2),   # -2.5 rounds half up
    (F(5, 8), RoundingMode.NEAREST, 3),
    (F(3, 4), RoundingMode.FLOOR, 3),
    (F(1, 3), RoundingMode.FLOOR, 1),
    (F(-1, 3), RoundingMode.TOWARD_ZERO, -1),
])
def test_quantize_known_values(x, mode, raw):
    assert fx.quantize(x, FxFormat(2, 2), mode).raw == raw


def test_overflow_boundary():
    fmt = FxFormat(1, 2)
    assert FxValue(7, fmt).value == F(7, 4)
    assert FxValue(-7, fmt).value == F(-7, 4)
    with pytest.raises(FxOverflow):
        FxValue(8, fmt)
    with pytest.raises(FxOverflow):
        FxValue(-8, fmt)
    with pytest.raises(FxOverflow):
        fx.add(fx.track(F(3, 2), fmt), fx.track(F(1, 2), fmt))


def test_zero_integer_bits():
    fmt = FxFormat(0, 4)
    assert fx.quantize(F(15, 16), fmt).raw == 15
    with pytest.raises(FxOverflow):
        fx.quantize(1, fmt)


def test_format_parse_and_text():
    assert FxFormat.parse("p8.q8") == FxFormat.parse("8.8") == FxFormat(8, 8)
    with pytest.raises(ValueError):
        FxFormat.parse("8q8")
    with pytest.raises(ValueError):
        FxFormat(40, 40)
    v = FxValue(-13, FxFormat(3, 5))
    assert fx.parse_fx(fx.format_fx(v)) == v


def test_mixed_formats_rejected():
    with pytest.raises(ValueError):
        fx.add(fx.track(1, FxFormat(4, 4)), fx.track(1, FxFormat(4, 5)))


def test_shadow_tracks_exact_value():
    fmt = FxFormat(4, 4)
    a, b = fx.track(F(1, 3), fmt), fx.track(F(5, 7), fmt)
    p = fx.mul(a, b)
    assert p.shadow == a.value * b.value
    assert p.err == p.shadow - p.value
    assert 0 <= p.err < fmt.ulp   # floor


def test_clamp_is_exact():
    fmt = FxFormat(4, 4)
    x = fx.track(F(37, 16), fmt)
    lo, hi = fx.fx_exact(-1, fmt), fx.fx_exact(2, fmt)
    c = fx.clamp(x, lo, hi)
    assert c.value == 2 and c.shadow == 2 and c.err == 0


rationals = st.fractions(min_value=-40, max_value=40, max_denominator=1000)


@settings(max_examples=300, deadline=None)
@given(rationals, st.integers(0, 12), st.sampled_from(MODES))
def test_quantize_matches_oracle(x, q, mode):
    fmt = FxFormat(6, q)
    assert fx.quantize(x, fmt, mode).raw == rnd(x * 2 ** q, mode.value)


@settings(max_examples=300, deadline=None)
@given(st.integers(-(2 ** 40), 2 ** 40), st.integers(0, 20), st.sampled_from(MODES))
def test_round_shift_matches_fraction(num, shift, mode):
    assert fx.round_shift(num, shift, mode) == rnd(F(num, 2 ** shift), mode.value)


@settings(max_examples=300, deadline=None)
@given(rationals, st.integers(0, 10), st.sampled_from(MODES))
def test_quantization_error_interval(x, q, mode):
    e = x - fx.quantize(x, FxFormat(6, q), mode).value
    u = F(1, 2 ** q)
    if mode is RoundingMode.FLOOR:
        assert 0 <= e < u
    elif mode is RoundingMode.NEAREST:
        assert -u / 2 <= e < u / 2   # ties round up
    else:
        assert abs(e) < u and (e == 0 or (e > 0) == (x > 0))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(rationals, rationals), min_size=1, max_size=5), st.sampled_from(MODES))
def test_dot_rounds_each_product_once(pairs, mode):
    fmt = FxFormat(16, 6)
    a = [fx.track(x, fmt, mode) for x, _ in pairs]
    b = [fx.track(y, fmt, mode) for _, y in pairs]
    d = fx.dot(a, b, mode)
    want = sum(F(rnd(s.value * t.value * 64, mode.value), 64) for s, t in zip(a, b))
    assert d.value == want
    assert d.shadow == sum(s.value * t.value for s, t in zip(a, b))


@settings(max_examples=200, deadline=None)
@given(rationals, st.integers(0, 10), st.integers(0, 10), st.sampled_from(MODES))
def test_convert_widening_is_exact(x, q1, q2, mode):
    lo, hi = min(q1, q2), max(q1, q2)
    t = fx.track(x, FxFormat(6, lo), mode)
    w = fx.convert(t, FxFormat(6, hi), mode)
    assert w.value == t.value and w.shadow == t.shadow


# worked examples with hand-computed results

P88 = FxFormat(8, 8)


def _t(value, shadow, fmt=P88):
    return fx.Tracked(fx.fx_exact(value, fmt), F(shadow))


def test_quantize_examples():
    assert fx.quantize(F(3, 2), P88).raw == 384
    assert fx.quantize(F(1, 2 ** 9), P88).raw == 0
    assert fx.quantize(F(-1, 2 ** 9), P88).raw == -1


def test_add_examples():
    s = fx.add(fx.track(F(1, 2), P88), fx.track(F(1, 4), P88))
    assert s.value == F(3, 4) and s.err == 0
    assert fx.add(fx.track(F(7, 4), FxFormat(2, 8)), fx.track(F(7, 4), FxFormat(2, 8))).value == F(7, 2)
    with pytest.raises(FxOverflow):
        fx.add(fx.track(F(7, 4), FxFormat(1, 8)), fx.track(F(7, 4), FxFormat(1, 8)))
    a = _t(F(1, 2), F(1, 2) + F(1, 2 ** 10))
    b = _t(F(1, 4), F(1, 4) - F(1, 2 ** 10))
    assert fx.add(a, b).err == 0


def test_mul_examples():
    a = fx.track(F(22, 256), P88)
    p = fx.mul(a, a)
    assert p.value == F(1, 256) and p.err == F(228, 65536) == F("0.00347900390625")
    x = _t(F(3, 8), F(3, 8) + F(1, 1000))
    one = fx.track(1, P88)
    assert fx.mul(x, one).value == x.value and fx.mul(x, one).err == x.err
    z = fx.mul(fx.track(0, P88), fx.track(F(5, 16), P88))
    assert z.value == 0 and z.err == 0


def test_clamp_examples():
    fmt = FxFormat(2, 10)
    lo, hi = fx.fx_exact(-1, fmt), fx.fx_exact(1, fmt)
    sat = fx.clamp(_t(F(1229, 1024), F("1.2001"), fmt), lo, hi)
    assert sat.value == 1 and sat.shadow == 1 and sat.err == 0
    inner = _t(F(1, 4), F(1, 4), fmt)
    assert fx.clamp(inner, lo, hi) == inner
    edge = fx.clamp(_t(F(1023, 1024), F("1.001"), fmt), lo, hi)
    assert edge.value == F(1023, 1024) and edge.shadow == 1 and edge.err == F(1, 1024)


def test_dot_examples():
    a = [fx.track(F(22, 256), P88)] * 20
    r = fx.dot(a, a)
    assert r.err == 20 * F(228, 65536) == F("0.069580078125")
    assert r.err <= 20 * P88.ulp == F("0.078125")
    z = fx.dot(a, [fx.track(0, P88)] * 20)
    assert z.value == 0 and z.err == 0


def test_matvec_examples():
    eye = [[fx.fx_exact(int(i == j), P88) for j in range(3)] for i in range(3)]
    x = fx.track_vector([F(1, 2), F(-3, 4), F(5, 256)], P88)
    assert fx.matvec(eye, x) == x
    r = fx.matvec([[fx.fx_exact(F(1, 256), P88)]], [fx.track(F(1, 256), P88)])
    assert r[0].value == 0 and r[0].err == F(1, 2 ** 16)
    M = [[fx.fx_exact(F(5, 4), P88), fx.fx_exact(F(3, 8), P88)],
         [fx.fx_exact(F(3, 8), P88), fx.fx_exact(F(7, 8), P88)]]
    c = [fx.fx_exact(F(1, 4), P88), fx.fx_exact(F(-1, 2), P88)]
    r = fx.matvec(M, fx.track_vector([0, 0], P88), offset=c)
    assert [t.value for t in r] == [F(1, 4), F(-1, 2)] and all(t.err == 0 for t in r)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 2 ** 9), min_size=1, max_size=25))
def test_floor_dot_error_between_zero_and_m_ulp(raws):
    a = [fx.exact_tracked(FxValue(r, P88)) for r in raws]
    e = fx.dot(a, a).err
    assert 0 <= e <= len(a) * P88.ulp
