import math

import mpmath
import pytest
from hypothesis import given, strategies as st

from rdmodes.precision import DOUBLE_DIGITS, STANDARD_DIGITS, NumericContext


def test_standard_digits():
    assert STANDARD_DIGITS == (16, 32, 100)
    assert DOUBLE_DIGITS == 16


def test_double_context_uses_floats(ctx16):
    assert ctx16.is_double
    assert isinstance(ctx16.num("0.1"), float)
    assert ctx16.eps == 2.220446049250313e-16
    assert ctx16.pi == math.pi


def test_extended_context_keeps_digits(ctx32):
    assert not ctx32.is_double
    tenth = ctx32.num("0.1")
    # 0.1 at 32 digits is not the double rounding of 0.1
    assert abs(tenth - 0.1) > 0
    with mpmath.workdps(40):
        assert abs(tenth - mpmath.mpf(1) / 10) < mpmath.mpf("1e-31")


def test_contexts_are_independent():
    a = NumericContext(32)
    b = NumericContext(100)
    assert a.eps > b.eps
    # arithmetic in one context must not change the other's precision
    _ = b.exp(b.num(1))
    assert float(a.num(1) / 3) == pytest.approx(1 / 3)


def test_digit_validation():
    with pytest.raises(ValueError):
        NumericContext(0)


def test_tol_shift(ctx16, ctx32):
    assert ctx16.tol() == 1e-16
    assert ctx16.tol(4) == 1e-12
    assert float(ctx32.tol(6)) == pytest.approx(1e-26)


def test_exp_overflow_saturates(ctx16):
    assert ctx16.exp(1e4) == math.inf
    assert ctx16.exp(-1e4) == 0.0


def test_log1p_expm1_keep_tiny_arguments(ctx16, ctx32):
    assert ctx16.log1p(1e-300) == 1e-300
    assert ctx16.expm1(1e-300) == 1e-300
    tiny = ctx32.num("1e-60")
    assert abs(ctx32.log1p(tiny) - tiny) < ctx32.num("1e-110")
    assert abs(ctx32.expm1(tiny) - tiny) < ctx32.num("1e-110")
    assert ctx16.expm1(0.0) == 0.0 and ctx16.log1p(0.0) == 0.0


def test_csqrt_negative(ctx16, ctx32):
    z = ctx16.csqrt(-4)
    assert z.real == 0 and z.imag == 2
    w = ctx32.csqrt(ctx32.num(-4))
    assert abs(w.imag - 2) < 1e-30


def test_isfinite(ctx16, ctx32):
    assert ctx16.isfinite(1.0)
    assert not ctx16.isfinite(math.inf)
    assert ctx32.isfinite(ctx32.num(1))
    assert not ctx32.isfinite(ctx32.num("inf"))


@given(st.floats(min_value=1e-6, max_value=1e6))
def test_exp_log_round_trip(x):
    ctx = NumericContext(16)
    assert math.isclose(ctx.exp(ctx.log(x)), x, rel_tol=1e-13)


@given(st.floats(min_value=-30, max_value=30))
def test_extended_exp_matches_double(x):
    ctx = NumericContext(32)
    assert math.isclose(float(ctx.exp(ctx.num(x))), math.exp(x), rel_tol=1e-14)
