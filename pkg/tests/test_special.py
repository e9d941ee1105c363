import math

import pytest
from hypothesis import given, strategies as st

from rdmodes.precision import NumericContext
from rdmodes.special import DomainError, dilog


def _series_oracle(x, terms=4000):
    total = 0.0
    power = 1.0
    for k in range(1, terms + 1):
        power *= x
        total += power / (k * k)
    return total


def test_endpoints(ctx16):
    assert dilog(ctx16, 0.0) == 0.0
    assert dilog(ctx16, 1.0) == pytest.approx(math.pi**2 / 6, rel=1e-15)


def test_half_closed_form(ctx16):
    # dilog(1/2) = pi^2/12 - log(2)^2 / 2
    expected = math.pi**2 / 12 - math.log(2) ** 2 / 2
    assert dilog(ctx16, 0.5) == pytest.approx(expected, rel=1e-14)


@pytest.mark.parametrize("x", [0.05, 0.3, 0.5, 0.7, 0.9, 0.99])
def test_against_series_oracle(ctx16, x):
    assert dilog(ctx16, x) == pytest.approx(_series_oracle(x), rel=1e-12)


def test_extended_precision_half():
    ctx = NumericContext(50)
    value = dilog(ctx, ctx.num(1) / 2)
    expected = ctx.pi**2 / 12 - ctx.log(ctx.num(2)) ** 2 / 2
    assert abs(value - expected) < ctx.num("1e-47")


def test_domain_errors(ctx16):
    with pytest.raises(DomainError):
        dilog(ctx16, -0.1)
    with pytest.raises(DomainError):
        dilog(ctx16, 1.1)


@given(st.floats(min_value=0.0, max_value=0.999))
def test_monotone(x):
    ctx = NumericContext(16)
    assert dilog(ctx, x) <= dilog(ctx, x + 0.001) + 1e-15
