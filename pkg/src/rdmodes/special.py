"""Dilogarithm on [0, 1] at context precision.

The decay-bound integrals in this package reduce to differences of
``dilog`` values, so only the unit interval matters here.  The series
converges fast for arguments up to one half; above that the Euler
reflection identity maps back into the fast region, and the endpoint
``x = 1`` is returned in closed form to avoid log(0).
"""
from __future__ import annotations

from .precision import NumericContext


class DomainError(ValueError):
    """Argument outside the supported domain."""


def dilog(ctx: NumericContext, x):
    """Sum_{k>=1} x**k / k**2 for 0 <= x <= 1.

    Raises DomainError outside [0, 1].  Relative accuracy is a few ulps
    short of the working precision (the reflection branch loses a little
    to the log product near the upper endpoint).
    """
    x = ctx.num(x)
    if x < 0 or x > 1:
        raise DomainError(f"dilog defined here on [0, 1], got {float(x)}")
    if x == 0:
        return ctx.num(0)
    pi2_6 = ctx.pi * ctx.pi / 6
    if x == 1:
        return pi2_6
    half = ctx.num(1) / 2
    if x <= half:
        return _dilog_series(ctx, x)
    y = 1 - x
    if y == 0:
        return pi2_6
    return pi2_6 - ctx.log(x) * ctx.log(y) - _dilog_series(ctx, y)


def _dilog_series(ctx, x):
    # x <= 1/2 so each term shrinks by at least half; the loop bound is a
    # generous backstop, not the expected exit.
    total = ctx.num(0)
    power = ctx.num(1)
    cutoff = ctx.eps / 4
    for k in range(1, 40 * ctx.digits + 40):
        power *= x
        term = power / (k * k)
        total += term
        if term < cutoff * total:
            return total
    return total
