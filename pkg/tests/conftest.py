import math

import pytest

from rdmodes.precision import NumericContext


@pytest.fixture
def ctx16():
    return NumericContext(16)


@pytest.fixture
def ctx32():
    return NumericContext(32)


@pytest.fixture
def ctx100():
    return NumericContext(100)


def adaptive_simpson(f, a, b, tol=1e-12, depth=40):
    """Plain recursive Simpson quadrature in doubles (test oracle only)."""

    def simpson(lo, hi):
        mid = (lo + hi) / 2
        return (hi - lo) / 6 * (f(lo) + 4 * f(mid) + f(hi)), mid

    def recurse(lo, hi, whole, level):
        mid = (lo + hi) / 2
        left, _ = simpson(lo, mid)
        right, _ = simpson(mid, hi)
        if level <= 0 or abs(left + right - whole) < 15 * tol:
            return left + right + (left + right - whole) / 15
        return recurse(lo, mid, left, level - 1) + recurse(
            mid, hi, right, level - 1
        )

    whole, _ = simpson(a, b)
    return recurse(a, b, whole, depth)


def rel_err(x, y):
    x, y = float(x), float(y)
    scale = max(abs(x), abs(y))
    if scale == 0:
        return 0.0
    return abs(x - y) / scale


def assert_close(x, y, tol, label=""):
    err = rel_err(x, y)
    assert err <= tol, f"{label}: {float(x)!r} vs {float(y)!r} (rel {err:.3e})"
