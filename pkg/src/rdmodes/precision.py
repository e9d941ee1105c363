"""Scalar arithmetic at a configurable decimal precision.

Every numeric routine in this package is generic over a NumericContext,
which fixes the working precision for one run.  Sixteen digits map onto
machine doubles and the ``math``/``cmath`` modules; any higher setting is
delegated to a private mpmath context clone, so two contexts never share
global state and can be used side by side in one process.
"""
from __future__ import annotations

import cmath
import math

import mpmath

#: Decimal digit counts exercised by the shipped configurations.  Any
#: value >= 1 is accepted; 16 is special-cased onto hardware doubles.
STANDARD_DIGITS = (16, 32, 100)

DOUBLE_DIGITS = 16


class NumericContext:
    """Fixed-precision scalar factory and elementary-function table.

    Parameters
    ----------
    digits : int
        Decimal working precision.  ``digits == 16`` computes on machine
        doubles; larger values use mpmath bigfloats with that many
        significant decimal digits.
    """

    __slots__ = ("digits", "_mp")

    def __init__(self, digits: int = DOUBLE_DIGITS):
        digits = int(digits)
        if digits < 1:
            raise ValueError(f"digits must be positive, got {digits}")
        self.digits = digits
        if digits <= DOUBLE_DIGITS:
            self._mp = None
        else:
            ctx = mpmath.mp.clone()
            ctx.dps = digits
            self._mp = ctx

    # -- representation -------------------------------------------------

    @property
    def is_double(self) -> bool:
        return self._mp is None

    def __repr__(self):
        return f"NumericContext(digits={self.digits})"

    # -- scalar construction -------------------------------------------

    def num(self, x):
        """Convert ``x`` (int, float, str, or foreign scalar) to this context."""
        if self._mp is None:
            return float(x)
        return self._mp.mpf(x)

    def to_float(self, x) -> float:
        return float(x)

    def complex_of(self, re, im=0):
        if self._mp is None:
            return complex(re, im)
        return self._mp.mpc(re, im)

    # -- tolerances -----------------------------------------------------

    @property
    def eps(self):
        """Unit roundoff of the working format."""
        if self._mp is None:
            return 2.220446049250313e-16
        return self._mp.eps

    def tol(self, shift: int = 0):
        """``10**(-digits + shift)`` as a context scalar.

        The package's numeric thresholds are all expressed as powers of
        ten relative to the working precision; ``shift`` selects the
        margin (e.g. ``tol(4)`` leaves four guard digits).
        """
        if self._mp is None:
            return 10.0 ** (-self.digits + shift)
        return self._mp.mpf(10) ** (shift - self.digits)

    # -- elementary functions ------------------------------------------

    def exp(self, x):
        if self._mp is None:
            try:
                return math.exp(x)
            except OverflowError:
                return math.inf if x > 0 else 0.0
        return self._mp.exp(x)

    def log(self, x):
        if self._mp is None:
            return math.log(x)
        return self._mp.log(x)

    def log1p(self, x):
        if self._mp is None:
            return math.log1p(x)
        return self._mp.log1p(x)

    def expm1(self, x):
        if self._mp is None:
            return math.expm1(x)
        return self._mp.expm1(x)

    def sqrt(self, x):
        if self._mp is None:
            return math.sqrt(x)
        return self._mp.sqrt(x)

    def sin(self, x):
        if self._mp is None:
            return math.sin(x)
        return self._mp.sin(x)

    def cos(self, x):
        if self._mp is None:
            return math.cos(x)
        return self._mp.cos(x)

    def csqrt(self, z):
        """Principal square root for real or complex input."""
        if self._mp is None:
            return cmath.sqrt(z)
        return self._mp.sqrt(self._mp.mpc(z))

    def hypot(self, a, b):
        if self._mp is None:
            return math.hypot(a, b)
        return self._mp.hypot(a, b)

    @property
    def pi(self):
        if self._mp is None:
            return math.pi
        return self._mp.pi

    def isfinite(self, x) -> bool:
        if self._mp is None:
            return math.isfinite(x)
        return self._mp.isfinite(x)
