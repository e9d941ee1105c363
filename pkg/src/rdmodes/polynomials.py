"""Dense univariate polynomials in the monomial basis.

A tiny immutable coefficient container used by the interpolation layer.
Coefficients are stored lowest power first and are context scalars; the
arithmetic never mixes precisions because every coefficient is produced
from one NumericContext by the caller.
"""
from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Polynomial:
    """Coefficients ascending: ``coefficients[k]`` multiplies ``z**k``."""

    coefficients: tuple

    def __post_init__(self):
        if len(self.coefficients) == 0:
            raise ValueError("a polynomial needs at least one coefficient")
        object.__setattr__(self, "coefficients", tuple(self.coefficients))

    @property
    def degree(self) -> int:
        """Index of the highest stored coefficient (no trailing trim)."""
        return len(self.coefficients) - 1

    def __call__(self, z):
        acc = self.coefficients[-1]
        for c in reversed(self.coefficients[:-1]):
            acc = acc * z + c
        return acc

    def derivative(self) -> "Polynomial":
        c = self.coefficients
        if len(c) == 1:
            return Polynomial((c[0] * 0,))
        return Polynomial(tuple(k * c[k] for k in range(1, len(c))))

    def __mul__(self, other):
        if isinstance(other, Polynomial):
            a, b = self.coefficients, other.coefficients
            out = [a[0] * b[0] * 0] * (len(a) + len(b) - 1)
            for i, ai in enumerate(a):
                for j, bj in enumerate(b):
                    out[i + j] += ai * bj
            return Polynomial(tuple(out))
        return Polynomial(tuple(c * other for c in self.coefficients))

    __rmul__ = __mul__

    def __add__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        a, b = self.coefficients, other.coefficients
        if len(a) < len(b):
            a, b = b, a
        out = list(a)
        for i, bi in enumerate(b):
            out[i] = out[i] + bi
        return Polynomial(tuple(out))

    def __sub__(self, other):
        return self + (other * -1)

    def shift_up(self, k: int = 1) -> "Polynomial":
        """Multiply by ``z**k``."""
        zero = self.coefficients[0] * 0
        return Polynomial((zero,) * k + self.coefficients)
