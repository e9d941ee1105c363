"""Lagrange and Hermite interpolation bases on distinct real nodes.

Two representations are provided for the two-fold (value + slope) Hermite
basis: explicit monomial coefficients, convenient for identity checks and
for the stacked coefficient matrix, and a factored product-form evaluator
that stays accurate when the expanded coefficients would be astronomically
large.  Mode indices are 1-based everywhere in this package: mode ``n``
matches the n-th node of the ordered input.
"""
from __future__ import annotations

from typing import NamedTuple, Sequence

from .polynomials import Polynomial
from .precision import NumericContext


class DuplicateNodesError(ValueError):
    """Two interpolation nodes coincide at working precision."""


class HermitePair(NamedTuple):
    """Basis pair for one node: ``value_basis`` is one with zero slope at
    its own node and vanishes (with its slope) at every other node;
    ``slope_basis`` has unit slope at its own node and vanishes likewise."""

    value_basis: Polynomial
    slope_basis: Polynomial


def check_nodes(ctx: NumericContext, nodes: Sequence) -> list:
    """Validate pairwise-distinct nodes; return them as context scalars.

    Distinctness is relative: a pair closer than ``10**(-digits+4)`` times
    the largest node magnitude (or than the absolute threshold when all
    nodes are tiny) raises DuplicateNodesError.
    """
    vals = [ctx.num(x) for x in nodes]
    if not vals:
        raise ValueError("need at least one node")
    scale = max(max(abs(v) for v in vals), ctx.num(1))
    threshold = ctx.tol(4) * scale
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            if abs(vals[i] - vals[j]) <= threshold:
                raise DuplicateNodesError(
                    f"nodes {i + 1} and {j + 1} coincide within "
                    f"{float(threshold):.3e}"
                )
    return vals


def _check_index(n: int, count: int) -> None:
    if not 1 <= n <= count:
        raise IndexError(f"mode index {n} outside 1..{count}")


def lagrange_basis(ctx: NumericContext, nodes: Sequence, n: int) -> Polynomial:
    """Monomial coefficients of the n-th Lagrange cardinal polynomial."""
    vals = check_nodes(ctx, nodes)
    _check_index(n, len(vals))
    center = vals[n - 1]
    poly = Polynomial((ctx.num(1),))
    for j, node in enumerate(vals):
        if j == n - 1:
            continue
        gap = center - node
        poly = poly * Polynomial((-node / gap, 1 / gap))
    return poly


def hermite_basis(ctx: NumericContext, nodes: Sequence, n: int) -> HermitePair:
    """Monomial-coefficient Hermite basis pair for the n-th node."""
    vals = check_nodes(ctx, nodes)
    _check_index(n, len(vals))
    center = vals[n - 1]
    lag = lagrange_basis(ctx, nodes, n)
    lag2 = lag * lag
    slope_at_center = lag.derivative()(center)
    one = ctx.num(1)
    # value_basis = (1 - 2 (z - center) * L'(center)) * L^2
    linear = Polynomial((one + 2 * center * slope_at_center, -2 * slope_at_center))
    value = linear * lag2
    # slope_basis = (z - center) * L^2
    slope = Polynomial((-center, one)) * lag2
    return HermitePair(value, slope)


def hermite_matrix(ctx: NumericContext, nodes: Sequence):
    """Stacked coefficient matrix of the full Hermite basis.

    Row ``2n-2`` holds the monomial coefficients of mode n's value basis,
    row ``2n-1`` those of its slope basis (ascending powers, width 2S).
    Multiplying this matrix by the power column ``(1, z, ..., z**(2S-1))``
    therefore evaluates every basis function at ``z`` in one sweep.
    """
    vals = check_nodes(ctx, nodes)
    s = len(vals)
    width = 2 * s
    rows = []
    for n in range(1, s + 1):
        pair = hermite_basis(ctx, vals, n)
        for poly in pair:
            coeffs = list(poly.coefficients)
            if len(coeffs) > width:
                raise AssertionError("basis degree exceeded 2S-1")
            coeffs += [ctx.num(0)] * (width - len(coeffs))
            rows.append(coeffs)
    return rows


def hermite_values(ctx: NumericContext, nodes: Sequence, n: int, zeta):
    """Evaluate mode n's Hermite basis pair at ``zeta`` in factored form.

    Works multiplicatively through the node gaps, so the result keeps full
    relative accuracy even when the expanded coefficients of the same
    polynomials overflow any reasonable exponent range.  Returns the
    ``(value_basis(zeta), slope_basis(zeta))`` pair.
    """
    vals = check_nodes(ctx, nodes)
    _check_index(n, len(vals))
    zeta = ctx.num(zeta)
    center = vals[n - 1]
    lag = ctx.num(1)
    slope_sum = ctx.num(0)
    for j, node in enumerate(vals):
        if j == n - 1:
            continue
        lag *= (zeta - node) / (center - node)
        slope_sum += 1 / (center - node)
    lag2 = lag * lag
    offset = zeta - center
    value = (1 - 2 * offset * slope_sum) * lag2
    slope = offset * lag2
    return value, slope
