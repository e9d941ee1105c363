import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from rdmodes import interpolation
from rdmodes.precision import NumericContext


# ---------------------------------------------------------------------------
# frozen small cases


def test_lagrange_two_nodes(ctx16):
    # nodes {1, 2}: first cardinal polynomial is 2 - z
    poly = interpolation.lagrange_basis(ctx16, [1.0, 2.0], 1)
    assert poly.coefficients == pytest.approx((2.0, -1.0))


def test_lagrange_three_nodes(ctx16):
    # nodes {0, 1, 2}: middle cardinal polynomial is z(2 - z)
    poly = interpolation.lagrange_basis(ctx16, [0.0, 1.0, 2.0], 2)
    assert poly.coefficients == pytest.approx((0.0, 2.0, -1.0))


def test_hermite_pair_two_nodes(ctx16):
    # nodes {0, 1}, first pair: value = (1 + 2z)(1 - z)^2, slope = z(1 - z)^2
    pair = interpolation.hermite_basis(ctx16, [0.0, 1.0], 1)
    assert pair.value_basis.coefficients == pytest.approx((1.0, 0.0, -3.0, 2.0))
    assert pair.slope_basis.coefficients == pytest.approx((0.0, 1.0, -2.0, 1.0))


def test_hermite_matrix_single_node(ctx16):
    c = 0.7
    rows = interpolation.hermite_matrix(ctx16, [c])
    assert rows[0] == pytest.approx([1.0, 0.0])
    assert rows[1] == pytest.approx([-c, 1.0])


def test_hermite_matrix_layout(ctx16):
    nodes = [0.2, 0.5, 0.9]
    rows = interpolation.hermite_matrix(ctx16, nodes)
    assert len(rows) == 6 and all(len(r) == 6 for r in rows)
    # row 2n-2 evaluates to the value basis, row 2n-1 to the slope basis
    z = 0.37
    powers = [z**k for k in range(6)]
    for n in range(1, 4):
        pair = interpolation.hermite_basis(ctx16, nodes, n)
        value = sum(c * p for c, p in zip(rows[2 * n - 2], powers))
        slope = sum(c * p for c, p in zip(rows[2 * n - 1], powers))
        assert value == pytest.approx(pair.value_basis(z), rel=1e-12, abs=1e-12)
        assert slope == pytest.approx(pair.slope_basis(z), rel=1e-12, abs=1e-12)


# ---------------------------------------------------------------------------
# cardinal identities


def test_cardinal_identities_monomial(ctx16):
    nodes = [0.15, 0.4, 0.75]
    for n in range(1, 4):
        pair = interpolation.hermite_basis(ctx16, nodes, n)
        dv = pair.value_basis.derivative()
        ds = pair.slope_basis.derivative()
        for m, node in enumerate(nodes, start=1):
            target = 1.0 if m == n else 0.0
            assert pair.value_basis(node) == pytest.approx(target, abs=1e-12)
            assert pair.slope_basis(node) == pytest.approx(0.0, abs=1e-12)
            assert dv(node) == pytest.approx(0.0, abs=1e-11)
            assert ds(node) == pytest.approx(target, abs=1e-12)


def test_factored_matches_monomial(ctx16):
    # separated nodes keep the expanded-coefficient route accurate enough
    # to compare against (clustered nodes lose digits to cancellation on
    # the monomial side -- the very effect the factored form avoids)
    rng = random.Random(3)
    nodes = []
    while len(nodes) < 4:
        cand = rng.uniform(0.1, 0.9)
        if all(abs(cand - v) > 0.12 for v in nodes):
            nodes.append(cand)
    nodes.sort()
    for n in range(1, 5):
        pair = interpolation.hermite_basis(ctx16, nodes, n)
        for _ in range(5):
            z = rng.uniform(0.0, 1.0)
            value, slope = interpolation.hermite_values(ctx16, nodes, n, z)
            assert value == pytest.approx(pair.value_basis(z), rel=1e-9, abs=1e-11)
            assert slope == pytest.approx(pair.slope_basis(z), rel=1e-9, abs=1e-11)


def test_factored_survives_extreme_spread():
    # a deep geometric ladder at 100 digits: the expanded basis
    # coefficients exceed the double exponent range, yet the factored
    # evaluator keeps the cardinal identities exact
    ctx = NumericContext(100)
    nodes = [ctx.exp(-ctx.num(k * k)) for k in range(1, 12)]
    pair = interpolation.hermite_basis(ctx, nodes, 11)
    largest = max(abs(c) for c in pair.value_basis.coefficients)
    assert largest > ctx.num("1e320")  # would overflow hardware floats
    for m, node in enumerate(nodes, start=1):
        value, slope = interpolation.hermite_values(ctx, nodes, 11, node)
        target = ctx.num(1 if m == 11 else 0)
        assert abs(value - target) < ctx.num("1e-90")
        assert abs(slope) < ctx.num("1e-90")


# ---------------------------------------------------------------------------
# validation


def test_duplicate_nodes(ctx16):
    with pytest.raises(interpolation.DuplicateNodesError):
        interpolation.check_nodes(ctx16, [0.5, 0.5])
    # relative threshold: equal up to 1e-13 at scale 1e3 counts as duplicate
    with pytest.raises(interpolation.DuplicateNodesError):
        interpolation.check_nodes(ctx16, [1000.0, 1000.0 + 1e-13])


def test_distinct_nodes_pass(ctx16):
    vals = interpolation.check_nodes(ctx16, [0.1, 0.2])
    assert vals == [0.1, 0.2]
    with pytest.raises(ValueError):
        interpolation.check_nodes(ctx16, [])


def test_index_validation(ctx16):
    with pytest.raises(IndexError):
        interpolation.lagrange_basis(ctx16, [0.1, 0.2], 3)
    with pytest.raises(IndexError):
        interpolation.hermite_values(ctx16, [0.1, 0.2], 0, 0.5)


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=40, deadline=None)
@given(
    st.integers(min_value=1, max_value=6),
    st.integers(min_value=0, max_value=10**6),
)
def test_cardinal_identity_property(size, seed):
    ctx = NumericContext(16)
    rng = random.Random(seed)
    nodes = []
    while len(nodes) < size:
        cand = rng.uniform(0.05, 0.95)
        if all(abs(cand - v) > 0.05 for v in nodes):
            nodes.append(cand)
    for n in range(1, size + 1):
        for m, node in enumerate(nodes, start=1):
            value, slope = interpolation.hermite_values(ctx, nodes, n, node)
            assert abs(value - (1.0 if m == n else 0.0)) < 1e-10
            assert abs(slope) < 1e-10
