"""Spectra of -(p u')' - q u on the unit interval with Dirichlet ends.

Provides exact spectra for constant coefficients, a conservative
second-order finite-difference spectrum for general coefficients, and the
square-growth envelope constants that the decay-bound diagnostics need.
Eigenfunctions are handled as interior-grid samples, unit-normalised in
the trapezoid inner product and signed so the first interior sample is
positive.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from . import linalg
from .precision import NumericContext


class ResolutionError(ValueError):
    """Too many modes requested for the grid resolution."""


_RANGE_SCAN_POINTS = 257


@dataclass(frozen=True)
class SturmLiouvilleProblem:
    """Coefficients of the operator ``-(p u')' - q u`` on (0, 1).

    ``diffusion`` (p) and ``reaction`` (q) may each be a number or a
    callable of one spatial argument.  The diffusion coefficient must be
    strictly positive wherever it is evaluated.
    """

    diffusion: object
    reaction: object

    @property
    def has_constant_coefficients(self) -> bool:
        return not callable(self.diffusion) and not callable(self.reaction)

    def diffusion_at(self, ctx: NumericContext, x):
        value = ctx.num(self.diffusion(x) if callable(self.diffusion) else self.diffusion)
        if value <= 0:
            raise ValueError(f"diffusion coefficient not positive at x={float(x)}")
        return value

    def reaction_at(self, ctx: NumericContext, x):
        return ctx.num(self.reaction(x) if callable(self.reaction) else self.reaction)

    def coefficient_range(self, ctx: NumericContext):
        """(p_min, p_max, q_min, q_max), scanned on a fine grid when the
        coefficients are callables and exact when they are constants."""
        if self.has_constant_coefficients:
            p = self.diffusion_at(ctx, ctx.num(0))
            q = self.reaction_at(ctx, ctx.num(0))
            return p, p, q, q
        pts = [
            ctx.num(i) / (_RANGE_SCAN_POINTS - 1) for i in range(_RANGE_SCAN_POINTS)
        ]
        p_vals = [self.diffusion_at(ctx, x) for x in pts]
        q_vals = [self.reaction_at(ctx, x) for x in pts]
        return min(p_vals), max(p_vals), min(q_vals), max(q_vals)


@dataclass(frozen=True)
class SpectralData:
    """Leading eigenpairs of one problem, sampled on an interior grid.

    ``eigenfunctions[k]`` holds the interior samples of the (k+1)-th
    eigenfunction; the boundary values are identically zero and are not
    stored.  ``discrete`` records whether the data came from the
    finite-difference operator (whose eigenvalues follow the discrete
    growth symbol) or from a closed form.
    """

    eigenvalues: tuple
    eigenfunctions: tuple
    grid: tuple
    spacing: object
    discrete: bool

    def __post_init__(self):
        for a, b in zip(self.eigenvalues, self.eigenvalues[1:]):
            if not b > a:
                raise ValueError("eigenvalues must be strictly increasing")
        if len(self.eigenvalues) != len(self.eigenfunctions):
            raise ValueError("one eigenfunction per eigenvalue required")

    @property
    def count(self) -> int:
        return len(self.eigenvalues)


def _growth_factor(ctx: NumericContext, n: int, spacing, discrete: bool):
    """Dirichlet growth of the n-th mode: ``pi^2 n^2`` in the continuum,
    the three-point symbol ``(4/h^2) sin^2(n pi h / 2)`` on the grid."""
    if not discrete:
        return ctx.pi * ctx.pi * n * n
    h = ctx.num(spacing)
    s = ctx.sin(n * ctx.pi * h / 2)
    return 4 * s * s / (h * h)


def check_eigenvalue_bounds(
    ctx: NumericContext, problem: SturmLiouvilleProblem, data: SpectralData
) -> None:
    """Assert the square-growth envelope on every eigenvalue.

    Freezing the coefficients at their extremes bounds the quadratic form
    on both sides, so mode n must sit between
    ``g_n * p_min - q_max`` and ``g_n * p_max - q_min`` where ``g_n`` is
    the (continuum or discrete) Dirichlet growth factor.  A small relative
    slack absorbs rounding in the eigensolver.
    """
    p_lo, p_hi, q_lo, q_hi = problem.coefficient_range(ctx)
    for idx, lam in enumerate(data.eigenvalues):
        n = idx + 1
        g = _growth_factor(ctx, n, data.spacing, data.discrete)
        lower = g * p_lo - q_hi
        upper = g * p_hi - q_lo
        slack = ctx.num("1e-10") * max(abs(lower), abs(upper), ctx.num(1))
        if not (lower - slack <= lam <= upper + slack):
            raise AssertionError(
                f"eigenvalue {n} = {float(lam):.6g} escapes "
                f"[{float(lower):.6g}, {float(upper):.6g}]"
            )


def analytic_spectrum(
    ctx: NumericContext,
    problem: SturmLiouvilleProblem,
    count: int,
    interior_points: int = 60,
) -> SpectralData:
    """Exact leading spectrum for constant coefficients.

    ``lambda_n = pi^2 n^2 p - q`` with eigenfunctions ``sqrt(2) sin(n pi x)``
    sampled on a uniform interior grid.  Raises ValueError when either
    coefficient is a callable.
    """
    if not problem.has_constant_coefficients:
        raise ValueError("analytic spectrum requires constant coefficients")
    if count < 1:
        raise ValueError("count must be positive")
    p = problem.diffusion_at(ctx, ctx.num(0))
    q = problem.reaction_at(ctx, ctx.num(0))
    h = ctx.num(1) / (interior_points + 1)
    grid = tuple((i + 1) * h for i in range(interior_points))
    sqrt2 = ctx.sqrt(ctx.num(2))
    values = []
    functions = []
    for n in range(1, count + 1):
        values.append(ctx.pi * ctx.pi * n * n * p - q)
        functions.append(tuple(sqrt2 * ctx.sin(n * ctx.pi * x) for x in grid))
    data = SpectralData(
        eigenvalues=tuple(values),
        eigenfunctions=tuple(functions),
        grid=grid,
        spacing=h,
        discrete=False,
    )
    check_eigenvalue_bounds(ctx, problem, data)
    return data


def fd_spectrum(
    ctx: NumericContext,
    problem: SturmLiouvilleProblem,
    count: int,
    interior_points: int = 60,
) -> SpectralData:
    """Leading spectrum of the conservative three-point discretisation.

    The flux form ``-(p u')'`` is differenced with the diffusion
    coefficient at cell midpoints, which keeps the matrix symmetric for
    any positive p, so the discrete eigenvalues are real and the
    eigenvectors orthogonal.  Requesting more than ``interior_points / 2``
    modes raises ResolutionError: beyond that the grid cannot resolve the
    oscillation and the discrete eigenvalues are dominated by symbol
    error.  Second-order accurate in the spacing.
    """
    if count < 1:
        raise ValueError("count must be positive")
    if count > interior_points // 2:
        raise ResolutionError(
            f"resolving {count} modes needs more than {2 * count} interior "
            f"points; have {interior_points}"
        )
    h = ctx.num(1) / (interior_points + 1)
    grid = [(i + 1) * h for i in range(interior_points)]
    half = ctx.num(1) / 2
    p_left = [problem.diffusion_at(ctx, x - half * h) for x in grid]
    p_right = [problem.diffusion_at(ctx, x + half * h) for x in grid]
    q_here = [problem.reaction_at(ctx, x) for x in grid]
    h2 = h * h
    diag = [
        (p_left[i] + p_right[i]) / h2 - q_here[i] for i in range(interior_points)
    ]
    off = [-p_right[i] / h2 for i in range(interior_points - 1)]
    values, vectors = linalg.tridiagonal_eigenpairs(ctx, diag, off, count)
    functions = []
    for vec in vectors:
        norm = ctx.sqrt(h * sum(v * v for v in vec))
        scaled = [v / norm for v in vec]
        lead = next((v for v in scaled if v != 0), ctx.num(1))
        if lead < 0:
            scaled = [-v for v in scaled]
        functions.append(tuple(scaled))
    data = SpectralData(
        eigenvalues=tuple(values),
        eigenfunctions=tuple(functions),
        grid=tuple(grid),
        spacing=h,
        discrete=True,
    )
    check_eigenvalue_bounds(ctx, problem, data)
    return data


@dataclass(frozen=True)
class GapConstants:
    """Envelope ``lower * (m^2 - n^2) <= lambda_m - lambda_n <=
    upper * (m^2 - n^2)`` for the mode rates at hand."""

    lower: object
    upper: object

    def __post_init__(self):
        if not self.lower > 0:
            raise ValueError("lower gap constant must be positive")
        if self.upper < self.lower:
            raise ValueError("upper gap constant below lower")


def estimate_gap_constants(ctx: NumericContext, rates: Sequence) -> GapConstants:
    """Tightest square-growth envelope consistent with the given rates.

    Scans all pairs of the (strictly increasing) rates and takes the
    extreme ratios ``(rate_m - rate_n) / (m^2 - n^2)``.  For the exact
    constant-coefficient spectrum both constants collapse to the
    diffusion coefficient times pi^2.
    """
    vals = [ctx.num(r) for r in rates]
    if len(vals) < 2:
        raise ValueError("need at least two rates")
    for a, b in zip(vals, vals[1:]):
        if not b > a:
            raise ValueError("rates must be strictly increasing")
    ratios = []
    for i in range(len(vals)):
        for j in range(i + 1, len(vals)):
            m, n = j + 1, i + 1
            ratios.append((vals[j] - vals[i]) / (m * m - n * n))
    return GapConstants(lower=min(ratios), upper=max(ratios))
