"""Subspace exponential fitting from minimal equispaced records.

Recovers decay rates and amplitudes of a finite exponential sum from
``2 * main_count`` equispaced samples: Hankel embedding, signal-subspace
extraction by SVD, the shift-invariance solve, eigenvalue extraction of
the rotation, and a Vandermonde least-squares pass for amplitudes.
Recovered rates are ranked against a reference ladder and reported as
scale-free errors per unit remainder amplitude.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Sequence

from . import linalg
from .expmodel import CandidateParameters, SampleGrid, fit_jacobian, residual
from .precision import NumericContext

_IMAG_TOL_DOUBLE = 1e-3
_IMAG_TOL_EXTENDED = 1e-6

_REFINE_STEPS = 25
_REFINE_MAX_GROWTHS = 3


class ComplexNodesError(ArithmeticError):
    """Rotation eigenvalues left the real axis beyond tolerance.

    Signals model-order mismatch or noise dominating the record.
    """


class NonPositiveNodeError(ArithmeticError):
    """A recovered node has nonpositive real part; no real decay rate."""


def imaginary_tolerance(digits: int) -> float:
    """Relative off-axis tolerance for recovered nodes at a precision."""
    return _IMAG_TOL_DOUBLE if digits <= 16 else _IMAG_TOL_EXTENDED


@dataclass(frozen=True)
class FitConfig:
    """Model order and sampling step for one subspace fit.

    ``imag_tolerance`` overrides the precision-derived default when set.
    ``refine`` keeps the closing Newton polish of the subspace estimate
    (the polish recovers the digits the SVD truncation gives away when
    the smallest signal singular value sits near roundoff; its fixed
    point is the exactly interpolating parameter set).
    """

    main_count: int
    delta: object
    imag_tolerance: Optional[float] = None
    refine: bool = True

    def __post_init__(self):
        if self.main_count < 1:
            raise ValueError("main_count must be at least 1")
        if not float(self.delta) > 0:
            raise ValueError("delta must be positive")


@dataclass(frozen=True)
class RecoveryResult:
    """Recovered exponential components, rates ascending.

    Later pipeline stages fill the optional fields: the rank-matching
    permutation, per-mode scale-free errors, recovered initial modes, and
    the fitted diffusion/reaction constants.
    """

    delta: object
    rates: tuple
    amplitudes: tuple
    nodes: tuple
    permutation: Optional[tuple] = None
    rate_errors: Optional[tuple] = None
    amplitude_errors: Optional[tuple] = None
    initial_modes: Optional[tuple] = None
    coefficient_fit: Optional[tuple] = None


def hankel_matrix(samples: Sequence, rows: int, cols: int):
    """Hankel embedding ``H[i][j] = samples[i + j]``."""
    if len(samples) < rows + cols - 1:
        raise ValueError(
            f"need {rows + cols - 1} samples for a {rows}x{cols} Hankel matrix"
        )
    return [[samples[i + j] for j in range(cols)] for i in range(rows)]


def esprit_fit(ctx: NumericContext, samples: Sequence, config: FitConfig) -> RecoveryResult:
    """Fit ``main_count`` decaying exponentials to a minimal record.

    Consumes exactly ``2 * main_count`` samples.  The signal subspace is
    the span of the left singular vectors of the (main_count+1) x
    main_count Hankel embedding; the one-step shift rotation is solved in
    least squares and its eigenvalues are the nodes.  Nodes must sit on
    the positive real axis to within the precision-dependent tolerance —
    ComplexNodesError / NonPositiveNodeError otherwise.  Amplitudes come
    from a Vandermonde least-squares fit over the full record.
    """
    order = config.main_count
    count = 2 * order
    if len(samples) < count:
        raise ValueError(f"need {count} samples, got {len(samples)}")
    data = [ctx.num(s) for s in samples[:count]]
    if not all(ctx.isfinite(s) for s in data):
        raise ValueError("samples must be finite")
    d = ctx.num(config.delta)

    h = hankel_matrix(data, order + 1, order)
    u, _, _ = linalg.svd(ctx, h)
    u_top = u[:order]
    u_bottom = u[1:]
    rotation_cols = [
        linalg.least_squares(ctx, u_top, [row[j] for row in u_bottom])
        for j in range(order)
    ]
    rotation = [[rotation_cols[j][i] for j in range(order)] for i in range(order)]
    spectrum = linalg.eig_small(ctx, rotation)

    tol = (
        config.imag_tolerance
        if config.imag_tolerance is not None
        else imaginary_tolerance(ctx.digits)
    )
    nodes = []
    for re, im in spectrum:
        size = ctx.hypot(re, im)
        if size == 0 or abs(im) / size > tol:
            raise ComplexNodesError(
                f"node {float(re):.6g}{float(im):+.6g}j is off the real axis "
                f"beyond tolerance {tol:g}"
            )
        if not re > 0:
            raise NonPositiveNodeError(
                f"node real part {float(re):.6g} is not positive"
            )
        nodes.append(re)
    nodes.sort(reverse=True)  # ascending rates
    rates = [-ctx.log(phi) / d for phi in nodes]

    vandermonde = []
    powers = [ctx.num(1) for _ in nodes]
    for _ in range(count):
        vandermonde.append(list(powers))
        powers = [p * phi for p, phi in zip(powers, nodes)]
    amplitudes = linalg.least_squares(ctx, vandermonde, data)
    if config.refine:
        rates, amplitudes = _newton_polish(ctx, rates, amplitudes, data, d)
        nodes = [ctx.exp(-r * d) for r in rates]
    return RecoveryResult(
        delta=d,
        rates=tuple(rates),
        amplitudes=tuple(amplitudes),
        nodes=tuple(nodes),
    )


def _newton_polish(ctx, rates, amplitudes, data, delta):
    """Push the subspace estimate onto the interpolating parameter set.

    Newton on the collocation equations from the subspace start; keeps
    the best iterate by worst-case residual, gives up after a few
    consecutive growths, and backs out silently if the Jacobian
    degenerates (the unpolished estimate is then final).
    """
    grid = SampleGrid(delta=delta, count=len(data))
    values = []
    for a, r in zip(amplitudes, rates):
        values.extend((a, r))
    candidate = CandidateParameters(values=tuple(values))
    best = candidate
    best_size = max(abs(x) for x in residual(ctx, candidate, data, grid))
    scale = max(abs(x) for x in data)
    # stop near the working precision's residual floor: a looser target
    # leaves parameter error of residual times the collocation
    # sensitivity, which can sit orders of magnitude above the samples'
    # own accuracy
    target = ctx.tol(3) * max(scale, ctx.num(1))
    growths = 0
    for _ in range(_REFINE_STEPS):
        if best_size <= target:
            break
        try:
            jac = fit_jacobian(ctx, candidate, grid)
            step = linalg.solve_linear(
                ctx, jac, residual(ctx, candidate, data, grid)
            )
        except linalg.SingularMatrixError:
            break
        candidate = CandidateParameters(
            values=tuple(v - s for v, s in zip(candidate.values, step))
        )
        size = max(abs(x) for x in residual(ctx, candidate, data, grid))
        if size < best_size:
            best, best_size = candidate, size
            growths = 0
        else:
            growths += 1
            if growths >= _REFINE_MAX_GROWTHS:
                break
    pairs = sorted(zip(best.rates, best.amplitudes), key=lambda p: p[0])
    return [p[0] for p in pairs], [p[1] for p in pairs]


def subsample(samples: Sequence, stride: int, count: Optional[int] = None):
    """Every stride-th sample from the start of a longer record.

    Returns the subsampled list; the caller scales the step by the same
    stride.  ``count`` limits the output length (e.g. the minimal
    ``2 * main_count`` window); None keeps everything available.
    """
    if stride < 1:
        raise ValueError("stride must be at least 1")
    picked = list(samples[::stride])
    if count is not None:
        if len(picked) < count:
            raise ValueError(
                f"record supports only {len(picked)} samples at stride "
                f"{stride}, need {count}"
            )
        picked = picked[:count]
    return picked


def index_match(recovered: Sequence, reference: Sequence) -> tuple:
    """Rank-pair recovered rates against a reference ladder.

    Both lists are sorted ascending and paired by rank; returns the
    permutation ``perm`` such that ``recovered[perm[k]]`` pairs with the
    k-th smallest reference entry.  Ties keep original order (stable
    sort).
    """
    if len(recovered) != len(reference):
        raise ValueError("lists must have equal length")
    rec_order = sorted(range(len(recovered)), key=lambda i: recovered[i])
    ref_order = sorted(range(len(reference)), key=lambda i: reference[i])
    perm = [0] * len(recovered)
    for rank, ref_idx in enumerate(ref_order):
        perm[ref_idx] = rec_order[rank]
    return tuple(perm)


def rescaled_errors(
    ctx: NumericContext,
    result: RecoveryResult,
    true_rates: Sequence,
    true_amplitudes: Sequence,
    noise_scale,
) -> RecoveryResult:
    """Per-mode recovery errors divided by the remainder scale.

    Matches recovered rates to the truth by rank, then reports
    ``|recovered - true| / noise_scale`` for rates and amplitudes.
    Raises ZeroDivisionError for a zero scale — use raw differences for
    the noiseless case.
    """
    eps = ctx.num(noise_scale)
    if eps == 0:
        raise ZeroDivisionError(
            "noise scale is zero; rescaled errors are undefined (use raw errors)"
        )
    truth_r = [ctx.num(t) for t in true_rates]
    truth_a = [ctx.num(t) for t in true_amplitudes]
    perm = index_match(result.rates, truth_r)
    rate_err = []
    amp_err = []
    ref_order = sorted(range(len(truth_r)), key=lambda i: truth_r[i])
    for rank, ref_idx in enumerate(ref_order):
        rec_idx = perm[ref_idx]
        rate_err.append(abs(result.rates[rec_idx] - truth_r[ref_idx]) / eps)
        amp_err.append(abs(result.amplitudes[rec_idx] - truth_a[ref_idx]) / eps)
    return replace(
        result,
        permutation=perm,
        rate_errors=tuple(rate_err),
        amplitude_errors=tuple(amp_err),
    )
