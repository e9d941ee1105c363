"""First-order sensitivity of the reduced fit to the scaled remainder.

As the remainder scale goes to zero, the fitted parameters drift linearly;
the per-mode drift coefficients (amplitude and rate sensitivities) are
computed here by two independent routes that check each other:

* a closed form built from factored Hermite-basis evaluations at the
  remainder node, valid for a single remainder mode, and
* a linear solve of the collocation Jacobian against the remainder's
  moment vector, valid for any remainder width.

The linear solve assembles and eliminates at an internal guard precision
chosen adaptively (doubling until two successive solves agree comfortably
below the requested precision), because the assembled system's
componentwise conditioning grows like the inverse of the smallest node
products — far beyond any fixed working precision once the sampling step
is large.  Run-precision output plus a run-precision condition estimate of
the direct Jacobian preserve the observable breakdown of naive
elimination as a reliability flag instead of silent garbage.

The module also evaluates the node-gap diagnostics behind the decay
bounds: squared gap products, their logarithmic corrections, the
polynomial decay exponent, and the dilogarithm integral that brackets the
corrections.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import NamedTuple, Optional, Sequence

from . import interpolation, linalg
from .expmodel import (
    CandidateParameters,
    ExponentialModel,
    SampleGrid,
    SingularJacobianError,
    fit_jacobian,
)
from .precision import NumericContext
from .special import DomainError, dilog
from .spectral import GapConstants, estimate_gap_constants


class InsufficientDataError(ValueError):
    """Not enough sweep points to fit the decay envelope."""


#: routes disagreeing beyond this relative size mark a report unreliable
_ROUTE_AGREEMENT_TOL = 1e-4

#: direct-Jacobian condition estimates beyond 10**(digits-6) mark breakdown
_CONDITION_MARGIN = 6

#: guard-precision solves must agree to 10**-(digits+6) before acceptance
_GUARD_MARGIN = 6

_MAX_GUARD_DIGITS = 50_000


@dataclass(frozen=True)
class ConditionReport:
    """Per-mode first-order sensitivities from one route.

    ``amplitude_sensitivity[n-1]`` is the drift of fitted amplitude n per
    unit remainder scale; ``rate_sensitivity[n-1]`` the same for rate n.
    ``reliable`` stays None until a cross-route assessment sets it.
    """

    delta: object
    main_count: int
    tail_count: int
    digits: int
    route: str
    amplitude_sensitivity: tuple
    rate_sensitivity: tuple
    reliable: Optional[bool] = None


def condition_closed_form(
    ctx: NumericContext, model: ExponentialModel, delta
) -> ConditionReport:
    """Sensitivities via Hermite-basis values at the remainder node.

    Requires exactly one remainder mode.  With nodes ``phi_n`` for the
    main rates and ``zeta`` for the remainder, mode n's amplitude
    sensitivity is the remainder amplitude times the value-basis
    evaluation at ``zeta``; its rate sensitivity is minus the remainder
    amplitude times the slope-basis evaluation, divided by
    ``delta * y_n * phi_n``.  Factored evaluation keeps full relative
    accuracy at any spread; numerically coincident nodes raise
    DuplicateNodesError.
    """
    if model.tail_count != 1:
        raise ValueError(
            f"closed form handles exactly one remainder mode, got {model.tail_count}"
        )
    d = ctx.num(delta)
    if not d > 0:
        raise ValueError("delta must be positive")
    main_nodes, tail_nodes = model.nodes(ctx, d)
    zeta = tail_nodes[0]
    tail_amp = ctx.num(model.tail_amplitudes[0])
    amps = [ctx.num(y) for y in model.main_amplitudes]
    amp_sens = []
    rate_sens = []
    for n in range(1, model.main_count + 1):
        value, slope = interpolation.hermite_values(ctx, main_nodes, n, zeta)
        amp_sens.append(tail_amp * value)
        rate_sens.append(
            -tail_amp * slope / (d * amps[n - 1] * main_nodes[n - 1])
        )
    return ConditionReport(
        delta=d,
        main_count=model.main_count,
        tail_count=1,
        digits=ctx.digits,
        route="closed-form",
        amplitude_sensitivity=tuple(amp_sens),
        rate_sensitivity=tuple(rate_sens),
    )


def _tail_moments(ctx, model, delta, count):
    _, tail_nodes = model.nodes(ctx, delta)
    amps = [ctx.num(y) for y in model.tail_amplitudes]
    powers = [ctx.num(1) for _ in tail_nodes]
    out = []
    for _ in range(count):
        out.append(sum((a * p for a, p in zip(amps, powers)), start=ctx.num(0)))
        powers = [p * nd for p, nd in zip(powers, tail_nodes)]
    return out


def _direct_jacobian_solve(ctx, model, delta):
    grid = SampleGrid(delta=ctx.num(delta), count=2 * model.main_count)
    candidate = CandidateParameters.from_model(ctx, model)
    jac = fit_jacobian(ctx, candidate, grid)
    rhs = _tail_moments(ctx, model, ctx.num(delta), grid.count)
    try:
        return linalg.solve_linear(ctx, jac, rhs)
    except linalg.SingularMatrixError as exc:
        raise SingularJacobianError(str(exc)) from exc


def jacobian_condition_estimate(ctx: NumericContext, model: ExponentialModel, delta):
    """Run-precision condition estimate of the direct collocation Jacobian."""
    grid = SampleGrid(delta=ctx.num(delta), count=2 * model.main_count)
    candidate = CandidateParameters.from_model(ctx, model)
    jac = fit_jacobian(ctx, candidate, grid)
    return linalg.condition_estimate(ctx, jac)


def condition_linear_solve(
    ctx: NumericContext, model: ExponentialModel, delta
) -> ConditionReport:
    """Sensitivities by solving the Jacobian system for the remainder moments.

    Accepts any remainder width (the remainder modes superpose linearly in
    the right-hand side).  The solve itself runs at adaptive guard
    precision: starting from twice the run precision, the internal digit
    count doubles until two successive eliminations agree componentwise
    to ``10**-(digits+6)`` relative, and the settled values are rounded
    back to run precision.  Raises SingularJacobianError if the Jacobian
    degenerates (coincident rates) or the guard loop cannot settle.
    """
    if model.tail_count < 1:
        raise ValueError("need at least one remainder mode")
    d_run = ctx.num(delta)
    if not d_run > 0:
        raise ValueError("delta must be positive")
    agree_tol = 10.0 ** -(ctx.digits + _GUARD_MARGIN)
    inner_digits = 2 * ctx.digits + 20
    previous = None
    while True:
        inner = NumericContext(inner_digits)
        kappa = _direct_jacobian_solve(inner, model, delta)
        if previous is not None and _componentwise_agree(kappa, previous, agree_tol):
            break
        previous = kappa
        inner_digits *= 2
        if inner_digits > _MAX_GUARD_DIGITS:
            raise SingularJacobianError(
                f"guard-precision elimination would not settle below "
                f"{_MAX_GUARD_DIGITS} digits at delta={float(delta)}"
            )
    amp_sens = tuple(ctx.num(kappa[2 * i]) for i in range(model.main_count))
    rate_sens = tuple(
        ctx.num(kappa[2 * i + 1]) for i in range(model.main_count)
    )
    return ConditionReport(
        delta=d_run,
        main_count=model.main_count,
        tail_count=model.tail_count,
        digits=ctx.digits,
        route="linear-solve",
        amplitude_sensitivity=amp_sens,
        rate_sensitivity=rate_sens,
    )


def _componentwise_agree(a, b, tol):
    for x, y in zip(a, b):
        mag = max(abs(x), abs(y))
        if mag == 0:
            continue
        if abs(x - y) / mag > tol:
            return False
    return True


def route_disagreement(report_a: ConditionReport, report_b: ConditionReport):
    """Worst relative gap between two reports' sensitivity vectors."""
    worst = 0.0
    for pair in ("amplitude_sensitivity", "rate_sensitivity"):
        for x, y in zip(getattr(report_a, pair), getattr(report_b, pair)):
            mag = max(abs(x), abs(y))
            if mag == 0:
                continue
            rel = float(abs(x - y) / mag)
            worst = max(worst, rel)
    return worst


class ConditionAssessment(NamedTuple):
    """Cross-checked sensitivities with a breakdown verdict.

    ``closed_form`` is None when the remainder is wider than one mode.
    ``reliable`` is False when the routes disagree beyond 1e-4 relative
    or the run-precision Jacobian condition estimate exceeds
    ``10**(digits-6)`` — the observable signature of the large-step
    breakdown regime.
    """

    closed_form: Optional[ConditionReport]
    linear_solve: ConditionReport
    condition_estimate: object
    reliable: bool


def assess_condition(
    ctx: NumericContext, model: ExponentialModel, delta
) -> ConditionAssessment:
    """Run both routes (where applicable) and flag breakdown."""
    linear = condition_linear_solve(ctx, model, delta)
    closed = None
    reliable = True
    if model.tail_count == 1:
        closed = condition_closed_form(ctx, model, delta)
        if route_disagreement(closed, linear) > _ROUTE_AGREEMENT_TOL:
            reliable = False
    estimate = jacobian_condition_estimate(ctx, model, delta)
    limit = 10.0 ** (ctx.digits - _CONDITION_MARGIN)
    if not estimate < limit:
        reliable = False
    closed = closed and replace(closed, reliable=reliable)
    linear = replace(linear, reliable=reliable)
    return ConditionAssessment(
        closed_form=closed,
        linear_solve=linear,
        condition_estimate=estimate,
        reliable=reliable,
    )


# ---------------------------------------------------------------------------
# node-gap diagnostics behind the decay bounds


@dataclass(frozen=True)
class BoundDiagnostics:
    """Gap products and logarithmic corrections for one mode index.

    For mode n out of ``main_count`` resolved modes (remainder node one
    past the main block):

    * ``tail_gap_product``: squared gaps from the remainder node to every
      other main node, multiplied out.
    * ``lower_gap_product`` / ``upper_gap_product``: squared gaps from
      node n to its lower-index / higher-index main neighbours.
    * ``inverse_gap_sum``: sum of reciprocal absolute gaps from node n to
      the other main nodes.
    * ``tail_log_sum`` / ``lower_log_sum`` / ``upper_log_sum``: the
      positive log-sum corrections extracted from the same three products.
    * ``log_correction``: the combined correction exponent
      ``-2 (tail - lower - upper)``.
    * ``decay_exponent``: integer rate-square deficit
      ``sum_{j=n+1..main_count} (j^2 - n^2)``.
    * ``cardinal_square``: squared Lagrange cardinal evaluation at the
      remainder node, ``tail_gap_product / (lower * upper)``.
    * ``identity_residuals``: relative residuals of the three product =
      exponential-form identities (algebraic rewritings, so these sit at
      working-precision level).
    * ``*_log_bracket``: (lower, upper) dilog-integral bracket for each
      log-sum, None where the underlying sum is empty.
    * ``gap_constants``: square-growth envelope estimated from the rates.
    """

    mode: int
    main_count: int
    delta: object
    tail_gap_product: object
    lower_gap_product: object
    upper_gap_product: object
    inverse_gap_sum: object
    tail_log_sum: object
    lower_log_sum: object
    upper_log_sum: object
    log_correction: object
    decay_exponent: int
    cardinal_square: object
    identity_residuals: tuple
    tail_log_bracket: Optional[tuple]
    lower_log_bracket: Optional[tuple]
    upper_log_bracket: Optional[tuple]
    gap_constants: GapConstants


def decay_exponent(mode: int, main_count: int) -> int:
    """``sum_{j=mode+1}^{main_count} (j**2 - mode**2)`` in closed form."""
    n, s = mode, main_count
    return (
        s * (s + 1) * (2 * s + 1) // 6
        - n * (n + 1) * (2 * n + 1) // 6
        - (s - n) * n * n
    )


def _log_one_minus_exp(ctx: NumericContext, x):
    """``log(1 - e^{-x})`` for x > 0 without the cancellation at either end.

    Below ln 2 the direct subtraction loses digits (``e^{-x}`` is close
    to 1), above it the difference rounds to 1 once ``e^{-x}`` drops
    under one ulp -- which silently zeroes the exponentially small log
    sums that the analytic brackets still resolve.
    """
    if x <= _LOG_SPLIT:
        return ctx.log(-ctx.expm1(-x))
    return ctx.log1p(-ctx.exp(-x))


_LOG_SPLIT = math.log(2)


def dilog_gap_integral(ctx: NumericContext, w1, w2, alpha):
    """Integral of ``-log(1 - exp(-alpha x))`` from w1 to w2.

    ``w2 = None`` (or an infinite float) integrates to infinity.  In
    closed form this is ``(dilog(e^{-alpha w1}) - dilog(e^{-alpha w2}))
    / alpha``; the integrand's antiderivative is ``-dilog(e^{-alpha x}) /
    alpha``.  Raises DomainError unless ``0 <= w1 < w2`` and
    ``alpha > 0``.
    """
    a = ctx.num(alpha)
    lo = ctx.num(w1)
    unbounded = w2 is None or float(w2) == float("inf")
    if not a > 0:
        raise DomainError("alpha must be positive")
    if lo < 0:
        raise DomainError("lower limit must be nonnegative")
    if not unbounded:
        hi = ctx.num(w2)
        if not hi > lo:
            raise DomainError("upper limit must exceed lower limit")
    upper_dilog = ctx.num(0) if unbounded else dilog(ctx, ctx.exp(-a * hi))
    return (dilog(ctx, ctx.exp(-a * lo)) - upper_dilog) / a


def bound_diagnostics(
    ctx: NumericContext, rates: Sequence, mode: int, main_count: int, delta
) -> BoundDiagnostics:
    """Evaluate the gap diagnostics for one mode of a rate ladder.

    ``rates`` must reach one index past ``main_count`` (the remainder
    node).  The three squared-gap products are computed directly from the
    nodes; the log-sum corrections from the rate gaps; and the identity
    residuals confirm the exponential rewriting of each product at
    working precision.
    """
    if not 1 <= mode <= main_count:
        raise IndexError(f"mode {mode} outside 1..{main_count}")
    if len(rates) < main_count + 1:
        raise ValueError("need rates through the remainder index")
    lam = [ctx.num(r) for r in rates[: main_count + 1]]
    d = ctx.num(delta)
    if not d > 0:
        raise ValueError("delta must be positive")
    phi = [ctx.exp(-r * d) for r in lam]
    n = mode
    n_i = mode - 1
    tail_i = main_count
    one = ctx.num(1)

    tail_prod = one
    for j in range(main_count):
        if j == n_i:
            continue
        gap = phi[tail_i] - phi[j]
        tail_prod *= gap * gap
    lower_prod = one
    for j in range(n_i):
        gap = phi[n_i] - phi[j]
        lower_prod *= gap * gap
    upper_prod = one
    for j in range(n_i + 1, main_count):
        gap = phi[n_i] - phi[j]
        upper_prod *= gap * gap
    inv_sum = ctx.num(0)
    for j in range(main_count):
        if j == n_i:
            continue
        inv_sum += 1 / abs(phi[n_i] - phi[j])

    def neglog1mexp(x):
        return -_log_one_minus_exp(ctx, x)

    tail_log = sum(
        (neglog1mexp(d * (lam[tail_i] - lam[j])) for j in range(main_count) if j != n_i),
        start=ctx.num(0),
    )
    lower_log = sum(
        (neglog1mexp(d * (lam[n_i] - lam[j])) for j in range(n_i)),
        start=ctx.num(0),
    )
    upper_log = sum(
        (neglog1mexp(d * (lam[j] - lam[n_i])) for j in range(n_i + 1, main_count)),
        start=ctx.num(0),
    )
    correction = -2 * (tail_log - lower_log - upper_log)
    sigma = decay_exponent(mode, main_count)

    # identity residuals: each product equals exp(-2 delta (rate sum) - 2 log sum)
    def rel_residual(direct, rate_sum, log_sum):
        reference = ctx.exp(-2 * d * rate_sum - 2 * log_sum)
        scale = max(abs(direct), abs(reference))
        if scale == 0:
            return ctx.num(0)
        return abs(direct - reference) / scale

    tail_rate_sum = sum(
        (lam[j] for j in range(main_count) if j != n_i), start=ctx.num(0)
    )
    lower_rate_sum = sum((lam[j] for j in range(n_i)), start=ctx.num(0))
    upper_rate_sum = (main_count - mode) * lam[n_i]
    residuals = (
        rel_residual(tail_prod, tail_rate_sum, tail_log),
        rel_residual(lower_prod, lower_rate_sum, lower_log),
        rel_residual(upper_prod, upper_rate_sum, upper_log),
    )

    gaps = estimate_gap_constants(ctx, lam)
    lo_c, hi_c = gaps.lower, gaps.upper
    s = main_count

    tail_bracket = None
    if main_count >= 2:
        lower_val = dilog_gap_integral(
            ctx, 1, 2, d * hi_c * (2 * s + 1)
        ) + _log_one_minus_exp(ctx, d * hi_c * (s + 1 - n) * (2 * s + 1))
        upper_val = dilog_gap_integral(
            ctx, 0, None, d * lo_c * s
        ) + _log_one_minus_exp(ctx, d * lo_c * (s + 1 - n) * (s + 1))
        tail_bracket = (lower_val, upper_val)
    lower_bracket = None
    if n >= 2:
        lower_bracket = (
            dilog_gap_integral(ctx, 1, 2, d * hi_c * (2 * n - 1)),
            dilog_gap_integral(ctx, 0, None, d * lo_c * (n + 1)),
        )
    upper_bracket = None
    if n <= main_count - 1:
        upper_bracket = (
            dilog_gap_integral(ctx, 1, 2, d * hi_c * (s + n + 1)),
            dilog_gap_integral(ctx, 0, None, d * lo_c * (2 * n + 1)),
        )

    return BoundDiagnostics(
        mode=mode,
        main_count=main_count,
        delta=d,
        tail_gap_product=tail_prod,
        lower_gap_product=lower_prod,
        upper_gap_product=upper_prod,
        inverse_gap_sum=inv_sum,
        tail_log_sum=tail_log,
        lower_log_sum=lower_log,
        upper_log_sum=upper_log,
        log_correction=correction,
        decay_exponent=sigma,
        cardinal_square=tail_prod / (lower_prod * upper_prod),
        identity_residuals=residuals,
        tail_log_bracket=tail_bracket,
        lower_log_bracket=lower_bracket,
        upper_log_bracket=upper_bracket,
        gap_constants=gaps,
    )


def remainder_envelope_bound(ctx: NumericContext, gap_constants: GapConstants, delta_floor):
    """Uniform ceiling for ``cardinal_square * exp(2 delta lower decay)``.

    For steps at least ``delta_floor`` the squared cardinal evaluation at
    the remainder node, compensated by its leading exponential decay,
    stays below ``exp(2 (J(2 v d) + J(3 v d)))`` with ``v`` the lower gap
    constant, ``d`` the floor, and J the unbounded dilog integral.
    """
    v = ctx.num(gap_constants.lower)
    d = ctx.num(delta_floor)
    if not (v > 0 and d > 0):
        raise ValueError("need positive gap constant and floor")
    j2 = dilog_gap_integral(ctx, 0, None, 2 * v * d)
    j3 = dilog_gap_integral(ctx, 0, None, 3 * v * d)
    return ctx.exp(2 * (j2 + j3))


# ---------------------------------------------------------------------------
# decay-envelope measurement


class EnvelopeFit(NamedTuple):
    """Fitted ``|sensitivity(delta)| = scale * exp(-decay_rate * delta) /
    delta`` for one mode."""

    decay_rate: object
    scale: object


def envelope_fit(ctx: NumericContext, reports: Sequence[ConditionReport], component: str = "rate"):
    """Measure per-mode decay envelopes from a step sweep.

    Fits ``log |K| + log delta = log scale - decay_rate * delta`` by least
    squares over the given reports (same model, varying delta).  Needs at
    least five sweep points; pass only pre-breakdown reports.  Returns one
    EnvelopeFit per mode.
    """
    if component not in ("rate", "amplitude"):
        raise ValueError("component must be 'rate' or 'amplitude'")
    if len(reports) < 5:
        raise InsufficientDataError(
            f"envelope fit needs at least 5 sweep points, got {len(reports)}"
        )
    mode_count = reports[0].main_count
    for rep in reports:
        if rep.main_count != mode_count:
            raise ValueError("reports mix different mode counts")
    field = (
        "rate_sensitivity" if component == "rate" else "amplitude_sensitivity"
    )
    fits = []
    for i in range(mode_count):
        rows, targets = [], []
        for rep in reports:
            value = abs(getattr(rep, field)[i])
            if value == 0:
                raise InsufficientDataError(
                    f"mode {i + 1} has a vanishing sensitivity; no envelope"
                )
            d = ctx.num(rep.delta)
            rows.append([ctx.num(1), -d])
            targets.append(ctx.log(value * d))
        coeffs = linalg.least_squares(ctx, rows, targets)
        fits.append(EnvelopeFit(decay_rate=coeffs[1], scale=ctx.exp(coeffs[0])))
    return fits
