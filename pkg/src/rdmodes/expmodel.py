"""Finite exponential-sum measurement models.

A model is a short list of decaying modes (rate + amplitude) plus an
optional faster-decaying remainder block whose contribution enters the
samples scaled by a small ``noise_scale``.  Sampling happens on a uniform
time grid, and the central operation fits the reduced (main-modes-only)
parameter set so that it reproduces the contaminated samples exactly --
the fixed point whose drift away from the true parameters the sensitivity
module quantifies.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

from . import linalg
from .precision import NumericContext


class SingularJacobianError(ArithmeticError):
    """The fit Jacobian lost rank at the current iterate."""


class NewtonDivergedError(ArithmeticError):
    """The reduced-model fit failed to settle on a root."""


@dataclass(frozen=True)
class ExponentialModel:
    """Main modes plus an optional scaled remainder block.

    ``samples(t) = sum_n main_amplitudes[n] * exp(-main_rates[n] t)
    + noise_scale * sum_m tail_amplitudes[m] * exp(-tail_rates[m] t)``.

    Rates must be strictly increasing across the concatenation of main and
    tail blocks, and every main amplitude must be nonzero (a vanishing
    main mode makes the recovery problem degenerate).
    """

    main_rates: tuple
    main_amplitudes: tuple
    tail_rates: tuple = ()
    tail_amplitudes: tuple = ()
    noise_scale: object = 0
    amplitude_ratio_bound: object = None

    def __post_init__(self):
        object.__setattr__(self, "main_rates", tuple(self.main_rates))
        object.__setattr__(self, "main_amplitudes", tuple(self.main_amplitudes))
        object.__setattr__(self, "tail_rates", tuple(self.tail_rates))
        object.__setattr__(self, "tail_amplitudes", tuple(self.tail_amplitudes))
        if not self.main_rates:
            raise ValueError("need at least one main mode")
        if len(self.main_rates) != len(self.main_amplitudes):
            raise ValueError("main rates and amplitudes differ in length")
        if len(self.tail_rates) != len(self.tail_amplitudes):
            raise ValueError("tail rates and amplitudes differ in length")
        merged = [float(r) for r in self.main_rates] + [
            float(r) for r in self.tail_rates
        ]
        for a, b in zip(merged, merged[1:]):
            if not b > a:
                raise ValueError("rates must increase strictly, main then tail")
        for y in self.main_amplitudes:
            if float(y) == 0:
                raise ValueError("main amplitudes must be nonzero")
        if float(self.noise_scale) < 0:
            raise ValueError("noise scale cannot be negative")
        if self.amplitude_ratio_bound is not None:
            bound = float(self.amplitude_ratio_bound)
            for tail_amp in self.tail_amplitudes:
                for main_amp in self.main_amplitudes:
                    if abs(float(tail_amp)) > bound * abs(float(main_amp)):
                        raise ValueError(
                            "tail/main amplitude ratio exceeds the declared bound"
                        )

    @property
    def main_count(self) -> int:
        return len(self.main_rates)

    @property
    def tail_count(self) -> int:
        return len(self.tail_rates)

    def nodes(self, ctx: NumericContext, delta):
        """Per-step decay factors ``exp(-rate * delta)``, main and tail."""
        d = ctx.num(delta)
        main = [ctx.exp(-ctx.num(r) * d) for r in self.main_rates]
        tail = [ctx.exp(-ctx.num(r) * d) for r in self.tail_rates]
        return main, tail


@dataclass(frozen=True)
class SampleGrid:
    """Uniform sampling times ``0, delta, ..., (count-1) * delta``."""

    delta: object
    count: int

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if self.count < 1:
            raise ValueError("need at least one sample")

    def times(self, ctx: NumericContext):
        d = ctx.num(self.delta)
        return [k * d for k in range(self.count)]


class Samples(NamedTuple):
    """Synthesised measurement series, with the two blocks kept apart."""

    total: list
    main: list
    tail: list


def synthesize(ctx: NumericContext, model: ExponentialModel, grid: SampleGrid) -> Samples:
    """Sample the model on the grid; the tail block enters scaled.

    Decay factors are raised to successive powers multiplicatively, which
    keeps every term at full relative accuracy however deep the decay.
    """
    main_nodes, tail_nodes = model.nodes(ctx, grid.delta)
    eps = ctx.num(model.noise_scale)
    main_amps = [ctx.num(y) for y in model.main_amplitudes]
    tail_amps = [ctx.num(y) for y in model.tail_amplitudes]
    main_pow = [ctx.num(1) for _ in main_nodes]
    tail_pow = [ctx.num(1) for _ in tail_nodes]
    main_out, tail_out, total = [], [], []
    for k in range(grid.count):
        m = sum(
            (a * p for a, p in zip(main_amps, main_pow)), start=ctx.num(0)
        )
        t = sum(
            (a * p for a, p in zip(tail_amps, tail_pow)), start=ctx.num(0)
        )
        main_out.append(m)
        tail_out.append(eps * t)
        total.append(m + eps * t)
        main_pow = [p * n for p, n in zip(main_pow, main_nodes)]
        tail_pow = [p * n for p, n in zip(tail_pow, tail_nodes)]
    return Samples(total=total, main=main_out, tail=tail_out)


@dataclass(frozen=True)
class CandidateParameters:
    """Reduced-model iterate: amplitudes and rates interleaved.

    ``values = (a_1, r_1, a_2, r_2, ...)`` -- the layout the fit Jacobian
    and the sensitivity linear solve share.
    """

    values: tuple

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(self.values))
        if len(self.values) == 0 or len(self.values) % 2 != 0:
            raise ValueError("values must interleave amplitude/rate pairs")

    @classmethod
    def from_model(cls, ctx: NumericContext, model: ExponentialModel):
        vals = []
        for a, r in zip(model.main_amplitudes, model.main_rates):
            vals.append(ctx.num(a))
            vals.append(ctx.num(r))
        return cls(tuple(vals))

    @property
    def mode_count(self) -> int:
        return len(self.values) // 2

    @property
    def amplitudes(self) -> tuple:
        return self.values[0::2]

    @property
    def rates(self) -> tuple:
        return self.values[1::2]


def residual(ctx: NumericContext, candidate: CandidateParameters, data: Sequence, grid: SampleGrid):
    """Reduced-model samples minus the measured data, per grid point."""
    if len(data) != grid.count:
        raise ValueError(f"data length {len(data)} does not match grid {grid.count}")
    d = ctx.num(grid.delta)
    amps = [ctx.num(a) for a in candidate.amplitudes]
    nodes = [ctx.exp(-ctx.num(r) * d) for r in candidate.rates]
    powers = [ctx.num(1) for _ in nodes]
    out = []
    for k in range(grid.count):
        acc = -ctx.num(data[k])
        for a, p in zip(amps, powers):
            acc += a * p
        out.append(acc)
        powers = [p * n for p, n in zip(powers, nodes)]
    return out


def fit_jacobian(ctx: NumericContext, candidate: CandidateParameters, grid: SampleGrid):
    """Derivative of the residual w.r.t. the interleaved parameters.

    Column ``2n`` is the bare decay power of mode n (amplitude slot);
    column ``2n+1`` is ``-t_k * a_n`` times the same power (rate slot).
    """
    d = ctx.num(grid.delta)
    amps = [ctx.num(a) for a in candidate.amplitudes]
    nodes = [ctx.exp(-ctx.num(r) * d) for r in candidate.rates]
    powers = [ctx.num(1) for _ in nodes]
    rows = []
    for k in range(grid.count):
        t_k = k * d
        row = []
        for a, p in zip(amps, powers):
            row.append(p)
            row.append(-t_k * a * p)
        rows.append(row)
        powers = [p * n for p, n in zip(powers, nodes)]
    return rows


_MAX_NEWTON_STEPS = 50
_MAX_RESIDUAL_GROWTHS = 5


def fit_reduced_model(
    ctx: NumericContext, model: ExponentialModel, grid: SampleGrid
) -> CandidateParameters:
    """Parameters of the reduced model that reproduce the full samples.

    Newton iteration on the square collocation system, started from the
    true main parameters (the target sits within a noise-scale-sized
    neighbourhood for small noise).  Converges when the residual drops
    below ``10**(-digits+6)`` of the data scale; raises
    NewtonDivergedError after 50 steps or 5 consecutive residual
    increases, and SingularJacobianError when the linearisation loses
    rank.
    """
    if grid.count != 2 * model.main_count:
        raise ValueError(
            f"square fit needs {2 * model.main_count} samples, grid has {grid.count}"
        )
    data = synthesize(ctx, model, grid).total
    scale = max(abs(v) for v in data)
    if scale == 0:
        raise ValueError("all-zero data cannot anchor a fit")
    target = ctx.tol(6) * scale
    current = CandidateParameters.from_model(ctx, model)
    best_norm = None
    growths = 0
    for _ in range(_MAX_NEWTON_STEPS):
        res = residual(ctx, current, data, grid)
        norm = max(abs(v) for v in res)
        if norm <= target:
            return current
        if best_norm is not None and norm >= best_norm:
            growths += 1
            if growths >= _MAX_RESIDUAL_GROWTHS:
                raise NewtonDivergedError(
                    f"residual stalled at {float(norm):.3e} "
                    f"(target {float(target):.3e})"
                )
        else:
            growths = 0
            best_norm = norm
        jac = fit_jacobian(ctx, current, grid)
        try:
            step = linalg.solve_linear(ctx, jac, [-v for v in res])
        except linalg.SingularMatrixError as exc:
            raise SingularJacobianError(str(exc)) from exc
        current = CandidateParameters(
            tuple(v + s for v, s in zip(current.values, step))
        )
    raise NewtonDivergedError(
        f"no convergence in {_MAX_NEWTON_STEPS} steps; last residual "
        f"{float(norm):.3e} vs target {float(target):.3e}"
    )
