import math

import pytest

from rdmodes import expmodel
from rdmodes.precision import NumericContext

from conftest import assert_close


def _ladder(noise="1e-4"):
    return expmodel.ExponentialModel(
        main_rates=(1, 4, 9, 16),
        main_amplitudes=(1, 1, 1, 1),
        tail_rates=(25,),
        tail_amplitudes=(1,),
        noise_scale=noise,
    )


# ---------------------------------------------------------------------------
# model container


def test_model_validation():
    with pytest.raises(ValueError):
        expmodel.ExponentialModel(main_rates=(), main_amplitudes=())
    with pytest.raises(ValueError):
        expmodel.ExponentialModel(main_rates=(1, 2), main_amplitudes=(1,))
    with pytest.raises(ValueError):
        expmodel.ExponentialModel(main_rates=(2, 1), main_amplitudes=(1, 1))
    with pytest.raises(ValueError):
        # tail must continue the increase
        expmodel.ExponentialModel(
            main_rates=(1, 4), main_amplitudes=(1, 1), tail_rates=(3,), tail_amplitudes=(1,)
        )
    with pytest.raises(ValueError):
        expmodel.ExponentialModel(main_rates=(1,), main_amplitudes=(0,))
    with pytest.raises(ValueError):
        expmodel.ExponentialModel(
            main_rates=(1,), main_amplitudes=(1,), noise_scale=-1
        )


def test_amplitude_ratio_bound():
    with pytest.raises(ValueError):
        expmodel.ExponentialModel(
            main_rates=(1,),
            main_amplitudes=(1,),
            tail_rates=(2,),
            tail_amplitudes=(5,),
            amplitude_ratio_bound=2,
        )
    ok = expmodel.ExponentialModel(
        main_rates=(1,),
        main_amplitudes=(1,),
        tail_rates=(2,),
        tail_amplitudes=(1.5,),
        amplitude_ratio_bound=2,
    )
    assert ok.tail_count == 1


def test_nodes(ctx16):
    model = _ladder()
    main, tail = model.nodes(ctx16, 0.5)
    assert main[0] == pytest.approx(math.exp(-0.5))
    assert main[3] == pytest.approx(math.exp(-8.0))
    assert tail[0] == pytest.approx(math.exp(-12.5))


# ---------------------------------------------------------------------------
# sampling


def test_synthesize_against_direct_evaluation(ctx16):
    model = expmodel.ExponentialModel(
        main_rates=(1,),
        main_amplitudes=(2,),
        tail_rates=(3,),
        tail_amplitudes=(1,),
        noise_scale=0.5,
    )
    grid = expmodel.SampleGrid(delta=0.25, count=6)
    samples = expmodel.synthesize(ctx16, model, grid)
    for k in range(6):
        t = 0.25 * k
        expected = 2 * math.exp(-t) + 0.5 * math.exp(-3 * t)
        assert_close(samples.total[k], expected, 1e-14, f"sample {k}")
        assert samples.total[k] == pytest.approx(samples.main[k] + samples.tail[k])


def test_sample_grid_validation(ctx16):
    with pytest.raises(ValueError):
        expmodel.SampleGrid(delta=0, count=4)
    with pytest.raises(ValueError):
        expmodel.SampleGrid(delta=1, count=0)
    grid = expmodel.SampleGrid(delta=0.5, count=3)
    assert grid.times(ctx16) == [0.0, 0.5, 1.0]


# ---------------------------------------------------------------------------
# candidate parameters / residual / jacobian


def test_candidate_layout(ctx16):
    model = _ladder()
    cand = expmodel.CandidateParameters.from_model(ctx16, model)
    assert cand.mode_count == 4
    assert cand.amplitudes == (1.0, 1.0, 1.0, 1.0)
    assert cand.rates == (1.0, 4.0, 9.0, 16.0)
    with pytest.raises(ValueError):
        expmodel.CandidateParameters((1.0,))


def test_residual_zero_at_truth(ctx16):
    model = expmodel.ExponentialModel(main_rates=(1, 3), main_amplitudes=(2, -1))
    grid = expmodel.SampleGrid(delta=0.5, count=4)
    data = expmodel.synthesize(ctx16, model, grid).total
    cand = expmodel.CandidateParameters.from_model(ctx16, model)
    res = expmodel.residual(ctx16, cand, data, grid)
    assert max(abs(r) for r in res) < 1e-15
    with pytest.raises(ValueError):
        expmodel.residual(ctx16, cand, data[:-1], grid)


def test_jacobian_matches_central_differences():
    ctx = NumericContext(32)
    model = expmodel.ExponentialModel(main_rates=(1, 4), main_amplitudes=(2, -1))
    grid = expmodel.SampleGrid(delta=ctx.num("0.5"), count=4)
    data = [ctx.num(0)] * 4  # residual is affine in the data; any data works
    cand = expmodel.CandidateParameters.from_model(ctx, model)
    jac = expmodel.fit_jacobian(ctx, cand, grid)
    step = ctx.num("1e-12")
    for col in range(4):
        up = list(cand.values)
        dn = list(cand.values)
        up[col] += step
        dn[col] -= step
        r_up = expmodel.residual(ctx, expmodel.CandidateParameters(tuple(up)), data, grid)
        r_dn = expmodel.residual(ctx, expmodel.CandidateParameters(tuple(dn)), data, grid)
        for row in range(4):
            numeric = (r_up[row] - r_dn[row]) / (2 * step)
            assert abs(jac[row][col] - numeric) <= ctx.num("1e-18") * max(
                1, abs(numeric)
            )


# ---------------------------------------------------------------------------
# the reduced fit


def test_fit_noiseless_returns_truth(ctx16):
    model = expmodel.ExponentialModel(main_rates=(1, 4), main_amplitudes=(1, 1))
    grid = expmodel.SampleGrid(delta=0.5, count=4)
    fitted = expmodel.fit_reduced_model(ctx16, model, grid)
    assert fitted.rates == pytest.approx((1.0, 4.0), rel=1e-12)
    assert fitted.amplitudes == pytest.approx((1.0, 1.0), rel=1e-12)


def test_fit_drift_matches_first_order_sensitivity():
    # single main mode, remainder at rate 4, step 1: the fitted rate must
    # drift by (1 - e^-3) per unit remainder scale to first order
    ctx = NumericContext(32)
    eps = "1e-8"
    model = expmodel.ExponentialModel(
        main_rates=(1,),
        main_amplitudes=(1,),
        tail_rates=(4,),
        tail_amplitudes=(1,),
        noise_scale=eps,
    )
    grid = expmodel.SampleGrid(delta=ctx.num(1), count=2)
    fitted = expmodel.fit_reduced_model(ctx, model, grid)
    drift = (fitted.rates[0] - 1) / ctx.num(eps)
    assert_close(drift, 1 - math.exp(-3.0), 1e-6, "rate drift")
    amp_drift = (fitted.amplitudes[0] - 1) / ctx.num(eps)
    assert_close(amp_drift, 1.0, 1e-6, "amplitude drift")


def test_fit_grid_count_validation(ctx16):
    model = expmodel.ExponentialModel(main_rates=(1, 4), main_amplitudes=(1, 1))
    with pytest.raises(ValueError):
        expmodel.fit_reduced_model(ctx16, model, expmodel.SampleGrid(delta=0.5, count=3))


def test_fit_coincident_rates_degenerate(ctx16):
    # nearly coincident main rates plus a remainder that forces an actual
    # Newton step: the collocation Jacobian has two almost-equal column
    # pairs and the elimination must flag it
    model = expmodel.ExponentialModel(
        main_rates=(1.0, 1.0 + 1e-14),
        main_amplitudes=(1, 1),
        tail_rates=(4.0,),
        tail_amplitudes=(1,),
        noise_scale=1e-3,
    )
    grid = expmodel.SampleGrid(delta=0.5, count=4)
    with pytest.raises((expmodel.SingularJacobianError, expmodel.NewtonDivergedError)):
        expmodel.fit_reduced_model(ctx16, model, grid)
