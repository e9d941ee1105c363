"""Gap-product diagnostics for the square ladder, printed as a table
and written to out/bounds/.  Also fits the decay envelope of the rate
sensitivity over the reliable window and prints the per-mode slopes."""
import os
import sys

from rdmodes.cli import main
from rdmodes import conditioning
from rdmodes.expmodel import ExponentialModel
from rdmodes.precision import NumericContext

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(HERE)
OUT = os.path.join(ROOT, "out", "bounds")


def envelope_demo():
    ctx = NumericContext(32)
    model = ExponentialModel(
        main_rates=(1, 4, 9, 16),
        main_amplitudes=(1, 1, 1, 1),
        tail_rates=(25,),
        tail_amplitudes=(1,),
        noise_scale="1e-4",
    )
    reports = [
        conditioning.condition_closed_form(ctx, model, str(0.5 + 0.125 * i))
        for i in range(7)
    ]
    fits = conditioning.envelope_fit(ctx, reports, component="rate")
    print("rate-sensitivity envelope exp(zeta - rho*delta)/delta:")
    for n, fit in enumerate(fits, start=1):
        print(f"  mode {n}: rho={float(fit.decay_rate):.6f} "
              f"zeta={float(fit.scale):.6f}")


def run():
    rc = main(
        ["bounds", "--config", os.path.join(ROOT, "configs", "bounds_table.toml"),
         "--out", OUT]
    )
    if rc != 0:
        return rc
    envelope_demo()
    return 0


if __name__ == "__main__":
    sys.exit(run())
