"""Sensitivity sweep and matching recovery-error sweep for the square
ladder, written to out/sensitivity/.  The two CSVs line up row for row
over the shared window: rescaled recovery errors track the predicted
sensitivities."""
import os
import sys

from rdmodes.cli import main

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(HERE)
OUT = os.path.join(ROOT, "out", "sensitivity")


def run():
    rc = main(
        ["condition", "--config", os.path.join(ROOT, "configs", "condition_sweep.toml"),
         "--out", OUT]
    )
    if rc != 0:
        return rc
    return main(
        ["esprit", "--config", os.path.join(ROOT, "configs", "esprit_sweep.toml"),
         "--out", OUT]
    )


if __name__ == "__main__":
    sys.exit(run())
