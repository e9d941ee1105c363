"""Full 100-digit identification run into out/pipeline/, followed by a
summary of the error-versus-step curves: per-mode minima and the step
size past which each curve deteriorates.  Takes a few minutes."""
import csv
import os
import sys
from collections import defaultdict

from rdmodes.cli import main
from rdmodes.pde import breakdown_threshold

HERE = os.path.dirname(os.path.abspath(__file__))
ROOT = os.path.dirname(HERE)
OUT = os.path.join(ROOT, "out", "pipeline")


def summarize():
    curves = defaultdict(list)
    with open(os.path.join(OUT, "pipeline.csv")) as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    for row in rows[1:]:
        if row[5] != "ok":
            continue
        delta, _, n, err = float(row[0]), row[1], int(row[2]), float(row[3])
        curves[n].append((delta, err))
    for n in sorted(curves):
        pts = sorted(curves[n])
        deltas = [d for d, _ in pts]
        errs = [e for _, e in pts]
        best = min(range(len(errs)), key=errs.__getitem__)
        thr = breakdown_threshold(deltas, errs)
        note = f"deteriorates past delta={thr}" if thr is not None else "no interior minimum"
        print(f"mode {n}: best rel error {errs[best]:.3e} at delta={deltas[best]}; {note}")


def run():
    rc = main(
        ["pipeline", "--config", os.path.join(ROOT, "configs", "pipeline_full.toml"),
         "--out", OUT]
    )
    if rc != 0:
        return rc
    summarize()
    return 0


if __name__ == "__main__":
    sys.exit(run())
