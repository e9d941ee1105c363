"""Experiment driver: reproducible sweep runs written as CSV + manifest.

Subcommands: ``condition`` (sensitivity sweep over the step), ``esprit``
(recovery-error sweep at a given remainder scale), ``bounds`` (gap
diagnostics tables with inequality checks), ``simulate`` (field
snapshots and the measurement series), ``pipeline`` (the full
simulate/measure/subsample/fit/recover/regress run), and ``verify``
(acceptance suite).  Every run writes a manifest JSON recording the
effective configuration digest, seed, and precision; every CSV names
the manifest that produced it in its first line.  CSV bytes are
deterministic for a fixed configuration and seed — timestamps live only
in the manifest.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import subprocess
import sys
from datetime import datetime, timezone

import mpmath

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - 3.10 branch
    import tomli as tomllib

from . import __version__
from . import conditioning
from . import esprit as esprit_mod
from . import pde as pde_mod
from .expmodel import ExponentialModel, SampleGrid, synthesize
from .precision import STANDARD_DIGITS, NumericContext
from .spectral import SturmLiouvilleProblem, analytic_spectrum


class CliError(ValueError):
    """Configuration or input validation failure (exit code 1)."""


class BreakdownError(RuntimeError):
    """Numerical breakdown that voids the run (exit code 2)."""

    def __init__(self, message, delta=None):
        super().__init__(message)
        self.delta = delta


# ---------------------------------------------------------------------------
# configuration plumbing


_SWEEP_DEFAULTS = {
    "condition": (0.5, 6.0, 23),
    "esprit": (0.5, 1.25, 7),
    "bounds": (0.5, 4.0, 8),
}


def _load_config(path):
    if path is None:
        return {}
    if not os.path.exists(path):
        raise CliError(f"config file not found: {path}")
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise CliError(f"config file {path} does not parse: {exc}") from exc


def _effective_config(args):
    """Merge config file and flags into one flat, digestible mapping."""
    cfg = _load_config(args.config)
    eff = {
        "subcommand": args.subcommand,
        "precision": args.precision
        if args.precision is not None
        else int(cfg.get("precision", 32)),
        "seed": args.seed if args.seed is not None else int(cfg.get("seed", 1)),
        "n1": args.n1 if args.n1 is not None else int(cfg.get("n1", 4)),
        "n2": args.n2 if args.n2 is not None else int(cfg.get("n2", 1)),
    }
    if eff["precision"] not in STANDARD_DIGITS:
        raise CliError(
            f"precision must be one of {STANDARD_DIGITS}, got {eff['precision']}"
        )
    if eff["n1"] < 1 or eff["n2"] < 0:
        raise CliError("n1 must be >= 1 and n2 >= 0")

    sweep = dict(cfg.get("sweep", {}))
    lo, hi, steps = _SWEEP_DEFAULTS.get(args.subcommand, (0.5, 4.0, 8))
    lo = args.delta_min if args.delta_min is not None else float(sweep.get("delta_min", lo))
    hi = args.delta_max if args.delta_max is not None else float(sweep.get("delta_max", hi))
    steps = (
        args.delta_steps
        if args.delta_steps is not None
        else int(sweep.get("delta_steps", steps))
    )
    explicit = sweep.get("deltas")
    if explicit is not None:
        deltas = [float(d) for d in explicit]
    elif steps == 1:
        deltas = [lo]
    else:
        deltas = [lo + i * (hi - lo) / (steps - 1) for i in range(steps)]
    if not deltas or any(d <= 0 for d in deltas):
        raise CliError("sweep steps must be positive")
    eff["deltas"] = deltas

    model = dict(cfg.get("model", {}))
    eff["epsilon"] = (
        args.epsilon
        if args.epsilon is not None
        else float(model.get("epsilon", cfg.get("epsilon", 1e-4)))
    )
    if eff["epsilon"] < 0:
        raise CliError("epsilon must be nonnegative")
    for key in ("rates", "amplitudes", "tail_rates", "tail_amplitudes"):
        if key in model:
            eff[f"model_{key}"] = [float(v) for v in model[key]]

    p = dict(cfg.get("pde", {}))
    eff["diffusion"] = float(p.get("diffusion", 0.1))
    eff["reaction"] = float(p.get("reaction", 0.1))
    eff["interior_points"] = int(p.get("interior_points", 60))
    eff["stencil_order"] = int(p.get("stencil_order", 4))
    eff["horizon"] = float(p.get("horizon", 2.0))
    eff["sample_count"] = int(p.get("sample_count", 1025))
    eff["initial_mode_count"] = int(p.get("initial_mode_count", eff["n1"] + eff["n2"]))
    eff["snapshot_count"] = int(p.get("snapshot_count", 5))

    filt = dict(cfg.get("filter", {}))
    if "coefficients" in filt:
        eff["filter_coefficients"] = [float(v) for v in filt["coefficients"]]

    pipe = dict(cfg.get("pipeline", {}))
    if args.strides is not None:
        try:
            strides = [int(s) for s in args.strides.split(",") if s.strip()]
        except ValueError as exc:
            raise CliError(f"--strides must be comma-separated integers: {exc}")
    else:
        strides = [int(s) for s in pipe.get(
            "strides", [1, 2, 3, 4, 6, 8, 12, 16, 24, 32, 48, 64, 96, 128, 146]
        )]
    if any(s < 1 for s in strides):
        raise CliError("strides must be positive")
    eff["strides"] = strides
    return eff


def _digest(eff):
    canon = json.dumps(eff, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


# ---------------------------------------------------------------------------
# output plumbing


def _fmt(x):
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, str):
        return x
    f = float(x)
    if f == 0:
        if isinstance(x, mpmath.mpf) and x != 0:
            return mpmath.nstr(x, 13, strip_zeros=False)
        return "0"
    if not math.isfinite(f):
        return "inf" if f > 0 else ("-inf" if f < 0 else "nan")
    if abs(f) < 1e-4:
        return f"{f:.12e}"
    return f"{f:.12g}"


def _write_csv(out_dir, name, manifest_name, units, header, rows):
    path = os.path.join(out_dir, name)
    lines = [f"# manifest: {manifest_name}", f"# units: {units}", ",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _write_manifest(out_dir, eff, outputs):
    digest = _digest(eff)
    name = f"manifest-{eff['subcommand']}-{digest}.json"
    payload = {
        "subcommand": eff["subcommand"],
        "config_digest": digest,
        "config": eff,
        "seed": eff["seed"],
        "precision": eff["precision"],
        "outputs": sorted(os.path.basename(p) for p in outputs),
        "package_version": __version__,
        "created": datetime.now(timezone.utc).isoformat(),
    }
    with open(os.path.join(out_dir, name), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
    return name


def _manifest_name(eff):
    return f"manifest-{eff['subcommand']}-{_digest(eff)}.json"


# ---------------------------------------------------------------------------
# model assembly


def _square_ladder(n1, n2):
    rates = [float(n * n) for n in range(1, n1 + 1)]
    tail = [float(n * n) for n in range(n1 + 1, n1 + n2 + 1)]
    return rates, [1.0] * n1, tail, [1.0] * n2


def _build_model(eff):
    """Exponential model from config, defaulting to the square ladder."""
    n1, n2 = eff["n1"], eff["n2"]
    rates = eff.get("model_rates")
    if rates is None:
        rates, amps, tail_rates, tail_amps = _square_ladder(n1, n2)
    else:
        amps = eff.get("model_amplitudes", [1.0] * len(rates))
        tail_rates = eff.get("model_tail_rates", [])
        tail_amps = eff.get("model_tail_amplitudes", [1.0] * len(tail_rates))
        n1 = len(rates)
    return ExponentialModel(
        main_rates=tuple(rates),
        main_amplitudes=tuple(amps),
        tail_rates=tuple(tail_rates),
        tail_amplitudes=tuple(tail_amps),
        noise_scale=eff["epsilon"],
    )


def _vc_setup(ctx, eff):
    """Problem, config, and filter for the simulation commands."""
    problem = SturmLiouvilleProblem(
        diffusion=str(eff["diffusion"]), reaction=str(eff["reaction"])
    )
    count = eff["initial_mode_count"]
    root2 = ctx.sqrt(ctx.num(2))
    initial = tuple(
        ctx.num((-1) ** (n + 1)) / (root2 * n**3) for n in range(1, count + 1)
    )
    config = pde_mod.PdeConfig(
        problem=problem,
        initial_modes=initial,
        interior_points=eff["interior_points"],
        stencil_order=eff["stencil_order"],
        horizon=str(eff["horizon"]),
    )
    coeffs = eff.get("filter_coefficients")
    if coeffs is not None:
        filt = pde_mod.MeasurementFilter(
            coefficients=tuple(coeffs),
            main_count=eff["n1"],
            noise_scale=str(eff["epsilon"]),
        )
    else:
        filt = pde_mod.random_filter(
            seed=eff["seed"],
            main_count=eff["n1"],
            tail_count=eff["n2"],
            noise_scale=str(eff["epsilon"]),
        )
    return problem, config, filt


# ---------------------------------------------------------------------------
# subcommands


def cmd_condition(eff, out_dir):
    ctx = NumericContext(eff["precision"])
    model = _build_model(eff)
    if model.tail_count < 1:
        raise CliError("condition sweep needs at least one remainder mode (n2 >= 1)")
    rows = []
    failures = []
    for delta in eff["deltas"]:
        try:
            report = conditioning.assess_condition(ctx, model, str(delta))
        except (ArithmeticError, ValueError) as exc:
            failures.append((delta, exc))
            for n in range(1, model.main_count + 1):
                rows.append((delta, n, "", "", False, type(exc).__name__))
            continue
        chosen = report.closed_form or report.linear_solve
        for n in range(1, model.main_count + 1):
            rows.append(
                (
                    delta,
                    n,
                    chosen.amplitude_sensitivity[n - 1],
                    chosen.rate_sensitivity[n - 1],
                    report.reliable,
                    "ok",
                )
            )
    if len(failures) == len(eff["deltas"]):
        first = failures[0]
        raise BreakdownError(
            f"every sweep point failed; first breakdown at delta={first[0]}: {first[1]}",
            delta=first[0],
        )
    manifest = _manifest_name(eff)
    path = _write_csv(
        out_dir,
        "condition.csv",
        manifest,
        "delta [time]; K_y, K_lambda [dimensionless]; reliable [flag]",
        ("delta", "n", "K_y", "K_lambda", "reliable", "status"),
        rows,
    )
    return [path]


def cmd_esprit(eff, out_dir):
    ctx = NumericContext(eff["precision"])
    if eff["epsilon"] <= 0:
        raise CliError("esprit sweep needs a positive epsilon")
    model = _build_model(eff)
    rows = []
    failures = []
    for delta in eff["deltas"]:
        d = ctx.num(str(delta))
        grid = SampleGrid(delta=d, count=2 * model.main_count)
        samples = synthesize(ctx, model, grid)
        try:
            fit = esprit_mod.esprit_fit(
                ctx,
                samples.total,
                esprit_mod.FitConfig(main_count=model.main_count, delta=d),
            )
            fit = esprit_mod.rescaled_errors(
                ctx,
                fit,
                model.main_rates,
                model.main_amplitudes,
                model.noise_scale,
            )
        except (ArithmeticError, ValueError) as exc:
            failures.append((delta, exc))
            for n in range(1, model.main_count + 1):
                rows.append((delta, n, "", "", type(exc).__name__))
            continue
        for n in range(1, model.main_count + 1):
            rows.append(
                (delta, n, fit.rate_errors[n - 1], fit.amplitude_errors[n - 1], "ok")
            )
    if len(failures) == len(eff["deltas"]):
        first = failures[0]
        raise BreakdownError(
            f"every sweep point failed; first breakdown at delta={first[0]}: {first[1]}",
            delta=first[0],
        )
    manifest = _manifest_name(eff)
    path = _write_csv(
        out_dir,
        "esprit.csv",
        manifest,
        "delta [time]; E_lambda, E_y [dimensionless]",
        ("delta", "n", "E_lambda", "E_y", "status"),
        rows,
    )
    return [path]


def cmd_bounds(eff, out_dir):
    ctx = NumericContext(eff["precision"])
    model = _build_model(eff)
    if model.tail_count < 1:
        raise CliError("bound diagnostics need a remainder rate (n2 >= 1)")
    rates = list(model.main_rates) + [model.tail_rates[0]]
    n1 = model.main_count
    rows = []
    for delta in eff["deltas"]:
        for n in range(1, n1 + 1):
            diag = conditioning.bound_diagnostics(ctx, rates, n, n1, str(delta))
            checks_ok = max(float(r) for r in diag.identity_residuals) <= 1e-10
            bracket_ok = True
            for value, bracket in (
                (diag.tail_log_sum, diag.tail_log_bracket),
                (diag.lower_log_sum, diag.lower_log_bracket),
                (diag.upper_log_sum, diag.upper_log_bracket),
            ):
                if bracket is None:
                    continue
                lo, hi = bracket
                if not (lo <= value <= hi):
                    bracket_ok = False
            rows.append(
                (
                    delta,
                    n,
                    n1,
                    diag.tail_gap_product,
                    diag.lower_gap_product,
                    diag.upper_gap_product,
                    diag.inverse_gap_sum,
                    diag.tail_log_sum,
                    diag.lower_log_sum,
                    diag.upper_log_sum,
                    diag.log_correction,
                    diag.decay_exponent,
                    diag.cardinal_square,
                    checks_ok,
                    bracket_ok,
                )
            )
    manifest = _manifest_name(eff)
    path = _write_csv(
        out_dir,
        "bounds.csv",
        manifest,
        "delta [time]; gap products, log sums, cardinal_square [dimensionless]; "
        "decay_exponent [integer]",
        (
            "delta",
            "n",
            "main_count",
            "tail_gap_product",
            "lower_gap_product",
            "upper_gap_product",
            "inverse_gap_sum",
            "tail_log_sum",
            "lower_log_sum",
            "upper_log_sum",
            "log_correction",
            "decay_exponent",
            "cardinal_square",
            "identities_ok",
            "brackets_ok",
        ),
        rows,
    )
    return [path]


def cmd_simulate(eff, out_dir):
    ctx = NumericContext(eff["precision"])
    _, config, filt = _vc_setup(ctx, eff)
    try:
        field = pde_mod.simulate(ctx, config)
        horizon = float(eff["horizon"])
        count = eff["sample_count"]
        times = [horizon * k / (count - 1) for k in range(count)]
        series = pde_mod.measure(ctx, field, filt, times)
        snap_count = max(2, eff["snapshot_count"])
        snap_times = [horizon * k / (snap_count - 1) for k in range(snap_count)]
        field_rows = []
        for t in snap_times:
            values = field.snapshot(ctx, t)
            for x, z in zip(field.grid, values):
                field_rows.append((t, x, z))
    except (ArithmeticError, ValueError) as exc:
        raise BreakdownError(f"simulation failed: {exc}") from exc
    manifest = _manifest_name(eff)
    p1 = _write_csv(
        out_dir,
        "field.csv",
        manifest,
        "t [time]; x [space]; z [state]",
        ("t", "x", "z"),
        field_rows,
    )
    p2 = _write_csv(
        out_dir,
        "measurements.csv",
        manifest,
        "t [time]; y [state, filter-weighted average]",
        ("t", "y"),
        list(zip(times, series)),
    )
    return [p1, p2]


def cmd_pipeline(eff, out_dir):
    ctx = NumericContext(eff["precision"])
    _, config, filt = _vc_setup(ctx, eff)
    try:
        records = pde_mod.run_pipeline(
            ctx, config, filt, eff["strides"], sample_count=eff["sample_count"]
        )
    except (ArithmeticError, ValueError) as exc:
        raise BreakdownError(f"pipeline failed: {exc}") from exc
    ok = [r for r in records if r.status == "ok"]
    if not ok:
        first = records[0]
        raise BreakdownError(
            f"every stride failed; first breakdown at delta={float(first.delta)} "
            f"({first.status})",
            delta=float(first.delta),
        )
    lam_rows = []
    pq_rows = []
    for rec in records:
        if rec.status != "ok":
            for n in range(1, filt.main_count + 1):
                lam_rows.append((float(rec.delta), rec.stride, n, "", "", rec.status))
            pq_rows.append((float(rec.delta), rec.stride, "", "", "", "", rec.status))
            continue
        for n in range(1, filt.main_count + 1):
            lam_rows.append(
                (
                    float(rec.delta),
                    rec.stride,
                    n,
                    rec.rate_rel_errors[n - 1],
                    rec.initial_modes[n - 1],
                    "ok",
                )
            )
        p_hat, q_hat = rec.diffusion_reaction
        pq_rows.append(
            (
                float(rec.delta),
                rec.stride,
                p_hat,
                q_hat,
                rec.coefficient_rel_errors[0],
                rec.coefficient_rel_errors[1],
                "ok",
            )
        )
    manifest = _manifest_name(eff)
    p1 = _write_csv(
        out_dir,
        "pipeline.csv",
        manifest,
        "delta [time]; lambda_rel_error [dimensionless]; initial_mode [state]",
        ("delta", "stride", "n", "lambda_rel_error", "initial_mode", "status"),
        lam_rows,
    )
    p2 = _write_csv(
        out_dir,
        "pipeline_pq.csv",
        manifest,
        "delta [time]; p_hat [diffusion]; q_hat [reaction]; errors [dimensionless]",
        ("delta", "stride", "p_hat", "q_hat", "p_rel_error", "q_rel_error", "status"),
        pq_rows,
    )
    return [p1, p2]


def _find_acceptance_suite():
    here = os.path.abspath(os.getcwd())
    candidates = [os.path.join(here, "tests", "test_acceptance.py")]
    pkg_root = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
    candidates.append(os.path.join(pkg_root, "tests", "test_acceptance.py"))
    for cand in candidates:
        if os.path.exists(cand):
            return cand
    raise CliError(
        "cannot locate tests/test_acceptance.py (run from the repository root)"
    )


def cmd_verify(eff, out_dir):
    suite = _find_acceptance_suite()
    result = subprocess.run([sys.executable, "-m", "pytest", suite, "-v"])
    if result.returncode != 0:
        raise CliError(f"acceptance suite failed (pytest exit {result.returncode})")
    return []


_COMMANDS = {
    "condition": cmd_condition,
    "esprit": cmd_esprit,
    "bounds": cmd_bounds,
    "simulate": cmd_simulate,
    "pipeline": cmd_pipeline,
    "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # validation failures exit 1, not argparse's 2
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser():
    parser = _Parser(prog="rdmodes", description=__doc__)
    parser.add_argument("subcommand", choices=sorted(_COMMANDS))
    parser.add_argument("--config", default=None, help="TOML configuration file")
    parser.add_argument(
        "--precision", type=int, choices=list(STANDARD_DIGITS), default=None
    )
    parser.add_argument("--seed", type=int, default=None)
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--delta-min", type=float, default=None)
    parser.add_argument("--delta-max", type=float, default=None)
    parser.add_argument("--delta-steps", type=int, default=None)
    parser.add_argument("--epsilon", type=float, default=None)
    parser.add_argument("--n1", type=int, default=None)
    parser.add_argument("--n2", type=int, default=None)
    parser.add_argument(
        "--strides", default=None, help="comma-separated subsampling strides"
    )
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        eff = _effective_config(args)
        out_dir = args.out
        os.makedirs(out_dir, exist_ok=True)
        outputs = _COMMANDS[args.subcommand](eff, out_dir)
        if outputs:
            manifest = _write_manifest(out_dir, eff, outputs)
            for path in outputs:
                print(path)
            print(os.path.join(out_dir, manifest))
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except BreakdownError as exc:
        where = "" if exc.delta is None else f" (delta={exc.delta})"
        print(f"numerical breakdown{where}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
