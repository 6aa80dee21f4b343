"""Command-line entry point: ``tsbandit {run,sweep,bounds,verify}``.

All CSV output is UTF-8 with LF line endings, always has a header row, and
writes floats in their shortest round-trip form.
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from . import __version__
from .bandit_core import ArmModel, BanditInstance
from .bounds import BOUND_KINDS, BoundSpec, bound_curve
from .config import BoundsSpec, ConfigError, dump_config, load_config, parse_horizon
from .simulator import run_generator, run_monte_carlo
from .verification import BUDGETS, SUITES, run_suite

logger = logging.getLogger("tsbandit")

REGRET_COLUMNS = ("experiment_id", "policy", "T_checkpoint", "mean_regret", "stderr", "runs", "seed")
SWEEP_COLUMNS = REGRET_COLUMNS + ("cell", "delta", "horizon", "delay")
DIAGNOSTICS_COLUMNS = ("experiment_id", "step", "e2_violations", "e_violations", "runs")
BOUND_COLUMNS = ("bound_kind", "T", "value", "label")
VERIFY_COLUMNS = ("check_name", "status", "observed", "threshold")


def fmt(value):
    """Shortest round-trip text for numbers; NaN and infinities spelled ``nan``/``inf``/``-inf``."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def csv_text(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def regret_rows(experiment_id, policy, summary, seed):
    for cp, mean, se in zip(summary.checkpoints, summary.mean_regret, summary.stderr):
        yield (experiment_id, policy, int(cp), float(mean), float(se), summary.runs, seed)


def diagnostics_rows(experiment_id, summary):
    for t, (e2, e) in enumerate(zip(summary.e2_step_counts, summary.e_step_counts), start=1):
        yield (experiment_id, t, int(e2), int(e), summary.runs)


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


class CliError(Exception):
    pass


# ---------------------------------------------------------------------------
# subcommands

def _load(args):
    if args.config is None:
        raise CliError("--config is required")
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}") from None
    if args.seed is not None:
        cfg = replace(cfg, run=replace(cfg.run, seed=args.seed))
    if args.workers is not None:
        cfg = replace(cfg, workers=args.workers)
    return cfg


def cmd_run(args):
    cfg = _load(args)
    out = args.out or cfg.output_path
    if args.echo_config:
        sys.stderr.write(dump_config(cfg))
    summary = run_monte_carlo(cfg.run, cfg.instance, cfg.runs, cfg.workers)
    _write(out, csv_text(REGRET_COLUMNS, regret_rows(cfg.experiment_id, cfg.run.policy, summary, cfg.run.seed)))
    diag_path = args.diagnostics_out or cfg.diagnostics_path
    if cfg.run.diagnostics and diag_path:
        _write(diag_path, csv_text(DIAGNOSTICS_COLUMNS, diagnostics_rows(cfg.experiment_id, summary)))
    logger.info("run %s: %d runs, T=%d, final mean regret %s",
                cfg.experiment_id, cfg.runs, cfg.run.horizon, fmt(summary.mean_regret[-1]))
    return 0


def sweep_cells(cfg):
    """Expand the sweep grid into ``(index, coords, run_config, instance)`` cells.

    Every cell is validated before any is run; cell ``i`` gets the seed
    drawn from stream ``i`` of the base seed.
    """
    sw = cfg.sweep
    if sw is None:
        raise CliError("config has no 'sweep' section")
    axes = {
        "delta": sw.delta or (None,),
        "horizon": sw.horizon or (cfg.run.horizon,),
        "policy": sw.policy or (cfg.run.policy,),
        "delay": sw.delay or (cfg.run.delay,),
    }
    cells = []
    for i, (delta, horizon, policy, delay) in enumerate(itertools.product(*axes.values())):
        if delta is None:
            instance = cfg.instance
        else:
            instance = BanditInstance((ArmModel.bernoulli(sw.base_mean),
                                       ArmModel.bernoulli(max(sw.base_mean - delta, 0.0))), True)
        cps = sorted({c for c in cfg.run.checkpoints if c <= horizon} | {horizon})
        seed = int(run_generator(cfg.run.seed, i).integers(0, 2**63 - 1))
        try:
            run = replace(cfg.run, horizon=horizon, policy=policy, delay=delay, checkpoints=tuple(cps), seed=seed)
        except ValueError as exc:
            raise CliError(f"sweep cell {i}: {exc}") from None
        cells.append((i, {"delta": delta, "horizon": horizon, "delay": delay}, run, instance))
    return cells


def _delay_label(delay):
    return delay.kind if delay.kind == "none" else f"{delay.kind}:{delay.param}"


def cmd_sweep(args):
    cfg = _load(args)
    cells = sweep_cells(cfg)
    rows = []
    for i, coords, run, instance in cells:
        summary = run_monte_carlo(run, instance, cfg.runs, cfg.workers)
        exp_id = f"{cfg.experiment_id}/cell{i:04d}"
        for row in regret_rows(exp_id, run.policy, summary, run.seed):
            delta = coords["delta"] if coords["delta"] is not None else ""
            rows.append(row + (i, delta, run.horizon, _delay_label(run.delay)))
    _write(args.out or cfg.output_path, csv_text(SWEEP_COLUMNS, rows))
    return 0


def _bound_specs(instance, kinds, constant):
    """One validated BoundSpec per kind; errors name the kind and the arm."""
    means = instance.means
    best = int(np.argmax(means))
    specs = []
    for kind in kinds:
        gaps = [(i, float(means[best] - m)) for i, m in enumerate(means) if i != best]
        bad = [(i, g) for i, g in gaps if not 0.0 < g <= 1.0]
        if kind != "lai_robbins_lower" and bad:
            i, g = bad[0]
            raise CliError(f"bound {kind}: arm {i} has gap {g!r}, which must lie in (0, 1]")
        if kind == "lai_robbins_lower":
            bad = [i for i, m in enumerate(means) if not 0.0 < m < 1.0]
            if bad:
                raise CliError(f"bound {kind}: arm {bad[0]} has mean {means[bad[0]]!r}, which must lie in (0, 1)")
            ties = [i for i, m in enumerate(means) if m == means[best] and i != best]
            if ties:
                raise CliError(f"bound {kind}: arm {ties[0]} ties the best mean; a unique best arm is required")
        try:
            spec = BoundSpec(kind, gaps=tuple(g for _, g in gaps), means=tuple(means.tolist()),
                             constant=constant if kind == "remark1_shape" else None)
            spec.validate()
        except ValueError as exc:
            raise CliError(f"bound {kind}: {exc}") from None
        specs.append(spec)
    return specs


def cmd_bounds(args):
    if args.config is not None:
        cfg = _load(args)
        instance, horizons, kinds, constant = (cfg.instance, cfg.bounds.horizons, cfg.bounds.kinds,
                                               cfg.bounds.constant)
    else:
        defaults = BoundsSpec()
        instance, horizons, kinds, constant = None, defaults.horizons, defaults.kinds, None
    if args.means is not None:
        instance = BanditInstance.from_means(_float_list(args.means, "--means"))
    if args.horizons is not None:
        horizons = [parse_horizon(h) for h in _split(args.horizons)]
    if args.kinds is not None:
        kinds = _split(args.kinds)
        bad = [k for k in kinds if k not in BOUND_KINDS]
        if bad:
            raise CliError(f"unknown bound kind {bad[0]!r}; expected one of {list(BOUND_KINDS)}")
    if args.constant is not None:
        constant = args.constant
    if instance is None and kinds:
        raise CliError("give --config or --means to define the instance")
    specs = _bound_specs(instance, kinds, constant) if kinds else []
    rows = []
    for spec in specs:
        try:
            curve = bound_curve(spec, horizons)
        except ValueError as exc:
            raise CliError(f"bound {spec.kind}: {exc}") from None
        rows.extend((spec.kind, T, value, curve.label) for T, value in curve.points)
    _write(args.out, csv_text(BOUND_COLUMNS, rows))
    return 0


def _split(text):
    return [t.strip() for t in text.split(",") if t.strip()] if text.strip() else []


def _float_list(text, flag):
    try:
        return [float(t) for t in _split(text)]
    except ValueError:
        raise CliError(f"{flag} expects comma-separated numbers, got {text!r}") from None


def cmd_verify(args):
    results = run_suite(args.suite, args.budget, args.workers or 1)
    rows = [(r.name, r.status, r.observed, r.threshold) for r in results]
    text = csv_text(VERIFY_COLUMNS, rows)
    if args.out:
        _write(args.out, text)
    width = max((len(r.name) for r in results), default=0)
    summary = sys.stderr if args.out in (None, "-") else sys.stdout
    if args.out in (None, "-"):
        sys.stdout.write(text)
    for r in results:
        summary.write(f"{r.status.upper():<16} {r.name:<{width}}  observed={fmt(r.observed)}  "
                      f"threshold={fmt(r.threshold)}\n")
    failed = sum(r.status == "fail" for r in results)
    summary.write(f"{len(results)} checks, {failed} failed\n")
    return 1 if failed else 0


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="tsbandit", description="Thompson Sampling bandit experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required):
        p.add_argument("--config", required=config_required, help="experiment config (YAML)")
        p.add_argument("--out", help="output CSV path (default: config output.path, else stdout)")
        p.add_argument("--workers", type=int, help="thread pool size; output is identical for any value")
        p.add_argument("--seed", type=int, help="override the config's base seed")

    p = sub.add_parser("run", help="Monte Carlo regret curve for one experiment")
    common(p, True)
    p.add_argument("--diagnostics-out", help="per-step diagnostics CSV (needs run.diagnostics: true)")
    p.add_argument("--echo-config", action="store_true", help="print the resolved config to stderr")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="regret curves over a parameter grid")
    common(p, True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bounds", help="evaluate closed-form regret bounds")
    common(p, False)
    p.add_argument("--means", help="comma-separated arm means (overrides the config instance)")
    p.add_argument("--horizons", help="comma-separated horizons; 'e' is accepted")
    p.add_argument("--kinds", help=f"comma-separated subset of {','.join(BOUND_KINDS)}")
    p.add_argument("--constant", type=float, help="constant for remark1_shape (default 1)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="run verification checks")
    p.add_argument("suite", choices=SUITES)
    p.add_argument("--budget", choices=BUDGETS, default="smoke")
    p.add_argument("--out", help="verification report CSV (default: stdout)")
    p.add_argument("--workers", type=int, help="thread pool size for Monte Carlo checks")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "workers", None) is not None and args.workers < 1:
        parser.error("--workers must be >= 1")
    if getattr(args, "seed", None) is not None and args.seed < 0:
        parser.error("--seed must be >= 0")
    try:
        return args.func(args)
    except (ConfigError, CliError) as exc:
        print(f"tsbandit: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"tsbandit: error: cannot write output: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
