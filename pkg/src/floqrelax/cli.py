"""Command line front-end.

Subcommands: simulate, sweep, fit, reference, otoc. Exit codes:
0 success, 1 validation error, 2 resource refusal, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .observables import (
    lambda_k_infty,
    mp_density,
    stationary_purities,
    two_phase_fit,
)
from .runner import (
    ExperimentConfig,
    NumericalFailure,
    ResourceRefusal,
    ValidationError,
    expand_sweep,
    fit_report,
    format_fit_report,
    read_csv,
    run,
    sweep,
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="YAML experiment config")
    parser.add_argument("--seed", type=int, help="override master seed")
    parser.add_argument("--out", help="override output path")
    parser.add_argument("--threads", type=int, help="trajectory-level threads")
    parser.add_argument("--format", choices=("csv", "json"), dest="out_format")


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.from_yaml(args.config)
    return _apply_overrides(cfg, args)


def _apply_overrides(cfg: ExperimentConfig, args) -> ExperimentConfig:
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out_path = args.out
    if getattr(args, "threads", None) is not None:
        cfg.threads = args.threads
    if getattr(args, "out_format", None) is not None:
        cfg.out_format = args.out_format
    return cfg


def _cmd_simulate(args) -> int:
    cfg = _load_config(args)
    record = run(cfg)
    dest = cfg.out_path or "<memory>"
    print(f"simulate: {len(record.rows)} rows -> {dest} "
          f"({record.wall_clock:.1f}s, config {record.config_hash})")
    if record.fit is not None:
        print(format_fit_report(fit_report(record)))
    return 0


def _cmd_sweep(args) -> int:
    with open(args.config) as fh:
        doc = yaml.safe_load(fh)
    configs = expand_sweep(doc)
    for cfg in configs:
        _apply_overrides(cfg, args)
    results = sweep(configs, parallelism=args.parallelism)
    failures = 0
    for cfg, res in zip(configs, results):
        if isinstance(res, Exception):
            failures += 1
            print(f"FAILED {cfg.out_path}: {res}", file=sys.stderr)
        else:
            print(f"ok {cfg.out_path} ({res.wall_clock:.1f}s)")
    if failures:
        print(f"{failures}/{len(configs)} experiments failed", file=sys.stderr)
        return 3
    return 0


def _cmd_fit(args) -> int:
    columns, rows = read_csv(args.csv)
    if "I2" not in columns or "t" not in columns:
        raise ValidationError(f"{args.csv} lacks t/I2 columns")
    times = rows[:, columns.index("t")].astype(int)
    i2 = rows[:, columns.index("I2")]
    y_inf = stationary_purities(1 << (args.n // 2))[0]
    try:
        fit = two_phase_fit(
            times, i2, y_inf, t_min=args.t_min,
            t_max=args.t_max, noise_floor=args.noise_floor,
        )
    except ValueError as exc:
        raise NumericalFailure(f"two-phase fit failed: {exc}") from exc
    report = {
        "t_c": fit.t_c,
        "r_I": fit.r_one,
        "r_II": fit.r_two,
        "decay_factor_I": float(np.exp(-fit.r_one)),
        "decay_factor_II": float(np.exp(-fit.r_two)),
        "fit_window": [fit.t_min, fit.t_max],
        "rss": fit.rss,
        "degenerate": fit.degenerate,
        "I_inf": y_inf,
    }
    print(format_fit_report(report))
    if args.out:
        Path(args.out).write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
    return 0


def _cmd_reference(args) -> int:
    n_a = args.n_a
    i2, i3, i4 = stationary_purities(n_a)
    lines = [f"# stationary purities for N_A={n_a}",
             f"# I2={i2:.17g} I3={i3:.17g} I4={i4:.17g}",
             "k,lambda_k_infty,x,mp_density"]
    xs = np.linspace(0.0, 4.0, n_a, endpoint=False) + 4.0 / (2 * n_a)
    for k in range(1, n_a + 1):
        lam = lambda_k_infty(k, n_a)
        x = xs[k - 1]
        lines.append(f"{k},{lam:.17g},{x:.17g},{mp_density(x):.17g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"reference tables -> {args.out}")
    else:
        print(text, end="")
    return 0


def _cmd_otoc(args) -> int:
    cfg = _load_config(args)
    if "otoc" not in cfg.observables:
        raise ValidationError("config requests no otoc observable")
    record = run(cfg)
    print(f"otoc: {len(record.rows)} rows -> {cfg.out_path or '<memory>'} "
          f"({record.wall_clock:.1f}s)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floqrelax",
        description="Floquet circuit simulation and two-step relaxation analysis",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a single experiment config")
    _add_common(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("sweep", help="run a config matrix")
    _add_common(p)
    p.add_argument("--parallelism", type=int, default=1)
    p.set_defaults(func=_cmd_sweep)

    p = sub.add_parser("fit", help="two-phase fit of a purity CSV")
    p.add_argument("csv", help="CSV produced by simulate")
    p.add_argument("--n", type=int, required=True, help="qubit count of the run")
    p.add_argument("--t-min", type=int, default=2)
    p.add_argument("--t-max", type=int, default=None)
    p.add_argument("--noise-floor", type=float, default=1e-12)
    p.add_argument("--out", help="write the JSON report here")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("reference", help="emit random-state reference tables")
    p.add_argument("--n-a", type=int, default=256, help="subsystem dimension")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_reference)

    p = sub.add_parser("otoc", help="run an OTOC experiment config")
    _add_common(p)
    p.set_defaults(func=_cmd_otoc)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ResourceRefusal as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except (NumericalFailure, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
