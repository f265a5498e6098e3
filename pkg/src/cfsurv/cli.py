"""Command-line entry point: ``cfsurv verify | sweep | solve``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import analytic, experiments, optimize, verify
from .analytic import MR, PZF
from .config import ConfigError, SystemConfig
from .experiments import ExperimentSpec, emit_results, parse_config, preset_spec, run_sweep
from .scenario import make_scenario

log = logging.getLogger("cfsurv")


def _load(args) -> tuple[SystemConfig, ExperimentSpec]:
    if args.config:
        return parse_config(args.config)
    return SystemConfig(), ExperimentSpec()


def cmd_verify(args) -> int:
    results = verify.run_suite(args.seed, quick=args.quick, workers=args.workers)
    for r in results:
        print(r.line())
    if args.output:
        Path(args.output).write_text(verify.suite_json(results))
    return 0 if all(r.passed for r in results) else 1


def cmd_sweep(args) -> int:
    config, spec = _load(args)
    overrides = {"drops": args.drops, "seed": args.seed, "workers": args.workers}
    if args.scheme:
        overrides["schemes"] = tuple(args.scheme)
    if args.baseline:
        overrides["baselines"] = tuple(args.baseline)
    if args.preset:
        spec = preset_spec(args.preset, **overrides)
    else:
        spec = spec.replace(**{k: v for k, v in overrides.items() if v is not None})
    table = run_sweep(config, spec)
    output = args.output or spec.output
    if output:
        emit_results(table, output, args.format, include_timing=args.timing)
    for avg in table.averages():
        print(f"{spec.sweep}={avg['value']} {avg['scheme']:>3} {avg['baseline']:<22} "
              f"avg min MSP {avg['avg_min_msp']:.4f} over {avg['drops']} drops")
    errors = [r for r in table.rows if r["status"] != "ok"]
    if errors:
        log.warning("%d rows failed; see the status column", len(errors))
    return 0


def cmd_solve(args) -> int:
    config, _ = _load(args)
    config = config.replace(rng_seed=args.seed)
    _, stats = make_scenario(config, 0, args.drop)
    result = optimize.solve_pipeline(stats, config, args.scheme)
    report = analytic.evaluate(result.design, stats, args.scheme)
    payload = {
        "scheme": args.scheme,
        "min_msp": float(report.min_msp),
        "msp": report.msp.tolist(),
        "mode": result.design.mode.tolist(),
        "theta": result.design.theta.tolist(),
        "alpha": result.design.alpha.tolist(),
        "zf_mask": None if result.design.zf_mask is None else result.design.zf_mask.astype(int).tolist(),
        "traces": {name: tr.to_dict() for name, tr in result.traces.items()},
    }
    text = json.dumps(payload, indent=1, sort_keys=True) + "\n"
    if args.output:
        Path(args.output).write_text(text)
    print(f"min MSP {report.min_msp:.4f} with {result.design.jammers.size} jamming MNs")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cfsurv", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check closed forms against the Monte Carlo oracle")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quick", action="store_true", help="fewer instances and draws")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", help="write the JSON report here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="run a multi-drop experiment")
    p.add_argument("--config", help="YAML file with system/experiment sections")
    p.add_argument("--preset", choices=sorted(experiments.PRESETS))
    p.add_argument("--drops", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--scheme", action="append", choices=[MR, PZF])
    p.add_argument("--baseline", action="append", choices=list(experiments.ALL_BASELINES))
    p.add_argument("--output")
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.add_argument("--timing", action="store_true", help="keep the wall-clock column")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("solve", help="optimize one drop and dump the traces")
    p.add_argument("--config")
    p.add_argument("--scheme", choices=[MR, PZF], default=PZF)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--drop", type=int, default=0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_solve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    np.set_printoptions(precision=4)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
