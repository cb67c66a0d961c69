"""Command-line entry point: ``gpcert <subcommand> [flags]``."""

import argparse
import json
import logging
import sys

from .errors import GPCertError
from .io.report import ExperimentConfig, run_experiment, validate_report

SUBCOMMANDS = ("train", "certify", "safety", "robustness", "interpret", "attack")


def _floats(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s):
    return [int(v) for v in s.split(",") if v.strip()]


def _label(s):
    try:
        return int(s)
    except ValueError:
        return s


def _add_experiment_flags(p):
    g = p.add_argument_group("data")
    g.add_argument("--dataset", choices=("synthetic2d", "csv", "idx"))
    g.add_argument("--data-path", help="CSV file or idx image file")
    g.add_argument("--labels-path", help="idx label file")
    g.add_argument("--label-column", type=_label, help="CSV label column (name or index)")
    g.add_argument("--normalization", choices=("standardize", "none"))
    g.add_argument("--columns", type=_ints, help="comma-separated input columns to keep")
    g.add_argument("--classes", type=_ints, help="comma-separated idx labels to keep, e.g. 3,8")
    g.add_argument("--downsample", action="store_true", default=None, help="2x2 mean pooling of images")
    g.add_argument("--n-total", type=int, help="Synthetic2D size")
    g.add_argument("--n-train", type=int)
    g.add_argument("--n-test", type=int)
    g.add_argument("--scale", type=float, help="multiply split sizes (desk runs)")
    g.add_argument("--seed", type=int)

    g = p.add_argument_group("model")
    g.add_argument("--likelihood", choices=("probit", "logistic", "softmax"))
    g.add_argument("--probit-scale", type=float)
    g.add_argument("--signal-variance", type=float)
    g.add_argument("--lengthscale", type=float)
    g.add_argument("--epochs", type=int, help="evidence evaluations for tuning (0 = none)")
    g.add_argument("--shared-lengthscale", action="store_true", default=None)
    g.add_argument("--posterior", dest="posterior_path", help="load a saved posterior instead of training")
    g.add_argument("--save-posterior")

    g = p.add_argument_group("analysis")
    g.add_argument("--n-points", type=int)
    g.add_argument("--point-selection", choices=("random", "first", "boundary"))
    g.add_argument("--gammas", type=_floats, help="comma-separated increasing radii")
    g.add_argument("--epsilon", type=float)
    g.add_argument("--partition-size", type=int)
    g.add_argument("--class-id", type=int)
    g.add_argument("--dims-mode", choices=("all", "explicit", "lengthscale"))
    g.add_argument("--dims", type=_ints)
    g.add_argument("--k", type=int, help="number of shortest-lengthscale dimensions")
    g.add_argument("--domain", type=_floats, help="low,high clip for inputs")
    g.add_argument("--interp-epsilon", type=float)
    g.add_argument("--max-iterations", type=int)
    g.add_argument("--time-limit", type=float)
    g.add_argument("--output", "-o")
    g.add_argument("--trace-dir")
    p.add_argument("--config", help="JSON config; its values override flags")


def build_parser():
    parser = argparse.ArgumentParser(prog="gpcert", description="Certified bounds for GP classifiers.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SUBCOMMANDS:
        _add_experiment_flags(sub.add_parser(name, help=f"run the {name} analysis"))
    rp = sub.add_parser("report", help="validate and summarise a report file")
    rp.add_argument("path")
    return parser


def config_from_args(args):
    names = {f for f in ExperimentConfig.__dataclass_fields__}
    given = {k: v for k, v in vars(args).items() if k in names and v is not None}
    given["analysis"] = args.command
    if args.config:
        with open(args.config) as fh:
            given.update(json.load(fh))
    return ExperimentConfig.from_dict(given)


def _summarise(path):
    with open(path) as fh:
        d = json.load(fh)
    validate_report(d)
    print(f"{d['config']['analysis']} report, version {d['version']}, seed {d['seed']}")
    for k, v in sorted(d["summary"].items()):
        print(f"  {k}: {json.dumps(v)}")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        if args.command == "report":
            return _summarise(args.path)
        cfg = config_from_args(args)
        report = run_experiment(cfg)
    except (GPCertError, ValueError, OSError) as e:
        print(f"gpcert: error: {e}", file=sys.stderr)
        return 2
    if not cfg.output:
        sys.stdout.write(report.to_json())
    for k, v in sorted(report.summary.items()):
        if not isinstance(v, dict):
            print(f"{k}: {v}", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
