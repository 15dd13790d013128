from __future__ import print_function

import argparse
import json
import os.path
import sys
import textwrap

from . import __version__
from .cached_run import cache_root_default
from .checks import SUITES
from .checks import run_checks
from .config import load_config
from .exceptions import CfucbError
from .harness import run_experiment
from .harness import write_outputs


class _ShowVersionAction(argparse.Action):
    def __call__(self, parser, namespace, values, option_string=None):
        print(
            "cfucb {ver} located at {pos}".format(
                ver=__version__, pos=os.path.dirname(os.path.dirname(__file__))
            )
        )
        parser.exit()


def _positive_int(value):
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError("must be positive: {}".format(value))
    return number


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cfucb", formatter_class=argparse.ArgumentDefaultsHelpFormatter
    )
    parser.add_argument(
        "-V",
        "--version",
        action=_ShowVersionAction,
        help="display version",
        nargs=0,
    )
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "-q",
        "--quiet",
        action="store_true",
        help="suppress logging except errors",
    )
    subparsers = parser.add_subparsers(dest="command")
    subparsers.required = True

    run = subparsers.add_parser(
        "run",
        help="run an experiment and write regret.csv and summary.json",
        parents=[common],
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    run.add_argument("--config", help="flat JSON config file (defaults if omitted)")
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--seed", type=int, help="base seed, overrides the config")
    run.add_argument(
        "--jobs", type=_positive_int, help="parallel replications, overrides the config"
    )
    run.add_argument(
        "--logs",
        action="store_true",
        help="also write per-replication pull records and arrival streams "
        "under <out>/logs",
    )
    run.add_argument(
        "--cache",
        nargs="?",
        const="",
        help="reuse replication results cached in this directory "
        "(~/.cache/cfucb when given without a value)",
    )

    check = subparsers.add_parser(
        "check",
        help="run verification suites and print a JSON report",
        parents=[common],
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    check.add_argument(
        "--suite", default="all", choices=SUITES + ("all",), help="suite to run"
    )
    check.add_argument("--seed", type=int, default=0, help="seed of the suites")
    check.add_argument("--out", help="also write the JSON report to this file")
    return parser


def _run(args):
    config = load_config(args.config, seed=args.seed, jobs=args.jobs)
    log_dir = os.path.join(args.out, "logs") if args.logs else None
    cache_root = None
    if args.cache is not None:
        cache_root = args.cache or cache_root_default
    result = run_experiment(
        config, log_dir=log_dir, cache_root=cache_root, quiet=args.quiet
    )
    csv_path, summary_path = write_outputs(result, args.out)
    if not args.quiet:
        print("Wrote {} and {}".format(csv_path, summary_path), file=sys.stderr)
    return 0


def _check(args):
    report = run_checks(args.suite, seed=args.seed, quiet=args.quiet)
    text = json.dumps(report, indent=2, sort_keys=True, allow_nan=False)
    print(text)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    return 0 if report["passed"] else 1


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            status = _run(args)
        else:
            status = _check(args)
    except CfucbError as e:
        print(
            "Failed to {}:\n\n{}".format(
                args.command, textwrap.indent("\n".join(textwrap.wrap(str(e))), "\t")
            ),
            file=sys.stderr,
        )
        sys.exit(1)
    sys.exit(status)


if __name__ == "__main__":
    main()
