"""Command-line front end: fit / validate / benchmark.

Exit codes for ``fit``: 0 converged, 1 validation or I/O failure, 2 numerical
failure, 3 finished without converging (the dump is still written).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .benchmarks import MODEL_NAMES, run_benchmark
from .errors import (
    ConfigurationError,
    NumericalError,
    ParseError,
    VmpError,
)
from .modelspec import (
    apply_initialization,
    bind_observation,
    build_graph,
    load_data_csv,
    make_fit_options,
    parse_model_spec,
    posterior_dump,
    run_engine,
)

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NUMERICAL = 2
EXIT_NOT_CONVERGED = 3


def _read_spec(path):
    with open(path, encoding="utf-8") as fh:
        return parse_model_spec(fh.read())


def _parse_data_overrides(pairs):
    overrides = {}
    for pair in pairs or []:
        if "=" not in pair:
            raise ConfigurationError(
                f"--data expects NODE=PATH, got '{pair}'"
            )
        node, path = pair.split("=", 1)
        overrides[node] = path
    return overrides


def _bind_data(graph, spec, spec_path, data_overrides, missing_token):
    for obs in spec.observe:
        path = data_overrides.get(obs.node, obs.data)
        if path is None:
            raise ConfigurationError(
                f"no data source for observed node '{obs.node}'"
            )
        if not os.path.isabs(path):
            path = os.path.join(os.path.dirname(os.path.abspath(spec_path)), path)
        token = missing_token or obs.missing_token
        tensor, mask = load_data_csv(path, token)
        bind_observation(graph, obs.node, tensor, mask)


def cmd_fit(args):
    try:
        spec = _read_spec(args.spec)
        expand = args.broadcast == "off"
        graph = build_graph(spec, expand_broadcasts=expand)
        _bind_data(
            graph, spec, args.spec, _parse_data_overrides(args.data),
            args.missing_token,
        )
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.max_sweeps is not None:
            overrides["max_sweeps"] = args.max_sweeps
        if args.tol is not None:
            overrides["tol"] = args.tol
        options = make_fit_options(graph, spec, overrides)
        apply_initialization(graph, spec, options.seed)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except VmpError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID

    if args.init_dump:
        from .engine import FitReport

        try:
            _write_dump(args.output, posterior_dump(graph, FitReport()))
        except OSError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
        return EXIT_OK

    try:
        report = run_engine(graph, spec, options)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        partial = getattr(exc, "partial_report", None)
        if partial is not None and args.output:
            try:
                _write_dump(args.output, posterior_dump(graph, partial))
            except VmpError:
                pass
        return EXIT_NUMERICAL

    try:
        _write_dump(args.output, posterior_dump(graph, report))
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


def _write_dump(path, dump):
    text = json.dumps(dump, indent=1)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        sys.stdout.write(text + "\n")


def cmd_validate(args):
    try:
        _read_spec(args.spec)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ParseError, VmpError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print("OK")
    return EXIT_OK


def cmd_benchmark(args):
    if args.model not in MODEL_NAMES:
        print(
            f"error: unknown model '{args.model}' "
            f"(expected one of {', '.join(MODEL_NAMES)})",
            file=sys.stderr,
        )
        return EXIT_INVALID
    if args.sweeps < 10:
        print(
            "error: timing needs at least 10 sweeps", file=sys.stderr
        )
        return EXIT_INVALID
    try:
        row, _ = run_benchmark(
            args.model,
            broadcast=args.broadcast != "off",
            seed=args.seed if args.seed is not None else 0,
            max_sweeps=args.sweeps,
        )
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    header = f"{'model':<12} {'broadcast':<10} {'sweeps':>6} {'ms/iteration':>13}"
    line = (
        f"{row.model:<12} {row.broadcast:<10} {row.sweeps:>6} "
        f"{row.ms_per_iteration:>13.3f}"
    )
    sys.stdout.write(header + "\n" + line + "\n")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="vmplite",
        description="Variational message passing for conjugate "
        "exponential-family models",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    fit = sub.add_parser("fit", help="fit a model spec to CSV data")
    fit.add_argument("spec", help="path to the JSON model spec")
    fit.add_argument(
        "--data",
        action="append",
        metavar="NODE=PATH",
        help="override a data source (repeatable)",
    )
    fit.add_argument("--output", metavar="PATH", help="posterior dump path")
    fit.add_argument("--seed", type=int, default=None)
    fit.add_argument("--max-sweeps", type=int, default=None)
    fit.add_argument("--tol", type=float, default=None)
    fit.add_argument("--broadcast", choices=("on", "off"), default="on")
    fit.add_argument("--missing-token", default=None)
    fit.add_argument(
        "--init-dump",
        action="store_true",
        help="write the initialized posteriors without fitting",
    )
    fit.set_defaults(func=cmd_fit)

    val = sub.add_parser("validate", help="type-check a model spec")
    val.add_argument("spec")
    val.set_defaults(func=cmd_validate)

    bench = sub.add_parser("benchmark", help="run a synthetic benchmark")
    bench.add_argument("model", help=", ".join(MODEL_NAMES))
    bench.add_argument("--broadcast", choices=("on", "off"), default="on")
    bench.add_argument("--seed", type=int, default=None)
    bench.add_argument("--sweeps", type=int, default=200)
    bench.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
