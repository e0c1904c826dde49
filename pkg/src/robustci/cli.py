"""Command-line interface: ``generate``, ``ci`` and ``simulate``.

Exit codes: 0 success, 1 usage or validation error, 2 data or solver error.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import warnings

import numpy as np

from . import bench
from .baselines import BootstrapSpec, ols_t_interval, residual_bootstrap_interval
from .estimators import ConvergenceWarning
from .interval import ThresholdRule, confidence_interval
from .model import (
    DatasetFormatError,
    DesignSpec,
    generate_dataset,
    noise_preset,
    read_dataset_csv,
    write_dataset_csv,
)

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _csv_list(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"cannot parse list {text!r}") from None

    return parse


def _fresh_seed() -> int:
    return int(np.random.SeedSequence().entropy)


def _fmt(v: float) -> str:
    if v == math.inf:
        return "inf"
    if v == -math.inf:
        return "-inf"
    return repr(float(v))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="robustci", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="simulate a contaminated regression dataset")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--p", type=int, required=True)
    g.add_argument("--epsilon", type=float, default=0.0)
    g.add_argument("--noise", choices=bench.NOISE_FAMILIES, default="gaussian")
    g.add_argument("--rho", type=float, default=0.6, help="AR(1) design correlation")
    g.add_argument("--b", default="zero", help='comma-separated coefficients or "zero"')
    g.add_argument("--seed", type=int)
    g.add_argument("--out", required=True)

    c = sub.add_parser("ci", help="confidence interval for one coefficient of a dataset CSV")
    c.add_argument("--in", dest="path", required=True)
    c.add_argument("--coef", type=int, default=1, help="1-based coefficient index")
    c.add_argument("--alpha", type=float, default=0.05)
    c.add_argument("--method", choices=("alg1", "alg1-ga", "ols-t", "rb"), default="alg1")
    c.add_argument("--bootstrap-reps", type=int, default=200)
    c.add_argument("--seed", type=int, help="bootstrap seed (method rb)")

    s = sub.add_parser("simulate", help="run the Monte Carlo coverage grid")
    s.add_argument("--config", help="JSON file with ExperimentConfig fields")
    s.add_argument("--preset", choices=("standard",), help="start from the standard simulation grid")
    s.add_argument("--out", required=True)
    s.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    s.add_argument("--methods", type=_csv_list(str))
    s.add_argument("--n-values", type=_csv_list(int))
    s.add_argument("--p", type=int)
    s.add_argument("--epsilons", type=_csv_list(float))
    s.add_argument("--noise-families", type=_csv_list(str))
    s.add_argument("--replicates", type=int)
    s.add_argument("--alpha", type=float)
    s.add_argument("--master-seed", type=int)
    s.add_argument("--rho", type=float)
    s.add_argument("--bootstrap-replicates", type=int)
    s.add_argument("--timing", action=argparse.BooleanOptionalAction, default=None)
    return parser


def cmd_generate(args) -> int:
    if not (0.0 <= args.epsilon < 1.0):
        raise UsageError(f"--epsilon must satisfy 0 <= epsilon < 1 (got {args.epsilon})")
    if args.n < 2 or args.p < 1:
        raise UsageError("--n must be >= 2 and --p >= 1")
    try:
        design = DesignSpec(args.p, "ar1", args.rho)
        noise = noise_preset(args.noise, args.epsilon)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.b == "zero":
        b = [0.0] * args.p
    else:
        try:
            b = [float(v) for v in args.b.split(",")]
        except ValueError:
            raise UsageError(f"--b must be a comma list of numbers or 'zero'") from None
        if len(b) != args.p:
            raise UsageError(f"--b has {len(b)} entries, expected p={args.p}")
    seed = args.seed if args.seed is not None else _fresh_seed()
    data = generate_dataset(design, noise, b, args.n, np.random.SeedSequence(seed))
    try:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            write_dataset_csv(data, fh)
    except OSError as exc:
        print(f"robustci: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_DATA
    print("b=" + ",".join(repr(v) for v in b))
    print(f"seed={seed}")
    return EXIT_OK


def cmd_ci(args) -> int:
    if args.coef < 1:
        raise UsageError("--coef is 1-based and must be >= 1")
    if not (0.0 < args.alpha < 1.0):
        raise UsageError("--alpha must lie strictly between 0 and 1")
    if args.bootstrap_reps < 2:
        raise UsageError("--bootstrap-reps must be >= 2")
    try:
        with open(args.path, encoding="utf-8", newline="") as fh:
            data = read_dataset_csv(fh)
    except (OSError, DatasetFormatError, ValueError) as exc:
        print(f"robustci: {args.path}: {exc}", file=sys.stderr)
        return EXIT_DATA
    if args.coef > data.p:
        raise UsageError(f"--coef {args.coef} exceeds p={data.p}")
    if data.n <= data.p:
        print(f"robustci: need n > p, got n={data.n}, p={data.p}", file=sys.stderr)
        return EXIT_DATA
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ConvergenceWarning)
            if args.method in ("alg1", "alg1-ga"):
                ci = confidence_interval(data, args.coef, args.alpha, ThresholdRule(args.method))
            elif args.method == "ols-t":
                ci = ols_t_interval(data, args.coef, args.alpha)
            else:
                seed = args.seed
                if seed is None:
                    seed = _fresh_seed()
                    print(f"robustci: bootstrap seed={seed}", file=sys.stderr)
                spec = BootstrapSpec(args.bootstrap_reps, seed)
                ci = residual_bootstrap_interval(data, args.coef, args.alpha, spec)
    except (ValueError, RuntimeError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"robustci: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(",".join([ci.method, str(args.coef), _fmt(ci.lower), _fmt(ci.upper), repr(args.alpha)]))
    return EXIT_OK


_INLINE = {
    "methods": "methods",
    "n_values": "n_values",
    "p": "p",
    "epsilons": "epsilons",
    "noise_families": "noise_families",
    "replicates": "replicates",
    "alpha": "alpha",
    "master_seed": "master_seed",
    "bootstrap_replicates": "bootstrap_replicates",
    "timing": "timing",
}


def _simulate_config(args) -> bench.ExperimentConfig:
    inline = {k: getattr(args, a) for k, a in _INLINE.items() if getattr(args, a) is not None}
    if args.config and (inline or args.rho is not None or args.preset):
        raise UsageError("--config cannot be combined with --preset or inline grid flags")
    try:
        if args.config:
            try:
                with open(args.config, encoding="utf-8") as fh:
                    return bench.ExperimentConfig.from_json(fh.read())
            except OSError as exc:
                raise UsageError(f"cannot read config: {exc}") from None
            except json.JSONDecodeError as exc:
                raise UsageError(f"config is not valid JSON: {exc}") from None
        if "master_seed" not in inline:
            inline["master_seed"] = _fresh_seed() & ((1 << 64) - 1)
            print(f"master_seed={inline['master_seed']}")
        base = bench.standard_grid_config().to_dict() if args.preset else {}
        base.pop("design", None)
        base.pop("b", None)
        base.update(inline)
        if args.rho is not None:
            base["design"] = {"kind": "ar1", "rho": args.rho}
        return bench.ExperimentConfig.from_dict(base)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from None


def cmd_simulate(args) -> int:
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    config = _simulate_config(args)

    def progress(rec):
        length = "" if rec.avg_length_covered is None else f"{rec.avg_length_covered:.4g}"
        print(
            f"{rec.method} n={rec.n} eps={rec.epsilon:g} noise={rec.noise} "
            f"coverage={rec.coverage:.3f} length={length} "
            f"unbounded={rec.unbounded_count} errors={rec.error_count}",
            flush=True,
        )

    records = bench.run_grid(config, progress=progress, jobs=args.jobs)
    try:
        with open(args.out, "wb") as fh:
            bench.write_csv(records, fh)
    except OSError as exc:
        print(f"robustci: cannot write {args.out}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


_COMMANDS = {"generate": cmd_generate, "ci": cmd_ci, "simulate": cmd_simulate}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"robustci {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
