"""Command-line interface: ``conicsvm <subcommand> [options]``.

Exit codes: 0 success, 1 usage or input error, 2 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from typing import Optional, Sequence

import numpy as np

from . import experiments as ex
from .conic import write_dump
from .core import (
    InputError,
    Kernel,
    SolverError,
    misclassification_rate,
    read_csv,
    read_model,
    write_csv,
    write_model,
)
from .exact import (
    MAX_ENUMERATION_N,
    Relaxation,
    bigm_relaxation_value,
    conic_relaxation_value,
    relaxation_gap,
    solve_branch_and_bound,
    solve_enumeration,
)
from .formulations import (
    Form,
    SvmHyperparams,
    build_conic_sdp,
    build_kernel_sdp,
    train_conic,
    train_hinge,
    train_kernel_conic,
)
from .loss import ConicLossParams, conic_loss, conic_loss_argmin_z, zero_one_loss

EXIT_OK, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _positive(kind):
    def conv(text):
        v = kind(text)
        if v <= 0:
            raise argparse.ArgumentTypeError(f"must be positive, got {text}")
        return v
    return conv


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="conicsvm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-data", help="write a synthetic dataset as CSV")
    g.add_argument("--class", dest="generator", required=True,
                   choices=[v.value.replace("_", "-") for v in ex.Generator])
    g.add_argument("--n", type=_positive(int), default=100)
    g.add_argument("--p", type=_positive(int), default=3)
    g.add_argument("--sigma", type=_positive(float), default=0.2)
    g.add_argument("--tau", type=float, default=0.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--clean", action="store_true", help="no outliers / no label flips")
    g.add_argument("--out", required=True)

    t = sub.add_parser("train", help="train a model and write it as JSON")
    t.add_argument("--data", required=True)
    t.add_argument("--method", required=True, choices=["hinge", "conic", "conic-kernel"])
    t.add_argument("--lambda", dest="lam", type=_positive(float))
    t.add_argument("--kappa", type=float)
    t.add_argument("--kernel", choices=["linear", "gaussian", "polynomial"], default="linear")
    t.add_argument("--bandwidth", type=_positive(float), default=1.0)
    t.add_argument("--degree", type=_positive(int), default=2)
    t.add_argument("--offset", type=float, default=1.0)
    t.add_argument("--intercept", action="store_true",
                   help="prepend a constant feature when the CSV has none")
    t.add_argument("--dump-conic", metavar="PATH", help="also write the conic program in text form")
    t.add_argument("--out", required=True)

    e = sub.add_parser("evaluate", help="print the misclassification rate of a model")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--intercept", action="store_true")

    gp = sub.add_parser("gap", help="exact optimum versus big-M and conic relaxations")
    gp.add_argument("--data", required=True)
    gp.add_argument("--lambda", dest="lam", type=_positive(float), required=True)
    gp.add_argument("--big-m", type=_positive(float), required=True)
    gp.add_argument("--intercept", action="store_true")
    gp.add_argument("--node-limit", type=_positive(int), default=10000)

    lc = sub.add_parser("loss-curve", help="sample the conic loss as CSV")
    lc.add_argument("--gamma", type=_positive(float), required=True)
    lc.add_argument("--lambda", dest="lam", type=_positive(float), required=True)
    lc.add_argument("--u-min", type=float, default=-1.0)
    lc.add_argument("--u-max", type=float, default=2.0)
    lc.add_argument("--points", type=_positive(int), default=301)
    lc.add_argument("--out", help="output file (default: stdout)")

    b = sub.add_parser("bench", help="run a synthetic experiment from a config file")
    b.add_argument("--config", required=True)
    b.add_argument("--seed", type=int)
    b.add_argument("--replications", type=_positive(int))
    b.add_argument("--grid-size", type=_positive(int))
    b.add_argument("--test-size", type=_positive(int))
    b.add_argument("--jobs", type=_positive(int), default=1)
    b.add_argument("--out", required=True, help="results CSV; the summary goes to <out>.json")
    return parser


def _kernel(args) -> Kernel:
    if args.kernel == "gaussian":
        return Kernel.gaussian(args.bandwidth)
    if args.kernel == "polynomial":
        return Kernel.polynomial(args.degree, args.offset)
    return Kernel.linear()


def cmd_gen_data(args) -> int:
    cfg = ex.ExperimentConfig(generator=args.generator.replace("-", "_"), n=args.n, p=args.p,
                              sigma=args.sigma, tau=args.tau, seed=args.seed)
    write_csv(ex.generate(cfg, clean=args.clean), args.out)
    return EXIT_OK


def cmd_train(args) -> int:
    if (args.lam is None) == (args.kappa is None):
        raise UsageError("train: give exactly one of --lambda / --kappa")
    if args.method == "hinge" and args.lam is None:
        raise UsageError("train: the hinge method needs --lambda")
    data = read_csv(args.data, intercept=args.intercept)
    if args.method == "hinge":
        model = train_hinge(data, args.lam)
    elif args.method == "conic":
        model = train_conic(data, lam=args.lam, kappa=args.kappa)
    else:
        model = train_kernel_conic(data, _kernel(args), lam=args.lam, kappa=args.kappa)
    if args.dump_conic:
        if args.method == "hinge":
            raise UsageError("train: --dump-conic applies to the conic methods")
        form = Form.CONIC_SDP_PENALTY if args.lam is not None else Form.CONIC_SDP_CARDINALITY
        if args.method == "conic":
            sdp = build_conic_sdp(data, SvmHyperparams(form, lam=args.lam, kappa=args.kappa))
        else:
            sdp = build_kernel_sdp(data, _kernel(args),
                                   SvmHyperparams(Form.KERNEL_CONIC_SDP, lam=args.lam, kappa=args.kappa))
        write_dump(sdp.program, args.dump_conic)
    write_model(model, args.out)
    return EXIT_OK


def _data_for(model, path, intercept):
    data = read_csv(path, intercept=intercept)
    if model.training_data is None and not data.intercept_embedded and \
            model.weights is not None and model.weights.size == data.p + 1:
        data = read_csv(path, intercept=True)
    return data


def cmd_evaluate(args) -> int:
    model = read_model(args.model)
    data = _data_for(model, args.data, args.intercept)
    print(f"{misclassification_rate(model, data):.10g}")
    return EXIT_OK


def cmd_gap(args) -> int:
    data = read_csv(args.data, intercept=args.intercept)
    if data.n <= MAX_ENUMERATION_N:
        exact = solve_enumeration(data, args.lam)
    else:
        exact = solve_branch_and_bound(data, args.lam, Relaxation.CONIC_SDP, node_limit=args.node_limit)
        if not exact.optimal:
            logging.getLogger(__name__).warning("node limit reached; exact value is an upper bound")
    zb = bigm_relaxation_value(data, args.lam, args.big_m)
    zc = conic_relaxation_value(data, args.lam)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(["zeta_mio", "zeta_bigm", "zeta_conic", "gap_bigm", "gap_conic"])
    w.writerow([f"{v:.10g}" for v in (exact.objective, zb, zc,
                                       relaxation_gap(exact.objective, zb),
                                       relaxation_gap(exact.objective, zc))])
    return EXIT_OK


def cmd_loss_curve(args) -> int:
    if not args.u_max > args.u_min:
        raise UsageError("loss-curve: --u-max must exceed --u-min")
    params = ConicLossParams(args.gamma, args.lam)
    u = np.linspace(args.u_min, args.u_max, args.points)
    cols = (u, conic_loss(u, params), conic_loss_argmin_z(u, params), args.lam * zero_one_loss(u))
    fh = open(args.out, "w", newline="", encoding="utf-8") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["u", "conic_loss", "z_star", "scaled_zero_one"])
        for row in zip(*cols):
            w.writerow([repr(float(v)) for v in row])
    finally:
        if args.out:
            fh.close()
    return EXIT_OK


def cmd_bench(args) -> int:
    cfg = ex.read_config(args.config, seed=args.seed, replications=args.replications,
                         grid_size=args.grid_size, test_size=args.test_size)
    result = ex.run_experiment(cfg, jobs=args.jobs)
    ex.write_results_csv(result, args.out)
    ex.write_summary_json(result, f"{args.out}.json")
    failed = [r for r in result.replications if r.error]
    if failed and len(failed) == len(result.replications):
        print("bench: every replication failed", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


_COMMANDS = {"gen-data": cmd_gen_data, "train": cmd_train, "evaluate": cmd_evaluate,
             "gap": cmd_gap, "loss-curve": cmd_loss_curve, "bench": cmd_bench}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (InputError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
