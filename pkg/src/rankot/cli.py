"""Command-line entry point: ``rankot <subcommand> [flags]``.

Exit codes: 0 success, 1 usage or input error, 2 runtime or convergence
failure.
"""

import argparse
import logging
import sys

import numpy as np

from . import experiments
from .changepoint import CpdConfig, detect_change_points
from .errors import InvalidArgumentError, RankOTError
from .halton import halton_grid
from .inference import two_sample_test
from .io import read_matrix, write_json, write_matrix, write_table
from .projection import maximize_psre
from .ranks import hard_rank_map, joint_rank_map, soft_rank_map
from .statistics import KERNELS, rank_energy
from .synthgen import HYPOTHESES, SETTINGS, SettingSpec, generate
from .transport import cost_matrix, sinkhorn, solve_assignment

logger = logging.getLogger("rankot")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _nonneg_float(text):
    value = float(text)
    if not value >= 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def _positive_float(text):
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _unit_interval(text):
    value = float(text)
    if not 0 < value < 1:
        raise argparse.ArgumentTypeError(f"must be in (0, 1), got {text}")
    return value


def _list_of(kind):
    def parse(text):
        try:
            return [kind(t) for t in text.split(",") if t.strip()]
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None
    return parse


def _settings(text):
    items = [t.strip() for t in text.split(",") if t.strip()]
    bad = [t for t in items if t not in SETTINGS]
    if bad or not items:
        raise argparse.ArgumentTypeError(f"settings must be drawn from v1..v12, got {text}")
    return items


def _load(path):
    data, _ = read_matrix(path)
    return data


def _json_flags(p, out_flag="--out-json"):
    p.add_argument(out_flag, default="-", help="JSON output path (default stdout)")
    p.add_argument("--no-timestamp", action="store_true", help="omit the timestamp field")


def _emit(args, payload, path_attr="out_json"):
    write_json(getattr(args, path_attr), payload, timestamp=not args.no_timestamp)


def cmd_gof_stat(args):
    x, y = _load(args.x), _load(args.y)
    stat = rank_energy(x, y, args.epsilon, args.kernel, args.bandwidth)
    _emit(args, {"command": "gof-stat", **stat.to_dict(), "d": int(x.shape[1]),
                 "seed": args.seed})


def cmd_gof_test(args):
    x, y = _load(args.x), _load(args.y)
    res = two_sample_test(x, y, alpha=args.alpha, epsilon=args.epsilon, kernel=args.kernel,
                          B=args.permutations, seed=args.seed, bandwidth=args.bandwidth,
                          null=args.null)
    payload = res.to_dict()
    payload.update({"command": "gof-test", "d": int(x.shape[1]), "epsilon": args.epsilon,
                    "scaled_value": res.statistic.scaled_value})
    _emit(args, payload)


def cmd_psre(args):
    x, y = _load(args.x), _load(args.y)
    res = maximize_psre(x, y, args.k, args.epsilon, restarts=args.restarts,
                        max_iter=args.max_iter, seed=args.seed, gradient=args.gradient)
    if args.out_u:
        write_matrix(args.out_u, res.U)
    _emit(args, {"command": "psre", **res.to_dict(), "seed": args.seed})


def cmd_null_dist(args):
    rows = []
    for eps in args.epsilon:
        rows.extend(experiments.null_density(args.settings, args.m, args.n, args.d, eps,
                                             args.replicates, args.seed))
    write_table(args.out, rows, ["setting", "epsilon", "replicate", "scaled_value"])


def cmd_sweep_epsilon(args):
    rows = experiments.sweep_epsilon(args.settings, args.eps_grid, args.m, args.n, args.d,
                                     args.replicates, args.seed, args.hypothesis)
    write_table(args.out, rows,
                ["setting", "epsilon", "mean", "std", "median", "replicates"])


def cmd_sweep_dim(args):
    rows = experiments.sweep_dim(args.settings, args.dims, args.m, args.n, args.epsilon,
                                 args.replicates, args.seed, args.hypothesis)
    write_table(args.out, rows,
                ["setting", "d", "epsilon", "mean", "std", "median", "replicates"])


def cmd_proj_compare(args):
    rows = experiments.proj_compare(args.settings, args.d, args.k, args.epsilon, args.m, args.n,
                                    args.replicates, args.seed, restarts=args.restarts,
                                    max_iter=args.max_iter)
    write_table(args.out, rows, ["setting", "hypothesis", "replicate", "sre", "psre",
                                 "hard_psre", "iterations"])


def cmd_synth(args):
    options = {}
    if args.v8_literal:
        options["v8_literal"] = True
    if args.gamma_rate:
        options["gamma_rate"] = True
    if args.contamination:
        options["contamination"] = args.contamination
    x, y = generate(SettingSpec(args.setting, args.m, args.n, args.d, args.hypothesis,
                                args.seed, options))
    write_matrix(args.out_x, x)
    write_matrix(args.out_y, y)


def cmd_cpd(args):
    series = _load(args.input)
    config = CpdConfig(window=args.window, epsilon=args.epsilon, stride=args.stride,
                       filter_half_width=args.filter_width, threshold_mode=args.threshold_mode,
                       alpha=args.alpha, relative_level=args.relative_level,
                       min_separation=args.min_separation,
                       standardize=not args.no_standardize,
                       null_permutations=args.permutations, seed=args.seed)
    res = detect_change_points(series, config)
    if args.out_trace:
        write_matrix(args.out_trace,
                     np.column_stack([res.times, res.raw_trace, res.filtered_trace]),
                     header=["t", "raw", "filtered"])
    _emit(args, {"command": "cpd", **res.to_dict(), "T": int(series.shape[0]),
                 "d": int(series.shape[1])})


def cmd_halton(args):
    write_matrix(args.out, halton_grid(args.n, args.d, args.start_index).points)


def cmd_plan(args):
    x = _load(args.x)
    grid = halton_grid(x.shape[0], x.shape[1])
    cost = cost_matrix(x, grid)
    if args.epsilon == 0:
        sigma = solve_assignment(cost)
        weights = np.zeros_like(cost)
        weights[np.arange(x.shape[0]), sigma] = 1.0 / x.shape[0]
    else:
        weights = sinkhorn(cost, args.epsilon, tol=args.tol, max_iter=args.max_iter).weights
    write_matrix(args.out, weights)


def cmd_ranks(args):
    x = _load(args.x)
    if args.y:
        y = _load(args.y)
        grid = halton_grid(x.shape[0] + y.shape[0], x.shape[1])
        rs = joint_rank_map(x, y, grid, args.epsilon)
    else:
        grid = halton_grid(x.shape[0], x.shape[1])
        rs = hard_rank_map(x, grid) if args.epsilon == 0 else soft_rank_map(x, grid, args.epsilon)
    write_matrix(args.out, rs.ranks)


def build_parser():
    parser = _Parser(prog="rankot", description="Optimal-transport rank statistics.")
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser, metavar="SUBCOMMAND")
    sub.required = True

    def two_sample(p):
        p.add_argument("--x", required=True, help="CSV of the first sample")
        p.add_argument("--y", required=True, help="CSV of the second sample")
        p.add_argument("--epsilon", type=_nonneg_float, default=0.0)
        p.add_argument("--kernel", choices=KERNELS, default="distance")
        p.add_argument("--bandwidth", type=_positive_float, default=None)
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("gof-stat", help="rank energy between two CSV samples")
    two_sample(p)
    _json_flags(p)
    p.set_defaults(func=cmd_gof_stat)

    p = sub.add_parser("gof-test", help="two-sample test with a permutation null")
    two_sample(p)
    p.add_argument("--alpha", type=_unit_interval, default=0.05)
    p.add_argument("--permutations", type=_positive_int, default=500)
    p.add_argument("--null", choices=["permutation", "reference"], default="permutation")
    _json_flags(p)
    p.set_defaults(func=cmd_gof_test)

    p = sub.add_parser("psre", help="projected soft rank energy")
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--k", type=_positive_int, required=True)
    p.add_argument("--epsilon", type=_positive_float, default=0.001)
    p.add_argument("--restarts", type=_positive_int, default=5)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--gradient", choices=["implicit", "fd"], default="implicit")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-u", default=None, help="CSV path for the optimal frame")
    _json_flags(p)
    p.set_defaults(func=cmd_psre)

    def replicated(p, default_settings):
        p.add_argument("--settings", type=_settings, default=default_settings)
        p.add_argument("--m", type=_positive_int, default=200)
        p.add_argument("--n", type=_positive_int, default=200)
        p.add_argument("--replicates", type=_positive_int, default=100)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="-", help="CSV output path (default stdout)")

    p = sub.add_parser("null-dist", help="null statistics per setting")
    replicated(p, ["v1", "v3", "v7", "v11"])
    p.add_argument("--d", type=_positive_int, default=3)
    p.add_argument("--epsilon", type=_list_of(float), default=[0.0, 0.01])
    p.set_defaults(func=cmd_null_dist)

    p = sub.add_parser("sweep-epsilon", help="mean statistic over an epsilon grid")
    replicated(p, list(SETTINGS[:8]))
    p.add_argument("--d", type=_positive_int, default=3)
    p.add_argument("--eps-grid", type=_list_of(float), default=list(experiments.EPSILON_GRID))
    p.add_argument("--hypothesis", choices=HYPOTHESES, default="alternate")
    p.set_defaults(func=cmd_sweep_epsilon)

    p = sub.add_parser("sweep-dim", help="mean statistic over a dimension grid")
    replicated(p, ["v3", "v11"])
    p.add_argument("--dims", type=_list_of(int), default=list(experiments.DIMENSION_GRID))
    p.add_argument("--epsilon", type=_nonneg_float, default=0.01)
    p.add_argument("--hypothesis", choices=HYPOTHESES, default="alternate")
    p.set_defaults(func=cmd_sweep_dim)

    p = sub.add_parser("proj-compare", help="sRE versus PsRE under null and alternate")
    replicated(p, ["v11", "v12"])
    p.add_argument("--d", type=_positive_int, default=100)
    p.add_argument("--k", type=_positive_int, default=8)
    p.add_argument("--epsilon", type=_positive_float, default=0.001)
    p.add_argument("--restarts", type=_positive_int, default=1)
    p.add_argument("--max-iter", type=int, default=30)
    p.set_defaults(func=cmd_proj_compare, replicates=30)

    p = sub.add_parser("synth", help="draw a benchmark sample pair")
    p.add_argument("--setting", choices=SETTINGS, required=True)
    p.add_argument("--m", type=_positive_int, required=True)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--hypothesis", choices=HYPOTHESES, default="alternate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-x", required=True)
    p.add_argument("--out-y", required=True)
    p.add_argument("--v8-literal", action="store_true", help="v8: Y = V * W without mixing")
    p.add_argument("--gamma-rate", action="store_true", help="read Gamma(2, 0.1) as shape/rate")
    p.add_argument("--contamination", choices=["sample", "coordinate"], default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("cpd", help="sliding-window change-point detection")
    p.add_argument("--input", required=True, help="CSV, rows = time, columns = dimensions")
    p.add_argument("--window", type=_positive_int, default=250)
    p.add_argument("--epsilon", type=_nonneg_float, default=0.01)
    p.add_argument("--stride", type=_positive_int, default=5)
    p.add_argument("--alpha", type=_unit_interval, default=0.01)
    p.add_argument("--filter-width", type=int, default=None,
                   help="moving-average half width (default window/5)")
    p.add_argument("--threshold-mode", choices=["null-quantile", "relative"],
                   default="null-quantile")
    p.add_argument("--relative-level", type=_unit_interval, default=0.5)
    p.add_argument("--min-separation", type=_positive_int, default=None)
    p.add_argument("--no-standardize", action="store_true")
    p.add_argument("--permutations", type=_positive_int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-trace", default=None, help="CSV path for t, raw, filtered")
    _json_flags(p)
    p.set_defaults(func=cmd_cpd)

    p = sub.add_parser("halton", help="print Halton points as CSV")
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--d", type=_positive_int, required=True)
    p.add_argument("--start-index", type=_positive_int, default=1)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_halton)

    p = sub.add_parser("plan", help="transport plan from a sample to its Halton grid")
    p.add_argument("--x", required=True)
    p.add_argument("--epsilon", type=_nonneg_float, default=0.0)
    p.add_argument("--tol", type=_positive_float, default=1e-9)
    p.add_argument("--max-iter", type=_positive_int, default=10_000)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("ranks", help="hard or soft ranks of a sample (or a pooled pair)")
    p.add_argument("--x", required=True)
    p.add_argument("--y", default=None)
    p.add_argument("--epsilon", type=_nonneg_float, default=0.0)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_ranks)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except FileNotFoundError as exc:
        print(f"rankot {args.command}: file not found: {exc.filename}", file=sys.stderr)
        return 1
    except InvalidArgumentError as exc:
        print(f"rankot {args.command}: {exc}", file=sys.stderr)
        return 1
    except (RankOTError, ArithmeticError, RuntimeError) as exc:
        print(f"rankot {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
