"""``sigreg-lab`` command-line entry point.

Exit codes: 0 success, 1 bad flag or invalid data, 2 I/O failure,
3 ``gof --alpha`` rejected the null.
"""

from __future__ import annotations

import argparse
import sys
from functools import lru_cache
from pathlib import Path

from .core import (
    STREAM_DATA,
    Aggregation,
    EmbeddingBatch,
    FormatError,
    QuadratureGrid,
    Strategy,
    load_embeddings,
    save_embeddings,
    seeded_rng,
)
from .experiments import (
    DEFAULT_TIMING_CELLS,
    Optimizer,
    UnfoldConfig,
    XDistributionSpec,
    expected_directional_statistic,
    format_csv,
    generate_x_distribution,
    moment_insufficiency,
    null_study,
    quadrature_convergence,
    resampling_study,
    ridge_bias_variance,
    sobolev_table,
    timing_benchmark,
    unfold,
    write_csv,
)
from .loss import calibrate_threshold
from .slicing import SliceMode, SliceSchedule, project, sample_directions
from .univariate import TestKind, eval_slices

EXIT_OK, EXIT_INVALID, EXIT_IO, EXIT_REJECT = 0, 1, 2, 3

TEST_ALIASES = {
    "ep": TestKind.EPPS_PULLEY,
    "jb": TestKind.JARQUE_BERA,
    "ejb": TestKind.EXTENDED_JARQUE_BERA,
    "cvm": TestKind.CRAMER_VON_MISES,
    "ad": TestKind.ANDERSON_DARLING,
    "watson": TestKind.WATSON,
    "moment": TestKind.MOMENT_MATCH,
}
STRATEGY_ALIASES = {"pseudorandom": Strategy.PSEUDORANDOM, "low-discrepancy": Strategy.LOW_DISCREPANCY}
MODE_ALIASES = {"resample": SliceMode.RESAMPLE, "fixed": SliceMode.FIXED}
STUDIES = ("moments", "null", "quadrature", "resampling", "ridge", "sobolev")


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; 2 is reserved for I/O here
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


class _Help(argparse.ArgumentDefaultsHelpFormatter):
    pass


# -- flag parsers -------------------------------------------------------------


def _test_kind(value: str) -> TestKind:
    if value in TEST_ALIASES:
        return TEST_ALIASES[value]
    try:
        return TestKind(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"unknown test {value!r}; choose from {', '.join(TEST_ALIASES)}") from None


def _int_list(value: str):
    try:
        out = [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {value!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(value: str):
    try:
        out = [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {value!r}") from None
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _cells(value: str):
    cells = []
    for part in value.split(","):
        try:
            n, m, t = (int(v) for v in part.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"cell {part!r} is not N:M:T") from None
        cells.append((n, m, t))
    return cells


def _synthetic(value: str):
    parts = value.split(":")
    if len(parts) != 3 or parts[0] not in ("x", "gaussian"):
        raise argparse.ArgumentTypeError(f"expected x:N:K or gaussian:N:K, got {value!r}")
    try:
        return parts[0], int(parts[1]), int(parts[2])
    except ValueError:
        raise argparse.ArgumentTypeError(f"N and K must be integers in {value!r}") from None


def _positive_int(value: str) -> int:
    try:
        v = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {value!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _add_grid(p):
    p.add_argument("--t-min", type=float, default=-5.0, help="lower quadrature limit (must equal -t-max)")
    p.add_argument("--t-max", type=float, default=5.0, help="upper quadrature limit")
    p.add_argument("--t-points", type=int, default=17, help="number of trapezoid knots (odd)")


def _add_test(p, default="ep"):
    p.add_argument("--test", type=_test_kind, default=default,
                   help=f"univariate statistic: {', '.join(TEST_ALIASES)} or a full name")


def _grid(args) -> QuadratureGrid:
    return QuadratureGrid.from_range(args.t_min, args.t_max, args.t_points)


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sigreg-lab", description="Sliced Gaussianity tests, SIGReg unfolding and studies.",
                     formatter_class=_Help)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gof", help="sliced goodness-of-fit test of an embedding file against N(0, I)",
                       formatter_class=_Help)
    g.add_argument("--input", required=True, help="embedding file (CSV or raw binary)")
    g.add_argument("--format", choices=("csv", "raw-binary"), default=None,
                   help="input format; inferred from the suffix when omitted")
    _add_test(g)
    g.add_argument("--slices", type=_positive_int, default=1024, help="number of random directions M")
    g.add_argument("--seed", type=int, default=0, help="direction seed")
    g.add_argument("--strategy", choices=tuple(STRATEGY_ALIASES), default="pseudorandom",
                   help="direction sampler")
    _add_grid(g)
    g.add_argument("--agg", choices=("mean", "max"), default="max", help="aggregation over slices")
    g.add_argument("--alpha", type=float, default=None,
                   help="test level; when set, calibrate a threshold and exit 3 on rejection")
    g.add_argument("--calib-trials", type=int, default=1000, help="null simulations for calibration")
    g.add_argument("--calib-seed", type=int, default=0, help="seed of the calibration simulations")
    g.add_argument("--csv", default=None, help="write per-slice statistics to this CSV")

    c = sub.add_parser("calibrate", help="Monte Carlo threshold of the aggregate null statistic",
                       formatter_class=_Help)
    c.add_argument("--n", type=_positive_int, required=True, help="batch size N")
    c.add_argument("--k", type=_positive_int, required=True, help="embedding dimension K")
    c.add_argument("--m", type=_positive_int, default=1024, help="number of directions M")
    c.add_argument("--alpha", type=float, default=0.05, help="test level")
    c.add_argument("--trials", type=int, default=1000, help="null simulations")
    c.add_argument("--seed", type=int, default=0, help="simulation seed")
    c.add_argument("--agg", choices=("mean", "max"), default="max", help="aggregation over slices")
    c.add_argument("--strategy", choices=tuple(STRATEGY_ALIASES), default="pseudorandom",
                   help="direction sampler")
    _add_test(c)
    _add_grid(c)
    c.add_argument("--output", default=None, help="CSV path; stdout when omitted")

    u = sub.add_parser("unfold", help="optimize samples to minimize mean-aggregated SIGReg",
                       formatter_class=_Help)
    src = u.add_mutually_exclusive_group(required=True)
    src.add_argument("--input", default=None, help="embedding file to start from")
    src.add_argument("--synthetic", type=_synthetic, default=None,
                     help="generated start batch, x:N:K (X distribution) or gaussian:N:K")
    u.add_argument("--format", choices=("csv", "raw-binary"), default=None,
                   help="input format; inferred from the suffix when omitted")
    u.add_argument("--steps", type=int, default=2000, help="optimizer steps")
    u.add_argument("--lr", type=float, default=1e-2, help="learning rate")
    u.add_argument("--slices", type=_positive_int, default=16, help="directions per step M")
    u.add_argument("--mode", choices=tuple(MODE_ALIASES), default="resample",
                   help="redraw directions every step or keep one set")
    u.add_argument("--optimizer", choices=[o.value for o in Optimizer], default="adam", help="update rule")
    u.add_argument("--seed", type=int, default=0, help="seed for synthetic data and directions")
    _add_test(u)
    _add_grid(u)
    u.add_argument("--output", required=True, help="final batch; input format, or by suffix for --synthetic")
    u.add_argument("--trace", default=None, help="per-step loss CSV")

    b = sub.add_parser("bench", help="wall time of one SIGReg forward+gradient pass", formatter_class=_Help)
    b.add_argument("--cells", type=_cells, default=list(DEFAULT_TIMING_CELLS),
                   help="comma-separated N:M:T cells")
    b.add_argument("--repetitions", type=int, default=10, help="timed repetitions per cell")
    b.add_argument("--k", type=_positive_int, default=64, help="embedding dimension")
    b.add_argument("--seed", type=int, default=0, help="data and direction seed")
    b.add_argument("--output", default=None, help="CSV path; stdout when omitted")

    e = sub.add_parser("experiment", help="synthetic studies written to <study>_<seed>.csv",
                       formatter_class=_Help)
    e.add_argument("study", choices=STUDIES, help="study name")
    e.add_argument("--seed", type=int, default=0, help="study seed")
    e.add_argument("--out-dir", default=".", help="directory for the CSV")
    e.add_argument("--eigs", type=_float_list, default=[0.5, 1.5], help="ridge: covariance eigenvalues")
    e.add_argument("--lambda-wd", type=float, default=1.0, help="ridge: weight decay")
    e.add_argument("--beta-norm", type=float, default=1.0, help="ridge: norm of the true parameter")
    e.add_argument("--k", type=_positive_int, default=64, help="resampling: embedding dimension")
    e.add_argument("--m-values", type=_int_list, default=[4, 16, 64], help="resampling/sobolev: slice counts")
    e.add_argument("--steps", type=int, default=300, help="resampling: unfold steps")
    e.add_argument("--n", type=_positive_int, default=256, help="resampling/quadrature: batch size")
    e.add_argument("--n-seeds", type=_positive_int, default=5, help="resampling: seeds seed..seed+n-1")
    e.add_argument("--counts", type=_int_list, default=[5, 9, 17, 33, 65], help="quadrature: knot counts")
    e.add_argument("--fine-count", type=int, default=20001, help="quadrature: Simpson reference knots")
    e.add_argument("--k-values", type=_int_list, default=[2, 3, 8, 64], help="sobolev: dimensions")
    e.add_argument("--alpha-values", type=_float_list, default=[1.0, 2.0], help="sobolev: smoothness")
    e.add_argument("--n-values", type=_int_list, default=[16, 128, 1024], help="null: batch sizes")
    e.add_argument("--batches", type=int, default=200, help="null: batches per N")
    e.add_argument("--order", type=_positive_int, default=4, help="moments: matched moment order")
    e.add_argument("--sample-size", type=_positive_int, default=100_000, help="moments: plug-in sample size")
    e.add_argument("--replicates", type=int, default=20, help="moments: i.i.d. replicates for noise bands")
    return parser


# -- commands -------------------------------------------------------------------


@lru_cache(maxsize=32)
def _threshold(n, k, m, alpha, trials, test, grid, seed, aggregation, strategy) -> float:
    return calibrate_threshold(n, k, m, alpha, trials, test, grid, seed, aggregation, strategy)


def _emit(header, rows, path, out):
    """Write a versioned CSV to ``path`` or, when None, to ``out``."""
    if path is not None:
        write_csv(path, header, rows)
    else:
        out.write(format_csv(header, rows))


def cmd_gof(args, out) -> int:
    batch = load_embeddings(args.input, args.format)
    grid = _grid(args)
    strategy = STRATEGY_ALIASES[args.strategy]
    agg = Aggregation(args.agg)
    dirs = sample_directions(args.seed, batch.k, args.slices, strategy)
    stats = eval_slices(args.test, project(batch, dirs), grid)
    value = float(stats.max() if agg is Aggregation.MAX else stats.mean())
    lines = [
        f"test: {args.test.value}",
        f"n: {batch.n}",
        f"k: {batch.k}",
        f"slices: {args.slices}",
        f"slice_min: {float(stats.min())!r}",
        f"slice_mean: {float(stats.mean())!r}",
        f"slice_max: {float(stats.max())!r}",
        f"aggregation: {agg.value}",
        f"aggregate: {value!r}",
    ]
    code = EXIT_OK
    if args.alpha is not None:
        tau = _threshold(batch.n, batch.k, args.slices, args.alpha, args.calib_trials, args.test, grid,
                         args.calib_seed, agg, strategy)
        reject = value > tau
        lines += [f"alpha: {float(args.alpha)!r}", f"threshold: {float(tau)!r}",
                  f"decision: {'reject' if reject else 'fail-to-reject'}"]
        code = EXIT_REJECT if reject else EXIT_OK
    out.write("\n".join(lines) + "\n")
    if args.csv:
        write_csv(args.csv, ["slice", "statistic"], enumerate(stats))
    return code


def cmd_calibrate(args, out) -> int:
    grid = _grid(args)
    tau = calibrate_threshold(args.n, args.k, args.m, args.alpha, args.trials, args.test, grid, args.seed,
                              Aggregation(args.agg), STRATEGY_ALIASES[args.strategy])
    header = ["n", "k", "m", "alpha", "trials", "seed", "test", "aggregation", "t_max", "t_points", "threshold"]
    row = [args.n, args.k, args.m, args.alpha, args.trials, args.seed, args.test, args.agg,
           grid.t_max, grid.t_count, tau]
    _emit(header, [row], args.output, out)
    return EXIT_OK


def cmd_unfold(args, out) -> int:
    if args.input is not None:
        batch = load_embeddings(args.input, args.format)
        fmt = args.format or ("csv" if Path(args.input).suffix.lower() in (".csv", ".txt") else "raw-binary")
    else:
        kind, n, k = args.synthetic
        if kind == "x":
            batch = generate_x_distribution(XDistributionSpec(n, k, args.seed))
        else:
            if n < 1 or k < 1:
                raise ValueError("N and K must be positive")
            batch = EmbeddingBatch(seeded_rng(args.seed, STREAM_DATA).standard_normal((n, k)))
        fmt = args.format
    grid = _grid(args)
    sched = SliceSchedule(MODE_ALIASES[args.mode], args.seed, args.slices)
    cfg = UnfoldConfig(args.steps, args.lr, args.slices, sched, args.test, grid, args.optimizer)
    final, trace = unfold(batch, cfg)
    save_embeddings(final, args.output, fmt)
    if args.trace:
        write_csv(args.trace, ["step", "loss"], enumerate(trace))
    mean, se = expected_directional_statistic(final, seed=args.seed, test=args.test, grid=grid)
    out.write(f"steps: {len(trace)}\n")
    if len(trace):
        out.write(f"initial_loss: {float(trace[0])!r}\nfinal_loss: {float(trace[-1])!r}\n")
    out.write(f"eval_statistic: {float(mean)!r}\neval_se: {float(se)!r}\n")
    return EXIT_OK


def cmd_bench(args, out) -> int:
    rows = timing_benchmark(args.cells, args.repetitions, args.k, args.seed)
    header = ["n", "m", "t_count", "mean_ms", "std_ms"]
    _emit(header, [[r[h] for h in header] for r in rows], args.output, out)
    return EXIT_OK


def _study_rows(args):
    study = args.study
    if study == "ridge":
        r = ridge_bias_variance(args.eigs, args.lambda_wd, args.beta_norm)
        header = ["eigs", "lambda_wd", "beta_norm", "bias_iso", "bias_aniso", "trace_var_iso", "trace_var_aniso"]
        eigs = ";".join(repr(float(v)) for v in args.eigs)
        return header, [[eigs, args.lambda_wd, args.beta_norm] + [r[h] for h in header[3:]]]
    if study == "resampling":
        seeds = range(args.seed, args.seed + args.n_seeds)
        rows = resampling_study(args.k, args.m_values, args.steps, seeds, args.n)
        header = ["m", "mode", "mean_stat", "se", "n_seeds"]
        return header, [[r[h] for h in header] for r in rows]
    if study == "quadrature":
        s = seeded_rng(args.seed, STREAM_DATA).standard_normal(args.n)
        res = quadrature_convergence(s, args.counts, fine_count=args.fine_count)
        header = ["t_count", "value", "abs_error", "reference", "slope"]
        return header, [[r["t_count"], r["value"], r["abs_error"], res["reference"], res["slope"]]
                        for r in res["rows"]]
    if study == "sobolev":
        rows = sobolev_table(args.k_values, args.alpha_values, args.m_values)
        header = ["k", "alpha", "m", "constant", "decay", "bound"]
        return header, [[r[h] for h in header] for r in rows]
    if study == "null":
        rows = null_study(args.n_values, args.batches, args.seed)
        header = ["n", "mean_stat", "se", "null_constant"]
        return header, [[r[h] for h in header] for r in rows]
    # moments
    r = moment_insufficiency(args.order, args.sample_size, args.replicates, args.seed)
    header = ["order", "epsilon", "ejb_plus", "ejb_minus", "ejb_noise", "ep_plus", "ep_minus",
              "ep_two_sample", "ep_two_sample_null", "ep_ratio"]
    return header, [[args.order, r["pair"].epsilon] + [r[h] for h in header[2:]]]


def cmd_experiment(args, out) -> int:
    header, rows = _study_rows(args)
    path = Path(args.out_dir) / f"{args.study}_{args.seed}.csv"
    write_csv(path, header, rows)
    out.write(f"wrote {path}\n")
    return EXIT_OK


COMMANDS = {"gof": cmd_gof, "calibrate": cmd_calibrate, "unfold": cmd_unfold, "bench": cmd_bench,
            "experiment": cmd_experiment}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args, out)
    except FormatError as exc:
        print(f"sigreg-lab: format error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"sigreg-lab: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"sigreg-lab: error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
