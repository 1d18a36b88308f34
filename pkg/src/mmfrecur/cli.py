"""Command line interface.

Exit codes: 0 success, 2 invalid parameters or input, 3 degenerate
simulation or book state, 4 fit failure.
"""

import argparse
import sys

import numpy as np

from .errors import BookStateError, EmptyIntervalsError, FitError, ParameterError, SimulationError
from .io import (read_json, read_series, read_table, write_json, write_returns, write_series,
                 write_table)

EXIT_PARAMETER = 2
EXIT_DEGENERATE = 3
EXIT_FIT = 4


def _model_args(p):
    p.add_argument("--steps", type=int, help="placement events (default 2e5)")
    p.add_argument("--paper-scale", action="store_true", help="use 2e6 steps")
    p.add_argument("--cancel-rate", type=float)
    p.add_argument("--tick", type=float)
    p.add_argument("--warmup", type=int)
    p.add_argument("--refill-half-spread", type=float)
    p.add_argument("--degrees-of-freedom", type=float)
    p.add_argument("--scale", type=float)


def _model_overrides(args):
    from .simulator import PAPER_STEPS

    out = {}
    for key in ("steps", "cancel_rate", "tick", "warmup", "refill_half_spread",
                "degrees_of_freedom", "scale"):
        v = getattr(args, key, None)
        if v is not None:
            out[key] = v
    if getattr(args, "paper_scale", False) and "steps" not in out:
        out["steps"] = PAPER_STEPS
    return out


def _floats(text):
    return [float(v) for v in text.split(",") if v.strip()]


def cmd_simulate(args):
    from .simulator import ModelParams, run_simulation
    from .stochastic import StudentParams

    model = _model_overrides(args)
    student = StudentParams(**{k: model.pop(k) for k in ("degrees_of_freedom", "scale") if k in model})
    params = ModelParams(hurst_s=args.hurst_s, hurst_x=args.hurst_x, seed=args.seed,
                         student=student, **model)
    if args.event_log:
        with open(args.event_log, "w", encoding="utf-8") as log:
            series = run_simulation(params, event_log=log)
    else:
        series = run_simulation(params)
    write_returns(args.output, series)
    d = series.diagnostics
    print(f"{len(series)} returns from {params.steps} events "
          f"(mean depth {d['mean_depth']:.1f}, refills {d['refills']}) -> {args.output}")


def cmd_intervals(args):
    from .recurrence import extract_intervals

    values, header = read_series(args.returns)
    iv = extract_intervals(values, args.q)
    write_series(args.output, iv.intervals,
                 {"kind": "intervals", "q": args.q, "mean_interval": iv.mean_interval,
                  "seed": header.get("params", {}).get("seed")}, integer=True)
    print(f"{len(iv)} intervals above Q={args.q:g}, mean {iv.mean_interval:.6g} -> {args.output}")


def cmd_fit_gamma(args):
    from .recurrence import (IntervalSeries, fit_generalized_gamma, pool_and_scale,
                             pooled_spacing, scaled_pdf)

    runs = []
    for path in args.intervals:
        values, header = read_series(path)
        runs.append(IntervalSeries(q_threshold=float(header.get("q", 0.0)),
                                   intervals=values, mean_interval=float(values.mean())))
    pdf = scaled_pdf(pool_and_scale(runs), args.bins_per_decade,
                     spacing=None if args.no_smear else pooled_spacing(runs))
    fit = fit_generalized_gamma(pdf, fit_min=args.fit_min)
    record = {"beta": fit.beta, "gamma": fit.gamma, "delta": fit.delta, "norm_a": fit.norm_a,
              "fit_range": list(fit.fit_range), "goodness": fit.goodness, "n_bins": fit.n_bins,
              "n_intervals": int(sum(len(r.intervals) for r in runs)), "inputs": args.intervals}
    write_json(args.output, record)
    if args.pdf_output:
        write_table(args.pdf_output, ["x", "density", "count"],
                    zip(pdf.bin_centers, pdf.densities, pdf.counts))
    print(f"beta={fit.beta:.4f} gamma={fit.gamma:.4g} delta={fit.delta:.4g} -> {args.output}")


def cmd_dfa(args):
    from .scaling import dfa

    values, _ = read_series(args.series)
    if args.abs:
        values = np.abs(values)
    res = dfa(values, detrend_order=args.order)
    write_table(args.output, ["s", "F"], zip(res.scales, res.fluctuations))
    print(f"H={res.exponent:.4f} over s in {res.fit_window} -> {args.output}")


def cmd_mfdfa(args):
    from .scaling import mfdfa

    values, _ = read_series(args.series)
    q = None if args.q is None else np.linspace(args.q[0], args.q[1], int(args.q[2]))
    res = mfdfa(values, q_values=q, detrend_order=args.order)
    write_table(args.output, ["q", "h", "tau", "alpha", "f"],
                zip(res.q_values, res.h_of_q, res.tau_of_q, res.alpha, res.f_of_alpha))
    print(f"width={res.width:.4f} -> {args.output}")


def cmd_sweep(args):
    from .experiment import SweepConfig

    data = read_json(args.config) if args.config else {}
    for key in ("output_dir", "workers", "rounds", "master_seed"):
        v = getattr(args, key)
        if v is not None:
            data[key] = v
    if args.h_s_grid:
        data["h_s_grid"] = _floats(args.h_s_grid)
    if args.h_x_grid:
        data["h_x_grid"] = _floats(args.h_x_grid)
    if args.thresholds:
        data["thresholds"] = _floats(args.thresholds)
    data.update(_model_overrides(args))
    config = SweepConfig.from_dict(data)

    from .experiment import run_sweep

    def progress(j, k):
        print(f"cell H_s={config.h_s_grid[j]:.2f} H_x={config.h_x_grid[k]:.2f} done", flush=True)

    results = run_sweep(config, progress=progress)
    print(f"{len(results)} cells in {config.output_dir}")


def _load_points(path):
    columns, rows = read_table(path)
    if columns and columns[0].startswith("H_x"):
        hss = [float(c) for c in columns[1:]]
        return [(float(r[0]), hs, float(b)) for r in rows for hs, b in zip(hss, r[1:])
                if np.isfinite(float(b))]
    return [tuple(float(v) for v in r[:3]) for r in rows]


def cmd_fit_surface(args):
    from .regression import fit_beta_surface, permutation_pvalues, table_points

    points = table_points() if args.published else _load_points(args.table)
    fit = fit_beta_surface(points)
    record = fit.to_dict()
    if args.permutations:
        record["permutation_p"] = list(permutation_pvalues(points, args.permutations, seed=0))
    if args.output:
        write_json(args.output, record)
    print(f"a={fit.a:.4f} b={fit.b:.4f} c={fit.c:.4f} "
          f"p=({fit.p_values[0]:.3g}, {fit.p_values[1]:.3g}, {fit.p_values[2]:.3g}) "
          f"R2={fit.r_squared:.3f}")


def cmd_series(args):
    from . import stochastic as st

    if args.kind == "fgn":
        values = st.gen_fgn(args.n, args.hurst, args.seed).values
    elif args.kind == "signs":
        values = st.gen_order_signs(args.n, args.hurst, args.seed)
    else:
        params = st.StudentParams(args.degrees_of_freedom, args.scale)
        values = st.sample_student(args.n, params, args.seed)
        if args.kind == "prices":
            values = st.aaft_correlate(values, args.hurst, args.seed + 1).values
    write_series(args.output, values, {"kind": args.kind, "n": args.n, "hurst": args.hurst,
                                       "seed": args.seed}, integer=args.kind == "signs")


def cmd_report(args):
    from .experiment import report

    paths = report(args.results_dir, args.output_dir)
    print(f"{len(paths)} report files written")


def build_parser():
    parser = argparse.ArgumentParser(prog="mmfrecur", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one simulation and write its returns")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--hurst-s", type=float, default=0.5)
    p.add_argument("--hurst-x", type=float, default=0.5)
    _model_args(p)
    p.add_argument("--event-log", help="write every book event to this file")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("intervals", help="recurrence intervals above a threshold")
    p.add_argument("returns")
    p.add_argument("-q", type=float, required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_intervals)

    p = sub.add_parser("fit-gamma", help="pool interval files and fit the generalized Gamma")
    p.add_argument("intervals", nargs="+")
    p.add_argument("--fit-min", type=float, default=1e-2)
    p.add_argument("--bins-per-decade", type=int, default=10)
    p.add_argument("--no-smear", action="store_true", help="plain histogram of lattice values")
    p.add_argument("--pdf-output")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_fit_gamma)

    for name, func in (("dfa", cmd_dfa), ("mfdfa", cmd_mfdfa)):
        p = sub.add_parser(name, help=f"{name.upper()} of a series file")
        p.add_argument("series")
        p.add_argument("--order", type=int, default=1, help="detrending polynomial order")
        if name == "dfa":
            p.add_argument("--abs", action="store_true", help="analyse absolute values")
        else:
            p.add_argument("--q", type=float, nargs=3, metavar=("QMIN", "QMAX", "N"))
        p.add_argument("-o", "--output", required=True)
        p.set_defaults(func=func)

    p = sub.add_parser("sweep", help="run the (H_s, H_x) sweep")
    p.add_argument("--config", help="flat JSON config")
    p.add_argument("--output-dir")
    p.add_argument("--workers", type=int)
    p.add_argument("--rounds", type=int)
    p.add_argument("--master-seed", type=int)
    p.add_argument("--h-s-grid", help="comma separated")
    p.add_argument("--h-x-grid", help="comma separated")
    p.add_argument("--thresholds", help="comma separated")
    _model_args(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit-surface", help="planar fit of beta on (H_x, H_s)")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("table", nargs="?", help="beta grid table or (h_x, h_s, beta) rows")
    src.add_argument("--published", action="store_true", help="use the built-in 5x5 table")
    p.add_argument("--permutations", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fit_surface)

    p = sub.add_parser("series", help="dump a generated input series (debugging)")
    p.add_argument("kind", choices=("fgn", "signs", "student", "prices"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--hurst", type=float, default=0.5)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--degrees-of-freedom", type=float, default=1.3)
    p.add_argument("--scale", type=float, default=0.0024)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("report", help="summary tables from a results directory")
    p.add_argument("results_dir")
    p.add_argument("--output-dir")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except (ParameterError, EmptyIntervalsError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER
    except (SimulationError, BookStateError) as exc:
        print(f"degenerate run: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except FitError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return EXIT_FIT
    return 0


if __name__ == "__main__":
    sys.exit(main())
