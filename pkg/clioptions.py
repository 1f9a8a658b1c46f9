import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from common.estimation import best_report, estimate_photon_stats, pattern_table, scan_witness
from common.fockoracle import antisqueeze_trajectory, loss_trajectory, threshold_transmittance
from common.gaussianmodel import (
    heralding_probability,
    marginal_variance,
    model_trajectory,
    prepare_state,
    squeezing_db,
    wigner_origin,
)
from common.histogramml import ml_scan
from common.homodynesim import generate_dataset, read_dataset, write_dataset
from common.iniconfig import IniConfig
from common.logsetup import setup_logging
from common.modelfit import FitPoint, FitSpec, fit
from common.reportconfig import emit_report, write_csv, write_rows
from common.witnesscore import (
    classical_bound,
    coherent_boundary_curve,
    gaussian_bound,
    gaussian_boundary_curve,
)

logger = logging.getLogger(__name__)

COMMANDS = ("boundary", "thresholds", "trajectory", "simulate", "estimate",
            "witness", "ml", "fit", "patterns", "model")


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise UsageError(message)


def _side_csv(out):
    """CSV table beside the JSON report; never the report path itself."""
    out = Path(out)
    side = out.with_suffix(".csv")
    if side == out:
        side = out.with_name(f"{out.stem}_rows.csv")
    return side


def _emit(args, iniconfig, results, header=None, rows=None):
    """JSON report to --out (stdout without it); an optional CSV lands beside it."""
    config = {"args": {k: v for k, v in vars(args).items() if k != "func"}, "ini": iniconfig.as_dict()}
    if args.out:
        emit_report(results, args.out, args.command, config)
        logger.info(f"Wrote {args.out}")
        if rows is not None:
            side = _side_csv(args.out)
            write_csv(side, header, rows)
            logger.info(f"Wrote {side}")
    else:
        emit_report(results, None, args.command, config, stream=sys.stdout)


def _emit_csv(args, header, rows):
    if args.out:
        write_csv(args.out, header, rows)
        logger.info(f"Wrote {args.out} ({len(rows)} rows)")
    else:
        write_rows(sys.stdout, header, rows)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def boundaryCurves(args, iniconfig):
    if args.kind == "gaussian":
        r = np.linspace(0.0, args.r_max, args.points)
        p0, p1 = gaussian_boundary_curve(r)
        rows = list(zip(p0, p1))
        header = ["p0", "p1"]
    elif args.kind == "coherent":
        nbar = np.linspace(0.0, args.r_max, args.points)
        p0, p1 = coherent_boundary_curve(nbar)
        rows = list(zip(p0, p1))
        header = ["p0", "p1"]
    elif args.kind == "physical":
        p0 = np.linspace(1.0, 0.0, args.points)
        rows = list(zip(p0, 1.0 - p0))
        header = ["p0", "p1"]
    else:
        lo, hi = iniconfig.a_range()
        rows = []
        for a in np.linspace(lo, hi, args.points):
            wg, r0 = gaussian_bound(float(a))
            rows.append((a, wg, r0, classical_bound(float(a))))
        header = ["a", "WG", "r0", "Wcl"]
    _emit_csv(args, header, rows)
    return 0


def thresholdCurves(args, iniconfig):
    rows = []
    for r in np.linspace(args.r_max / args.points, args.r_max, args.points):
        bare = threshold_transmittance(float(r))
        squeezed = threshold_transmittance(float(r), with_antisqueezing=True)
        logger.info(f"r={r:.3f}: eta_th={bare:.4f} eta_th,s={squeezed:.4f}")
        rows.append((r, bare, squeezed))
    _emit_csv(args, ["r", "eta_th", "eta_th_s"], rows)
    return 0


def trajectoryCurves(args, iniconfig):
    rows = []
    if args.kind == "loss":
        etas = np.linspace(1.0, 0.0, args.points)
        for r in args.r:
            rows.extend((r,) + row for row in loss_trajectory(r, etas))
        header = ["r", "eta", "p0", "p1"]
    else:
        for r in args.r:
            rows.extend((r, args.eta) + row for row in antisqueeze_trajectory(r, args.eta, iniconfig.s_grid()))
        header = ["r", "eta", "s", "p0", "p1"]
    _emit_csv(args, header, rows)
    return 0


def simulateData(args, iniconfig):
    if not args.out:
        raise ValueError("simulate needs --out for the dataset CSV")
    K, M, seed = iniconfig.simulation()
    state = prepare_state(iniconfig.model_params())
    dataset = generate_dataset(state, K, M, seed)
    write_dataset(dataset, args.out)
    logger.info(f"Wrote {dataset.N} samples to {args.out}")
    return 0


def estimateProbabilities(args, iniconfig):
    dataset = read_dataset(args.dataset)
    stats = [estimate_photon_stats(dataset, float(s)) for s in iniconfig.s_grid()]
    rows = [(st.s, st.p0, st.p1, st.var_p0, st.var_p1, st.cov01) for st in stats]
    _emit(args, iniconfig, {"stats": [st.to_dict() for st in stats]},
          ["s", "p0", "p1", "var_p0", "var_p1", "cov01"], rows)
    return 0


def witnessScan(args, iniconfig):
    dataset = read_dataset(args.dataset)
    reports = scan_witness(dataset, iniconfig.s_grid(), iniconfig.a_range())
    best = best_report(reports)
    logger.info(f"Best s={best.params.s:+.3f} a_opt={best.params.a:.4f} "
                f"W-WG={best.W - best.WG:.4f} +- {best.deltaW:.4f} WR={best.WR:.3f}")
    rows = [(rp.params.s, rp.params.a, rp.W, rp.deltaW, rp.WG, rp.WR) for rp in reports]
    results = {
        "best": best.to_dict(),
        "s": best.params.s,
        "a_opt": best.params.a,
        "WR": best.WR,
        "reports": [rp.to_dict() for rp in reports],
    }
    _emit(args, iniconfig, results, ["s", "a_opt", "W", "deltaW", "WG", "WR"], rows)
    return 0


def mlEstimate(args, iniconfig):
    dataset = read_dataset(args.dataset)
    nmax = iniconfig.getint('Estimation', 'nmax')
    results = ml_scan(dataset, iniconfig.s_grid(), iniconfig.binning(), nmax,
                      iniconfig.getint('Estimation', 'maxiter'), iniconfig.getfloat('Estimation', 'tol'))
    rows = [(res.s, res.p0, res.p1, res.log_likelihood, res.iterations, res.converged) for res in results]
    _emit(args, iniconfig, {"ml": [res.to_dict() for res in results]},
          ["s", "p0", "p1", "log_likelihood", "iterations", "converged"], rows)
    return 0


def fitModel(args, iniconfig):
    dataset = read_dataset(args.dataset)
    s_grid = iniconfig.s_grid()
    points = [FitPoint.from_stats(estimate_photon_stats(dataset, float(s))) for s in s_grid]
    spec = FitSpec(
        data=points,
        fixed=iniconfig.model_params(),
        free=iniconfig.fit_spec_bounds(),
        restarts=iniconfig.getint('Fit', 'restarts'),
        seed=iniconfig.getint('Fit', 'seed'),
        max_iter=iniconfig.getint('Fit', 'maxiter'),
    )
    result = fit(spec)
    model = model_trajectory(result.params, s_grid)
    rows = [(pt.s, pt.p0, pt.p1, np.sqrt(pt.var_p0), np.sqrt(pt.var_p1), m[1], m[2])
            for pt, m in zip(points, model)]
    _emit(args, iniconfig, {"fit": result.to_dict()},
          ["s", "p0", "p1", "sd_p0", "sd_p1", "p0_model", "p1_model"], rows)
    return 0


def patternCurves(args, iniconfig):
    x = np.linspace(-args.x_max, args.x_max, args.points)
    _emit_csv(args, ["x", "f0", "f1"], pattern_table(x))
    return 0


def modelSummary(args, iniconfig):
    params = iniconfig.model_params()
    state = prepare_state(params)
    rows = model_trajectory(params, iniconfig.s_grid())
    results = {
        "params": params.as_dict(),
        "heralding_probability": heralding_probability(params),
        "state": state.as_dict(),
        "wigner_origin": wigner_origin(state),
        "squeezing_db": {
            "x": squeezing_db(marginal_variance(state.gammaI, 0.0)),
            "p": squeezing_db(marginal_variance(state.gammaI, np.pi / 2)),
        },
        "trajectory": [{"s": s, "p0": p0, "p1": p1} for s, p0, p1 in rows],
    }
    _emit(args, iniconfig, results, ["s", "p0", "p1"], rows)
    return 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _common(parser):
    parser.add_argument("--config", help="INI or flat key = value file (default: the user config dir)")
    parser.add_argument("--out", help="Output path (JSON report, CSV beside it; CSV for curve commands)")
    parser.add_argument("--seed", type=int, help="Simulation seed")
    parser.add_argument("--s-grid", dest="s_grid", help="Anti-squeezing grid lo:step:hi")
    parser.add_argument("--s", dest="s_value", type=float, help="Single anti-squeezing value")
    parser.add_argument("--a-range", dest="a_range", help="Witness slope range lo:hi")
    parser.add_argument("--K", type=int, help="Number of phase bins")
    parser.add_argument("--M", type=int, help="Samples per phase bin")
    parser.add_argument("--n-max", dest="n_max", type=int, help="Fock cutoff for ML")
    parser.add_argument("--bins", help="Histogram binning dx:min:max")


def buildParser():
    parser = ArgumentParser(prog="qngwitness", allow_abbrev=False,
                            description="Quantum non-Gaussianity witness from homodyne data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("boundary", allow_abbrev=False, help="Boundary curves or witness bounds")
    p.add_argument("--kind", choices=("gaussian", "coherent", "physical", "witness"), default="gaussian")
    p.add_argument("--r-max", dest="r_max", type=float, default=3.0)
    p.add_argument("--points", type=int, default=300)
    p.set_defaults(func=boundaryCurves)

    p = sub.add_parser("thresholds", allow_abbrev=False, help="Threshold transmittance against squeezing")
    p.add_argument("--r-max", dest="r_max", type=float, default=2.0)
    p.add_argument("--points", type=int, default=20)
    p.set_defaults(func=thresholdCurves)

    p = sub.add_parser("trajectory", allow_abbrev=False, help="Loss or anti-squeezing trajectories")
    p.add_argument("--kind", choices=("loss", "antisqueeze"), default="loss")
    p.add_argument("--r", type=float, nargs="+", default=[0.5])
    p.add_argument("--eta", type=float, default=0.4)
    p.add_argument("--points", type=int, default=101)
    p.set_defaults(func=trajectoryCurves)

    p = sub.add_parser("simulate", allow_abbrev=False, help="Simulate a homodyne dataset")
    p.set_defaults(func=simulateData)

    for name, func, text in (("estimate", estimateProbabilities, "Pattern-function p0(s), p1(s)"),
                             ("witness", witnessScan, "Optimal witness over the s-grid"),
                             ("ml", mlEstimate, "Maximum-likelihood photon statistics"),
                             ("fit", fitModel, "Fit the model to estimated p0(s), p1(s)")):
        p = sub.add_parser(name, allow_abbrev=False, help=text)
        p.add_argument("dataset", help="Dataset CSV (bin,theta,x)")
        p.set_defaults(func=func)

    p = sub.add_parser("patterns", allow_abbrev=False, help="Pattern functions f0, f1")
    p.add_argument("--x-max", dest="x_max", type=float, default=5.0)
    p.add_argument("--points", type=int, default=201)
    p.set_defaults(func=patternCurves)

    p = sub.add_parser("model", allow_abbrev=False, help="Model trajectory and state summary")
    p.set_defaults(func=modelSummary)

    for p in sub.choices.values():
        _common(p)
    return parser


def parseArgs(argv):
    return buildParser().parse_args(argv)


def applyOverrides(args, iniconfig):
    """Command-line flags win over the config file."""
    if args.seed is not None:
        iniconfig.set('Simulation', 'seed', args.seed)
    if args.K is not None:
        iniconfig.set('Simulation', 'k', args.K)
    if args.M is not None:
        iniconfig.set('Simulation', 'm', args.M)
    if args.s_grid is not None:
        iniconfig.set('Estimation', 'sgrid', args.s_grid)
    if args.s_value is not None:
        iniconfig.set('Estimation', 'sgrid', repr(args.s_value))
    if args.a_range is not None:
        iniconfig.set('Estimation', 'arange', args.a_range)
    if args.n_max is not None:
        iniconfig.set('Estimation', 'nmax', args.n_max)
    if args.bins is not None:
        iniconfig.set('Estimation', 'bins', args.bins)
    # validate early so bad flags fail before any work
    iniconfig.s_grid()
    iniconfig.a_range()
    iniconfig.binning()
    return iniconfig


def run(argv):
    try:
        args = parseArgs(argv)
    except UsageError:
        return 1
    try:
        iniconfig = IniConfig(args.config)
        setup_logging(iniconfig)
        applyOverrides(args, iniconfig)
        return args.func(args, iniconfig)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
