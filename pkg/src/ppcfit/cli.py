"""Command-line interface: ``ppcfit <command> [options]``.

Every option may also be given in a JSON ``--config`` file under its long
name with dashes replaced by underscores; explicit flags win. Exit codes:
0 success, 1 usage error, 2 validation error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from ppcfit import data as data_mod
from ppcfit.core import DEFAULT_SCALE, CognitionVector, EstimationScale, Population
from ppcfit.decoders import DECODER_KINDS, DEFAULT_PRIOR, DecoderSpec, HistogramPrior, SGrid, decode, parse_prior
from ppcfit.errors import (
    DatasetError,
    DegenerateConfigurationError,
    InvalidParameterError,
    InvalidPriorError,
    UndefinedEstimateError,
)
from ppcfit.feedback import (
    DEFAULT_TRIALS,
    SWEEP_TRIALS,
    Binning,
    FeedbackDistribution,
    bin_estimate,
    simulate_estimates,
)
from ppcfit.fitting import (
    CORRELATION_LABELS,
    ModelLibrary,
    build_grid,
    correlation_matrix,
    fit_targets,
    grid_from_preset,
    header_hash,
    precompute_library,
    read_fit_results,
    write_fit_results,
)
from ppcfit.neurodynamics import DEFAULT_BIN, DEFAULT_DURATION, fit_sine, population_events, rate_statistics
from ppcfit.noise import make_rng, sample_population_response

log = logging.getLogger("ppcfit")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _fmt(x) -> str:
    """Float text that round-trips exactly (and is stable across runs)."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def _write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=True)
        fh.write("\n")


def _out_dir(args) -> Path:
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scale(args) -> EstimationScale:
    lo, hi = args.scale
    return EstimationScale(float(lo), float(hi))


# -- commands ---------------------------------------------------------------


def cmd_gendata(args):
    ds = data_mod.synthesize_dataset(args.users, args.items, args.trials, args.seed, args.std_scale)
    out = Path(args.out or "ratings.csv")
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    data_mod.save_dataset(ds, out)
    print(f"wrote {out}")
    print(data_mod.category_summary(ds))


def cmd_simulate(args):
    scale = _scale(args)
    xi = CognitionVector.parse(args.xi).check_scale(scale)
    decoder = DecoderSpec.parse(args.decoder, args.prior)
    binning = Binning.parse(args.binning, scale)
    est = simulate_estimates(xi, decoder, args.trials, make_rng(args.seed), scale, SGrid(scale, args.grid_step))
    counts = np.bincount(bin_estimate(est, scale, binning), minlength=binning.k)
    dist = FeedbackDistribution.from_counts(counts, binning)
    doc = dist.to_dict()
    doc.update({
        "xi": list(xi.as_tuple()),
        "decoder": decoder.label(),
        "trials": args.trials,
        "seed": args.seed,
        "mean_estimate": float(est.mean()),
        "std": dist.std(scale),
    })
    if args.out is None:
        print(json.dumps(doc, indent=2, sort_keys=True))
        return
    out = _out_dir(args)
    _write_json(out / "feedback.json", doc)
    _write_csv(out / "feedback.csv", ["bin", "center", "probability"],
               [(i, c, p) for i, (c, p) in enumerate(zip(binning.centers(scale), dist.probs))])
    if not args.no_plot:
        from ppcfit.plotting import plot_feedback

        plot_feedback(dist, out / "feedback.svg", f"{decoder.kind.upper()}  xi={args.xi}", scale)
    print(f"wrote {out / 'feedback.json'}")


def cmd_decode(args):
    scale = _scale(args)
    xi = CognitionVector.parse(args.xi).check_scale(scale)
    pop = Population.from_cognition(xi, scale)
    rng = make_rng(args.seed)
    if args.counts:
        counts = np.array([int(c) for c in args.counts.split(",")], dtype=np.int64)
        if np.any(counts < 0):
            raise InvalidParameterError("spike counts must be nonnegative")
    else:
        counts = sample_population_response(xi, scale, rng)
    grid = SGrid(scale, args.grid_step)
    kinds = DECODER_KINDS if args.decoder == "all" else tuple(args.decoder.split(","))
    estimates = {}
    for kind in kinds:
        spec = DecoderSpec.parse(kind, args.prior)
        try:
            estimates[kind] = decode(counts, pop, spec, rng=rng, grid=grid)
        except UndefinedEstimateError:
            estimates[kind] = None
    doc = {"xi": list(xi.as_tuple()), "counts": counts.tolist(), "estimates": estimates}
    if args.out is None:
        print(json.dumps(doc, indent=2, sort_keys=True))
    else:
        _write_json(_out_dir(args) / "decode.json", doc)


def _fit_grid(args):
    if isinstance(args.grid, dict):
        return build_grid(args.grid)
    return grid_from_preset(args.grid)


def _mad_prior(args, dataset, sgrid):
    if args.prior in (None, "", "default"):
        return DEFAULT_PRIOR
    if args.prior == "data":
        # pooled rating histogram of the whole dataset, spread over the grid
        ratings = np.array([r.rating for r in dataset.records])
        probs = np.bincount(ratings - 1, minlength=5) / len(ratings)
        return HistogramPrior.from_bins(probs, sgrid)
    return parse_prior(args.prior)


def cmd_fit(args):
    scale = _scale(args)
    out = _out_dir(args)
    if args.data:
        dataset = data_mod.load_dataset(args.data)
    else:
        dataset = data_mod.synthesize_dataset(seed=args.seed)
        data_mod.save_dataset(dataset, out / "ratings.csv")
    targets = (data_mod.pooled_distributions(dataset) if args.targets == "pooled"
               else data_mod.empirical_distributions(dataset))
    data_mod.write_distributions_json(targets, out / "targets.json")
    grid = _fit_grid(args)
    sgrid = SGrid(scale, args.grid_step)
    binning = Binning.parse(args.binning, scale)
    results, scores = [], {}
    for kind in args.decoders.split(","):
        kind = kind.strip().lower()
        prior = _mad_prior(args, dataset, sgrid) if kind == "mad" else None
        decoder = DecoderSpec(kind, prior)
        path = out / f"library_{kind}.json"
        library = None
        if args.resume and path.exists():
            cached = ModelLibrary.load(path)
            wanted = ModelLibrary(grid, decoder, args.trials, args.seed, cached.probs, cached.failed,
                                  binning, scale, sgrid)
            if cached.header_hash() == header_hash(wanted.header()):
                library = cached
                log.info("reusing %s", path)
            else:
                log.info("header of %s does not match this run; recomputing", path)
        if library is None:
            library = precompute_library(grid, decoder, args.trials, args.seed, args.workers, binning, scale, sgrid)
            library.save(path)
        fits = fit_targets(targets, library)
        results.extend(fits)
        scores[kind] = [r.jsd for r in fits]
        if len(fits) >= 3:
            corr = correlation_matrix(fits)
            _write_csv(out / f"correlation_{kind}.csv", ["variable", *CORRELATION_LABELS],
                       [(lab, *row) for lab, row in zip(CORRELATION_LABELS, corr)])
        print(f"{kind}: {len(fits)} targets, median best JSD {np.median(scores[kind]):.4f}"
              f"{' (' + str(int(library.failed.sum())) + ' failed cells)' if library.failed.any() else ''}")
    write_fit_results(results, out / "fit_results.csv")
    _write_csv(out / "best_scores.csv", ["decoder", "count", "median", "mean", "min", "max"],
               [(k, len(v), float(np.median(v)), float(np.mean(v)), float(np.min(v)), float(np.max(v)))
                for k, v in scores.items()])
    if not args.no_plot:
        from ppcfit.plotting import plot_best_scores

        plot_best_scores(scores, out / "best_scores.svg")
    print(f"wrote {out / 'fit_results.csv'}")


def _events_report(xi, args, rng, out, stem):
    scale = _scale(args)
    rates = Population.from_cognition(xi, scale).rates(xi.s)
    binned = population_events(rates, args.duration, args.bin_width, rng, args.mode)
    fit = fit_sine(binned)
    t = binned.centers
    _write_csv(out / f"{stem}.csv", ["bin_center", "count", "fit"], zip(t, binned.counts, fit(t)))
    summary = {
        "xi": list(xi.as_tuple()),
        "mode": args.mode,
        "duration": args.duration,
        "bin_width": args.bin_width,
        "total_spikes": int(binned.counts.sum()),
        "frequency": fit.frequency if fit.defined else None,
        "amplitude": fit.amplitude,
        "phase": fit.phase,
        "offset": fit.offset,
        "rms": fit.rms,
    }
    _write_json(out / f"{stem}.json", summary)
    if not args.no_plot:
        from ppcfit.plotting import plot_events

        plot_events(binned, fit, out / f"{stem}.svg")
    return fit


def cmd_eeg(args):
    xi = CognitionVector.parse(args.xi).check_scale(_scale(args))
    out = _out_dir(args)
    fit = _events_report(xi, args, make_rng(args.seed), out, "events")
    print(f"EEG frequency: {fit.frequency:.3f} Hz" if fit.defined else "no oscillation")


def cmd_analyze(args):
    scale = _scale(args)
    out = _out_dir(args)
    results = [r for r in read_fit_results(args.results) if r.decoder.split("[")[0] == args.decoder]
    if not results:
        raise InvalidParameterError(f"no {args.decoder} rows in {args.results}")
    ensemble = [r.xi for r in results]

    stats = rate_statistics(ensemble, scale)
    _write_json(out / "rate_stats.json", {k: v for k, v in stats.to_dict().items()})
    hist, edges = np.histogram(stats.rates, bins=35, range=(0, max(70.0, float(stats.rates.max()))))
    _write_csv(out / "rates.csv", ["bin_lo", "bin_hi", "count"], zip(edges[:-1], edges[1:], hist))

    freqs = []
    for i, xi in enumerate(ensemble):
        rates = Population.from_cognition(xi, scale).rates(xi.s)
        fit = fit_sine(population_events(rates, args.duration, args.bin_width, make_rng(args.seed, i), args.mode))
        freqs.append(fit.frequency)
    _write_csv(out / "eeg_frequencies.csv", ["target_user", "target_item", "n", "g", "w", "o", "s", "frequency"],
               [(r.user, r.item, *r.xi.as_tuple(), f) for r, f in zip(results, freqs)])
    finite = np.array([f for f in freqs if math.isfinite(f)])
    eeg_summary = {
        "count": len(freqs),
        "defined": int(finite.size),
        "median": float(np.median(finite)) if finite.size else None,
        "fraction_30_40": float(np.mean((finite >= 30) & (finite <= 40))) if finite.size else None,
        "fraction_gamma": float(np.mean((finite >= 30) & (finite <= 100))) if finite.size else None,
    }
    _write_json(out / "eeg_summary.json", eeg_summary)

    corr = correlation_matrix(results) if len(results) >= 3 else None
    if corr is not None:
        _write_csv(out / "correlation.csv", ["variable", *CORRELATION_LABELS],
                   [(lab, *row) for lab, row in zip(CORRELATION_LABELS, corr)])
    if not args.no_plot:
        from ppcfit.plotting import plot_correlation, plot_eeg_histogram, plot_rate_histogram

        plot_rate_histogram(stats, out / "rates.svg")
        plot_eeg_histogram(freqs, out / "eeg.svg")
        if corr is not None:
            plot_correlation(corr, CORRELATION_LABELS, out / "correlation.svg")
    print(f"mean rate {stats.mean_rate:.2f} Hz, median EEG frequency {eeg_summary['median']}")


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master random seed")
    common.add_argument("--config", help="JSON file with option defaults")
    common.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    common.add_argument("--out", help="output directory (file for gendata)")
    common.add_argument("--scale", type=float, nargs=2, default=[DEFAULT_SCALE.lo, DEFAULT_SCALE.hi],
                        metavar=("LO", "HI"))
    common.add_argument("--no-plot", action="store_true", help="skip SVG figures")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="ppcfit", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gendata", parents=[common], help="write a synthetic rating dataset")
    p.add_argument("--users", type=int, default=data_mod.STUDY_USERS)
    p.add_argument("--items", type=int, default=data_mod.STUDY_ITEMS)
    p.add_argument("--trials", type=int, default=data_mod.STUDY_TRIALS)
    p.add_argument("--std-scale", type=float, default=data_mod.DEFAULT_STD_SCALE)
    p.set_defaults(func=cmd_gendata)

    def decoder_opts(p, decoder_default):
        p.add_argument("--decoder", default=decoder_default)
        p.add_argument("--prior", default=None, help="MAD prior: flat | gaussian:MU:VAR | histogram:p1,...")
        p.add_argument("--grid-step", type=float, default=0.01)

    p = sub.add_parser("simulate", parents=[common], help="feedback distribution of one cognition vector")
    p.add_argument("--xi", required=True, help="n,g,w,o,s")
    decoder_opts(p, "mld")
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    p.add_argument("--binning", default="stars")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("decode", parents=[common], help="decode one population response")
    p.add_argument("--xi", required=True, help="n,g,w,o,s (s is used only to sample a response)")
    p.add_argument("--counts", help="comma-separated spike counts; sampled from xi if omitted")
    decoder_opts(p, "all")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("fit", parents=[common], help="fit cognition vectors to rating distributions")
    p.add_argument("--data", help="ratings CSV; a synthetic dataset is generated if omitted")
    p.add_argument("--grid", default="desk", help="desk | full (config files may give a range dict)")
    p.add_argument("--decoders", default="mvd,wad,mld,mad")
    p.add_argument("--prior", default=None, help="MAD prior, or 'data' for the pooled rating histogram")
    p.add_argument("--grid-step", type=float, default=0.01)
    p.add_argument("--trials", type=int, default=SWEEP_TRIALS)
    p.add_argument("--binning", default="stars")
    p.add_argument("--targets", choices=["pair", "pooled"], default="pair",
                   help="fit each (user, item) or each item pooled over users")
    p.add_argument("--resume", action="store_true", help="reuse library files whose header matches")
    p.set_defaults(func=cmd_fit)

    def events_opts(p):
        p.add_argument("--duration", type=float, default=DEFAULT_DURATION)
        p.add_argument("--bin-width", type=float, default=DEFAULT_BIN)
        p.add_argument("--mode", choices=["periodic", "poisson"], default="periodic")

    p = sub.add_parser("eeg", parents=[common], help="events over time and sine fit for one cognition vector")
    p.add_argument("--xi", required=True)
    events_opts(p)
    p.set_defaults(func=cmd_eeg)

    p = sub.add_parser("analyze", parents=[common], help="rate, EEG and correlation reports from fit results")
    p.add_argument("--results", required=True, help="fit_results.csv from the fit command")
    p.add_argument("--decoder", default="mld")
    events_opts(p)
    p.set_defaults(func=cmd_analyze)
    return parser, sub


def parse_args(argv=None):
    parser, sub = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            config = json.load(fh)
        if not isinstance(config, dict):
            raise UsageError("config file must hold a JSON object")
        sub_parser = sub.choices[args.command]
        known = {a.dest for a in sub_parser._actions}
        unknown = set(config) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        sub_parser.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (OSError, json.JSONDecodeError) as exc:
        print(f"ppcfit: cannot read config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except (InvalidParameterError, InvalidPriorError, DatasetError, FileNotFoundError) as exc:
        print(f"ppcfit {args.command}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DegenerateConfigurationError, UndefinedEstimateError) as exc:
        print(f"ppcfit {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
