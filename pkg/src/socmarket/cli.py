"""Command-line surface: simulate, avalanches, gains, series, garch-fit,
ingest, report.

Every command resolves a RunConfig (file defaults, flag overrides), writes
its artifacts into --out-dir (default $SOC_OUT_DIR, then the config value),
and records them in run.json. `report` renders figures for everything
present and consolidates the manifest. Failures exit nonzero with a single
`error <Class>: <message>` line on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__, analysis, figures, gains
from .bars import GapPolicy, historical_returns, read_bars, scan_minutes, write_bars
from .ensemble import ensemble_avalanches, member_config
from .errors import InputError, ParseError, SocMarketError, ValidationError
from .garch import fit, fit_report, write_garch_fit_json
from .lattice import (EntropyRecorder, HitLogRecorder, SignalTraceRecorder,
                      init_random, run, write_snapshot_csv, write_snapshot_frame)
from .runcfg import load_run_config, with_overrides
from .seeds import derive_seeds
from .series import from_lattice, prices, rescale, volatility, write_series_csv


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="run configuration file (INI)")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out-dir", default=None,
                   help="output directory (default $SOC_OUT_DIR, then config)")
    p.add_argument("--jobs", type=int, default=None, help="parallel ensemble workers")
    p.add_argument("--n-intervals", type=int, default=None, help="lattice size n override")
    p.add_argument("--variance-w", type=float, default=None, help="draw variance override")
    p.add_argument("--tie-break", choices=("lowest", "random"), default=None)


def _resolve(args):
    from .lattice import TieBreak
    cfg = load_run_config(args.config)
    tie = None
    if args.tie_break is not None:
        tie = (TieBreak.RANDOM_AMONG_TIES if args.tie_break == "random"
               else TieBreak.LOWEST_INDEX)
    cfg = with_overrides(
        cfg,
        seed=args.seed,
        n_intervals=args.n_intervals,
        variance_w=args.variance_w,
        tie_break=tie,
        jobs=args.jobs)
    out_dir = args.out_dir or os.environ.get("SOC_OUT_DIR") or cfg.out_dir
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return cfg, out


def _update_run_json(out: Path, command: str, cfg, per_run_seeds, artifacts) -> None:
    path = out / "run.json"
    if path.exists():
        data = json.loads(path.read_text(encoding="utf-8"))
    else:
        data = {"config_hash": "", "master_seed": 0, "commands": [],
                "per_run_seeds": {}, "artifacts": {}}
    data["config_hash"] = cfg.config_hash()
    data["master_seed"] = cfg.lattice.seed
    if command not in data["commands"]:
        data["commands"].append(command)
    if per_run_seeds is not None:
        data["per_run_seeds"][command] = per_run_seeds
    data["artifacts"].update(artifacts)
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_activity_csv(hits, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("j,H\n")
        for j, h in enumerate(hits):
            fh.write(f"{j},{int(h)}\n")


def cmd_simulate(args) -> int:
    cfg, out = _resolve(args)
    steps = args.steps if args.steps is not None else cfg.equilibration_steps
    state = init_random(cfg.lattice)
    trace_rec = SignalTraceRecorder()
    ent_rec = EntropyRecorder(every=args.entropy_every)
    recorders = [trace_rec, ent_rec]
    hit_rec = None
    if args.hit_window:
        lo, hi = (int(x) for x in args.hit_window.split(":"))
        hit_rec = HitLogRecorder(record_range=(lo, hi))
        recorders.append(hit_rec)
    run(state, steps, recorders)

    artifacts = {}
    trace = analysis.SignalTrace(trace_rec.values, config=cfg.lattice)
    analysis.write_trace_csv(trace, out / "trace.csv")
    artifacts["trace"] = "trace.csv"
    s, vals = ent_rec.samples
    analysis.write_entropy_csv(s, vals, out / "entropy.csv")
    artifacts["entropy"] = "entropy.csv"
    _write_activity_csv(state.hits, out / "activity.csv")
    artifacts["activity"] = "activity.csv"
    if hit_rec is not None:
        hs, hj = hit_rec.entries
        analysis.write_hit_log_csv(hs, hj, out / "hitlog.csv")
        artifacts["hitlog"] = "hitlog.csv"
    write_snapshot_csv(state, out / "snapshot.csv")
    write_snapshot_frame(state, out / "snapshot.socl")
    artifacts["snapshot_csv"] = "snapshot.csv"
    artifacts["snapshot_frame"] = "snapshot.socl"
    _update_run_json(out, "simulate", cfg, [cfg.lattice.seed], artifacts)
    return 0


def cmd_avalanches(args) -> int:
    cfg, out = _resolve(args)
    steps = args.steps if args.steps is not None else cfg.equilibration_steps
    runs = args.runs if args.runs is not None else cfg.ensemble_runs
    records = ensemble_avalanches(cfg.lattice, steps, runs, jobs=cfg.jobs)
    hist = analysis.size_histogram(records, bin_width=cfg.aval_bin_width,
                                   n_bins=cfg.aval_n_bins)
    power = analysis.fit_power_law(hist, (cfg.fit_lambda_min, cfg.fit_lambda_max))

    member0 = init_random(member_config(cfg.lattice, None, 0))
    rec0 = SignalTraceRecorder()
    run(member0, steps, [rec0])
    trace0 = analysis.SignalTrace(rec0.values, config=member0.config)
    gap0 = analysis.gap_function(trace0)

    artifacts = {}
    analysis.write_trace_csv(trace0, out / "trace.csv")
    analysis.write_gap_csv(gap0, out / "gap.csv")
    analysis.write_avalanches_csv(analysis.avalanches(gap0, len(trace0)), out / "avalanches.csv")
    analysis.write_size_histogram_csv(hist, out / "avalanche_hist.csv")
    analysis.write_power_law_json(power, out / "power_law_fit.json")
    artifacts.update({"trace": "trace.csv", "gap": "gap.csv",
                      "avalanches": "avalanches.csv",
                      "avalanche_hist": "avalanche_hist.csv",
                      "power_law_fit": "power_law_fit.json"})
    _update_run_json(out, "avalanches", cfg, derive_seeds(cfg.lattice.seed, runs), artifacts)
    return 0


def cmd_gains(args) -> int:
    cfg, out = _resolve(args)
    steps = args.steps if args.steps is not None else cfg.equilibration_steps
    runs = args.runs if args.runs is not None else cfg.ensemble_runs
    hist = gains.ensemble_gains(cfg.lattice, runs, steps,
                                bin_width=cfg.gains_bin_width,
                                r_range=(cfg.gains_r_min, cfg.gains_r_max),
                                jobs=cfg.jobs)
    artifacts = {}
    gains.write_gains_csv(hist, out / "gains_hist.csv")
    artifacts["gains_hist"] = "gains_hist.csv"
    center = gains.fit_gaussian(hist, gains.Region.center(cfg.gains_center_points))
    tails = gains.fit_gaussian(hist, gains.Region.tails(cfg.gains_tail_points))
    gains.write_gaussian_fit_json(center, out / "gauss_center.json")
    gains.write_gaussian_fit_json(tails, out / "gauss_tails.json")
    artifacts["gauss_center"] = "gauss_center.json"
    artifacts["gauss_tails"] = "gauss_tails.json"
    if args.overlay:
        scaled = gains.apply_overlay(hist, gains.NASDAQ_OVERLAY)
        gains.write_gains_csv(scaled, out / "gains_hist_overlay.csv")
        artifacts["gains_hist_overlay"] = "gains_hist_overlay.csv"
    _update_run_json(out, "gains", cfg, derive_seeds(cfg.lattice.seed, runs), artifacts)
    return 0


def cmd_series(args) -> int:
    cfg, out = _resolve(args)
    steps = args.steps if args.steps is not None else cfg.equilibration_steps
    artifacts = {}
    seeds = []
    for i in range(args.sets):
        member = member_config(cfg.lattice, None, i)
        seeds.append(member.seed)
        state = init_random(member)
        run(state, steps)
        r = rescale(from_lattice(state), cfg.lam)
        p = prices(r, cfg.p0)
        v = volatility(r)
        name = f"series_lattice_set{i + 1}.csv"
        write_series_csv(out / name, r, p, v)
        artifacts[f"series_lattice_set{i + 1}"] = name

    if args.bars:
        bars = read_bars(args.bars)
        length = args.length if args.length is not None else cfg.lattice.n_intervals
        policy = (GapPolicy.SKIP_SESSION_BREAKS if args.gap_policy == "skip-session-breaks"
                  else GapPolicy.IGNORE)
        offsets = [int(x) for x in args.offsets.split(",")] if args.offsets else []
        for k, off in enumerate(offsets):
            r = historical_returns(bars, (off, length), policy,
                                   source=Path(args.bars).name)
            p = prices(r, p0=bars[off].close)
            v = volatility(r)
            name = f"series_hist_set{k + 1}.csv"
            write_series_csv(out / name, r, p, v)
            artifacts[f"series_hist_set{k + 1}"] = name
    _update_run_json(out, "series", cfg, seeds, artifacts)
    return 0


def _returns_from_series_csv(path) -> np.ndarray:
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or "r" not in reader.fieldnames:
            raise ParseError(f"{path}: expected a j,r,p,v series file")
        values = [float(row["r"]) for row in reader if row["r"] != ""]
    if len(values) < 2:
        raise InputError(f"{path}: no returns found")
    return np.asarray(values)


def cmd_garch_fit(args) -> int:
    cfg, out = _resolve(args)
    artifacts = {}
    lattice_fits, hist_fits = [], []
    for group, paths, fits in (("lattice", args.lattice_series, lattice_fits),
                               ("hist", args.historical_series, hist_fits)):
        for i, path in enumerate(paths or []):
            result = fit(_returns_from_series_csv(path),
                         max_iter=cfg.garch_max_iter, rel_tol=cfg.garch_rel_tol)
            fits.append(result)
            name = f"garch_{group}_set{i + 1}.json"
            write_garch_fit_json(result, Path(path).stem, out / name)
            artifacts[f"garch_{group}_set{i + 1}"] = name

    if lattice_fits and hist_fits:
        blocks = []
        for i, (lf, hf) in enumerate(zip(lattice_fits, hist_fits)):
            blocks.append(fit_report(lf, hf, labels=(f"Set {i + 1} L", f"Set {i + 1} N")))
        (out / "garch_tables.txt").write_text("\n\n".join(blocks) + "\n", encoding="utf-8")
        artifacts["garch_tables"] = "garch_tables.txt"
    _update_run_json(out, "garch-fit", cfg, None, artifacts)
    return 0


def cmd_ingest(args) -> int:
    cfg, out = _resolve(args)
    column_map = tuple(args.columns.split(",")) if args.columns else None
    header = {"auto": None, "yes": True, "no": False}[args.header]
    kwargs = dict(delimiter=args.delimiter, has_header=header)
    if column_map:
        kwargs["column_map"] = column_map
    bars, problems = scan_minutes(args.input, **kwargs)
    for lineno, kind, msg in problems:
        print(f"{args.input}: line {lineno}: {kind}: {msg}", file=sys.stderr)
    if problems and not args.skip_bad:
        lineno, kind, msg = problems[0]
        err = ParseError if kind == "parse" else ValidationError
        raise err(f"{args.input}: line {lineno}: {msg} "
                  f"({len(problems)} bad rows; use --skip-bad to ignore)")
    name = args.output or "bars.csv"
    write_bars(bars, out / name)
    _update_run_json(out, "ingest", cfg, None, {"bars": name})
    print(f"ingested {len(bars)} bars, {len(problems)} bad rows -> {out / name}")
    return 0


def cmd_report(args) -> int:
    cfg, out = _resolve(args)
    run_path = out / "run.json"
    if run_path.exists():
        data = json.loads(run_path.read_text(encoding="utf-8"))
    else:
        data = {"config_hash": cfg.config_hash(), "master_seed": cfg.lattice.seed,
                "commands": [], "per_run_seeds": {}, "artifacts": {}}
    figs = figures.render_run_figures(out)
    manifest = {
        "config_hash": data["config_hash"],
        "master_seed": data["master_seed"],
        "per_run_seeds": data["per_run_seeds"],
        "commands": data["commands"],
        "artifacts": data["artifacts"],
        "figures": figs,
        "versions": _versions(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                                       encoding="utf-8")
    print(f"manifest -> {out / 'manifest.json'} ({len(figs)} figures)")
    return 0


def _versions() -> dict[str, str]:
    import matplotlib
    import scipy
    return {"socmarket": __version__, "numpy": np.__version__,
            "scipy": scipy.__version__, "matplotlib": matplotlib.__version__}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="socmarket",
                                     description="SOC lattice market simulator and analysis")
    parser.add_argument("--version", action="version", version=f"socmarket {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="single run: trace, entropy, activity, snapshot")
    _add_common(p)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--entropy-every", type=int, default=100)
    p.add_argument("--hit-window", default=None, metavar="LO:HI",
                   help="record hit log for steps in [LO, HI]")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("avalanches", help="ensemble gap/avalanche statistics and power-law fit")
    _add_common(p)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.set_defaults(func=cmd_avalanches)

    p = sub.add_parser("gains", help="ensemble gains histogram with Gaussian fits")
    _add_common(p)
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--runs", type=int, default=None)
    p.add_argument("--overlay", action="store_true",
                   help="also write the histogram under historical axis scaling")
    p.set_defaults(func=cmd_gains)

    p = sub.add_parser("series", help="returns/price/volatility series files")
    _add_common(p)
    p.add_argument("--sets", type=int, default=1, help="number of lattice series")
    p.add_argument("--steps", type=int, default=None)
    p.add_argument("--bars", default=None, help="normalized bar store for historical sets")
    p.add_argument("--offsets", default=None, help="comma-separated bar offsets")
    p.add_argument("--length", type=int, default=None, help="historical window length")
    p.add_argument("--gap-policy", choices=("ignore", "skip-session-breaks"),
                   default="ignore")
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("garch-fit", help="GARCH(1,1) fits and comparison tables")
    _add_common(p)
    p.add_argument("--lattice-series", nargs="*", default=[], metavar="CSV")
    p.add_argument("--historical-series", nargs="*", default=[], metavar="CSV")
    p.set_defaults(func=cmd_garch_fit)

    p = sub.add_parser("ingest", help="normalize a raw minute-bar file")
    _add_common(p)
    p.add_argument("--input", required=True)
    p.add_argument("--columns", default=None,
                   help="comma-separated field order, e.g. date,time,open,high,low,close,volume")
    p.add_argument("--delimiter", default=None)
    p.add_argument("--header", choices=("auto", "yes", "no"), default="auto")
    p.add_argument("--skip-bad", action="store_true")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("report", help="render figures and write the run manifest")
    _add_common(p)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SocMarketError as exc:
        print(f"error {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
