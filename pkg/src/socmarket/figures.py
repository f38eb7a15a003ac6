"""Figure rendering for the report path.

Each function turns one delimited artifact (plus optional fit JSON) into a
PNG next to the data. render_run_figures scans an output directory for the
known artifact names and renders everything it finds, so `report` works on
whatever subset of the pipeline actually ran.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _read_csv(path, cols):
    """Named columns from a small delimited file; empty cells become NaN."""
    with open(path, "r", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = list(reader)
    out = []
    for name in cols:
        vals = [row[name] if row[name] != "" else "nan" for row in rows]
        out.append(np.array(vals, dtype=np.float64))
    return out


def fig_signal_trace(csv_path, png_path) -> None:
    s, v = _read_csv(csv_path, ("s", "V"))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(s, v, ",", color="black", rasterized=True)
    ax.set_yscale("log")
    ax.set_xlabel("update step s")
    ax.set_ylabel("signal V")
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def fig_gap(csv_path, png_path) -> None:
    x, level = _read_csv(csv_path, ("x_k", "level"))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.step(np.maximum(x, 1), level, where="post", color="black")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("update step x")
    ax.set_ylabel("gap G(x)")
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def fig_size_histogram(csv_path, png_path, fit_json=None) -> None:
    lam, counts, err = _read_csv(csv_path, ("lambda_bin_center", "mean_count", "stderr"))
    nz = counts > 0
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.errorbar(lam[nz], counts[nz], yerr=err[nz], fmt=".", ms=3, lw=0.6,
                color="black", ecolor="gray", label="ensemble mean")
    if fit_json is not None and Path(fit_json).exists():
        with open(fit_json, "r", encoding="utf-8") as fh:
            f = json.load(fh)
        grid = np.geomspace(f["lambda_min"], f["lambda_max"], 64)
        ax.plot(grid, f["amplitude"] * grid ** f["exponent"], "-", color="tab:red",
                label=f"{f['amplitude']:.0f} L^{f['exponent']:.2f}")
        ax.legend()
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("avalanche length L")
    ax.set_ylabel("dN/dL")
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def fig_activity(csv_path, png_path) -> None:
    j, h = _read_csv(csv_path, ("j", "H"))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(j, h, "-", lw=0.8, color="black")
    ax.set_xlabel("site j")
    ax.set_ylabel("hits H")
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def fig_hit_window(csv_path, png_path) -> None:
    s, j = _read_csv(csv_path, ("s", "j"))
    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.plot(s, j, marker="_", ls="none", ms=3, color="black", rasterized=True)
    ax.set_xlabel("update step s")
    ax.set_ylabel("site j")
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def fig_entropy(csv_path, png_path) -> None:
    s, vals = _read_csv(csv_path, ("s", "S"))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(s, np.abs(vals), ".", ms=2, color="black", rasterized=True)
    ax.set_yscale("log")
    ax.set_xlabel("update step s")
    ax.set_ylabel("|S|")
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def fig_gains(csv_path, png_path, center_json=None, tails_json=None) -> None:
    r, counts, err = _read_csv(csv_path, ("r_center", "mean_count", "stderr"))
    nz = counts > 0
    fig, ax = plt.subplots(figsize=(6.5, 5))
    ax.errorbar(r[nz], counts[nz], yerr=err[nz], fmt="o", ms=3, lw=0.6,
                color="black", ecolor="gray", label="lattice ensemble")
    grid = np.linspace(r.min(), r.max(), 400)
    for path, style, label in ((center_json, "--", "center Gaussian"),
                               (tails_json, ":", "tail Gaussian")):
        if path is not None and Path(path).exists():
            with open(path, "r", encoding="utf-8") as fh:
                f = json.load(fh)
            ax.plot(grid, f["amplitude"] * np.exp(-grid ** 2 / (2 * f["sigma"] ** 2)),
                    style, color="tab:red", label=label)
    floor = counts[nz].min() * 0.3
    ax.set_ylim(bottom=max(floor, 1e-12))
    ax.set_yscale("log")
    ax.set_xlabel("return r")
    ax.set_ylabel("dc/dr")
    ax.legend()
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


def fig_series(csv_path, png_path) -> None:
    j, r, p, v = _read_csv(csv_path, ("j", "r", "p", "v"))
    fig, axes = plt.subplots(3, 1, figsize=(6.5, 7), sharex=True)
    axes[0].plot(j, r, "-", lw=0.6, color="black")
    axes[0].set_ylabel("returns r")
    axes[1].plot(j, p, "-", lw=0.8, color="black")
    axes[1].set_ylabel("price p")
    axes[2].plot(j, v, "-", lw=0.6, color="black")
    axes[2].set_ylabel("volatility v")
    axes[2].set_xlabel("time step j")
    fig.tight_layout()
    fig.savefig(png_path, dpi=150)
    plt.close(fig)


_FIXED = (
    ("trace.csv", fig_signal_trace, "fig_trace.png"),
    ("gap.csv", fig_gap, "fig_gap.png"),
    ("activity.csv", fig_activity, "fig_activity.png"),
    ("hitlog.csv", fig_hit_window, "fig_hits.png"),
    ("entropy.csv", fig_entropy, "fig_entropy.png"),
)


def render_run_figures(out_dir) -> dict[str, str]:
    """Render figures for every known artifact present in out_dir.

    Returns {figure name: relative path} for the manifest.
    """
    out = Path(out_dir)
    made: dict[str, str] = {}

    def record(png: Path):
        made[png.stem] = png.name

    for name, renderer, png_name in _FIXED:
        src = out / name
        if src.exists():
            renderer(src, out / png_name)
            record(out / png_name)

    src = out / "avalanche_hist.csv"
    if src.exists():
        png = out / "fig_avalanche_hist.png"
        fig_size_histogram(src, png, fit_json=out / "power_law_fit.json")
        record(png)

    for src in sorted(out.glob("gains_hist*.csv")):
        png = out / f"fig_{src.stem}.png"
        center = out / "gauss_center.json" if src.stem == "gains_hist" else None
        tails = out / "gauss_tails.json" if src.stem == "gains_hist" else None
        fig_gains(src, png, center_json=center, tails_json=tails)
        record(png)

    for src in sorted(out.glob("series_*.csv")):
        png = out / f"fig_{src.stem}.png"
        fig_series(src, png)
        record(png)

    return made
