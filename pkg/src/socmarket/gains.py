"""Ensemble gains distributions and their Gaussian reference fits.

The gains histogram collects the field values of many independent
critical-state configurations (one snapshot per seeded run), normalized so
the total count equals the interval number n. Gaussian references are
fitted separately to the central bins and to the outermost tails; a fat-
tailed distribution shows up as a tail sigma well above the center sigma.
Overlay scale factors map the dimensionless histogram onto historical axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import weighted_line_fit
from .ensemble import ensemble_final_returns
from .errors import FitError, InputError
from .lattice import LatticeConfig


@dataclass(frozen=True)
class GainsHistogram:
    """Per-bin ensemble mean count density dc/dr with standard errors.

    The bin mass sums to `normalization` exactly: sum(counts) * bin_width
    == normalization.
    """

    bin_width: float
    centers: np.ndarray
    counts: np.ndarray
    errors: np.ndarray
    normalization: float
    n_samples: int


@dataclass(frozen=True)
class Region:
    """Bin selection for a Gaussian fit: k central bins, or n outermost
    nonzero bins per side counted inward."""

    kind: str
    n_points: int

    @classmethod
    def center(cls, n_points: int = 7) -> "Region":
        return cls("center", n_points)

    @classmethod
    def tails(cls, n_points_per_side: int = 38) -> "Region":
        return cls("tails", n_points_per_side)


@dataclass(frozen=True)
class GaussianFit:
    """amplitude * exp(-r^2 / (2 sigma^2)), zero-mean by construction."""

    amplitude: float
    sigma: float
    region: Region
    chi2: float
    n_points_used: int

    def predict(self, r) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        return self.amplitude * np.exp(-(r ** 2) / (2.0 * self.sigma ** 2))


@dataclass(frozen=True)
class OverlayScaling:
    """Axis factors mapping model units onto historical ones."""

    x_factor: float
    y_factor: float

    def __post_init__(self):
        if not (self.x_factor > 0 and self.y_factor > 0):
            raise InputError("overlay scale factors must be positive")


NASDAQ_OVERLAY = OverlayScaling(x_factor=2.4e-3, y_factor=1.1e5)


def ensemble_gains(config: LatticeConfig, n_runs: int, equilibration_steps: int,
                   bin_width: float = 0.05, r_range: tuple[float, float] = (-5.0, 5.0),
                   master_seed: int | None = None, jobs: int = 1) -> GainsHistogram:
    """Histogram the n+1 returns of n_runs equilibrated configurations.

    Bin counts are averaged over runs with a standard error per bin, then
    rescaled so the in-range mass equals n (one count per lattice interval).
    """
    if n_runs < 1:
        raise InputError(f"n_runs must be >= 1, got {n_runs}")
    if bin_width <= 0:
        raise InputError(f"bin_width must be positive, got {bin_width}")
    lo, hi = r_range
    if not lo < hi:
        raise InputError(f"empty histogram range {r_range}")
    n_bins = int(round((hi - lo) / bin_width))
    edges = lo + bin_width * np.arange(n_bins + 1)

    fields = ensemble_final_returns(config, equilibration_steps, n_runs,
                                    master_seed=master_seed, jobs=jobs)
    per_run = np.empty((n_runs, n_bins))
    for i in range(n_runs):
        counts, _ = np.histogram(fields[i], bins=edges)
        per_run[i] = counts / bin_width
    mean = per_run.mean(axis=0)
    if n_runs > 1:
        errors = per_run.std(axis=0, ddof=1) / np.sqrt(n_runs)
    else:
        errors = np.zeros(n_bins)

    target = float(config.n_intervals)
    mass = mean.sum() * bin_width
    if mass <= 0:
        raise InputError("histogram range captured no returns")
    factor = target / mass
    return GainsHistogram(bin_width=float(bin_width),
                          centers=edges[:-1] + 0.5 * bin_width,
                          counts=mean * factor, errors=errors * factor,
                          normalization=target, n_samples=n_runs)


def _select_bins(hist: GainsHistogram, region: Region) -> np.ndarray:
    nonzero = hist.counts > 0
    if region.kind == "center":
        order = np.argsort(np.abs(hist.centers), kind="stable")
        picked = [i for i in order if nonzero[i]][:region.n_points]
        if len(picked) < region.n_points:
            raise FitError(f"center fit needs {region.n_points} nonzero bins, "
                           f"found {len(picked)}")
        return np.sort(np.asarray(picked))
    if region.kind == "tails":
        idx = np.arange(hist.centers.size)
        left = [i for i in idx if nonzero[i] and hist.centers[i] < 0]
        right = [i for i in idx[::-1] if nonzero[i] and hist.centers[i] > 0]
        if len(left) < region.n_points or len(right) < region.n_points:
            raise FitError(f"tail fit needs {region.n_points} nonzero bins per side, "
                           f"found {len(left)} left / {len(right)} right")
        return np.sort(np.asarray(left[:region.n_points] + right[:region.n_points]))
    raise InputError(f"unknown fit region {region.kind!r}")


def fit_gaussian(hist: GainsHistogram, region: Region) -> GaussianFit:
    """Least-squares Gaussian on the selected bins, linear in r^2 on log counts.

    log c = log A - r^2 / (2 sigma^2); residuals are weighted by relative
    errors when every selected bin has one, else the fit is unweighted.
    """
    sel = _select_bins(hist, region)
    x = hist.centers[sel] ** 2
    y = np.log(hist.counts[sel])
    err = hist.errors[sel]
    sigma_log = err / hist.counts[sel] if np.all(err > 0) else None
    intercept, slope, chi2 = weighted_line_fit(x, y, sigma_log)
    if slope >= 0:
        raise FitError("selected bins do not decay with |r|; Gaussian fit undefined")
    return GaussianFit(amplitude=float(np.exp(intercept)),
                       sigma=float(np.sqrt(-0.5 / slope)),
                       region=region, chi2=chi2, n_points_used=int(sel.size))


def apply_overlay(hist: GainsHistogram, scaling: OverlayScaling) -> GainsHistogram:
    """Rescale both axes; bin mass picks up the factor x_factor * y_factor."""
    return GainsHistogram(bin_width=hist.bin_width * scaling.x_factor,
                          centers=hist.centers * scaling.x_factor,
                          counts=hist.counts * scaling.y_factor,
                          errors=hist.errors * scaling.y_factor,
                          normalization=hist.normalization * scaling.x_factor * scaling.y_factor,
                          n_samples=hist.n_samples)


def write_gains_csv(hist: GainsHistogram, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("r_center,mean_count,stderr\n")
        for c, n, e in zip(hist.centers, hist.counts, hist.errors):
            fh.write(f"{float(c)!r},{float(n)!r},{float(e)!r}\n")


def write_gaussian_fit_json(fit: GaussianFit, path) -> None:
    import json
    payload = {
        "amplitude": fit.amplitude,
        "sigma": fit.sigma,
        "region": fit.region.kind,
        "n_points": fit.n_points_used,
        "chi2": fit.chi2,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
