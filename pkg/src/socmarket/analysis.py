"""Criticality diagnostics over simulation traces.

Everything here is a pure function of immutable inputs: the lower envelope
(gap function) of a signal trace, its plateau decomposition into avalanches,
ensemble-averaged avalanche size histograms with a least-chi2 power-law fit,
site activity profiles, hit-record windows, and the entropy monitor of the
exponentiated field.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ComputationError, FitError, InputError

_EXP_GUARD = 700.0


@dataclass(frozen=True)
class SignalTrace:
    """Global signal V(s) for s = start_step .. start_step + len - 1."""

    values: np.ndarray
    config: object | None = None
    start_step: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1:
            raise InputError("signal trace must be one-dimensional")
        if values.size and values.min() < 0:
            raise InputError("signal trace values must be nonnegative")

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class GapFunction:
    """Breakpoints of the running minimum of a trace: G drops strictly at
    each x_k and is constant in between; x[0] = 0 carries the start value."""

    x: np.ndarray
    level: np.ndarray

    @property
    def breakpoints(self) -> list[tuple[int, float]]:
        return [(int(a), float(b)) for a, b in zip(self.x, self.level)]

    def value_at(self, s: int) -> float:
        """G(s): level of the last breakpoint at or before s."""
        i = int(np.searchsorted(self.x, s, side="right")) - 1
        if i < 0:
            raise InputError(f"gap function undefined before x=0, got {s}")
        return float(self.level[i])


@dataclass(frozen=True)
class AvalancheRecord:
    """Completed plateaus of a gap function: lengths and starting levels."""

    lengths: np.ndarray
    start_levels: np.ndarray

    def __len__(self):
        return self.lengths.size


@dataclass(frozen=True)
class SizeHistogram:
    """Ensemble-mean avalanche size frequencies dN/dL per bin.

    Bin k covers [1 + k*bin_width, 1 + (k+1)*bin_width); centers are the
    midpoints. errors hold the standard error of the mean across runs and
    are identically zero for a single run.
    """

    bin_width: float
    centers: np.ndarray
    counts: np.ndarray
    errors: np.ndarray
    n_runs: int


@dataclass(frozen=True)
class PowerLawFit:
    """amplitude * L**exponent fitted over fit_range in log-log space."""

    amplitude: float
    exponent: float
    fit_range: tuple[float, float]
    chi2: float
    dof: int

    @property
    def n_bins_used(self) -> int:
        return self.dof + 2


def gap_function(trace) -> GapFunction:
    """Lower envelope of a signal trace as its breakpoint sequence.

    A breakpoint is recorded only for a strict decrease of the running
    minimum; exact repeats of the current minimum extend the plateau.
    """
    values = trace.values if isinstance(trace, SignalTrace) else np.asarray(trace, dtype=np.float64)
    if values.size == 0:
        raise InputError("cannot build a gap function from an empty trace")
    running = np.minimum.accumulate(values)
    drops = np.flatnonzero(np.diff(running) < 0) + 1
    x = np.concatenate(([0], drops)).astype(np.int64)
    return GapFunction(x=x, level=running[x])


def avalanches(gap: GapFunction, trace_len: int) -> AvalancheRecord:
    """Plateau lengths L_k = x_k - x_{k-1} between consecutive breakpoints.

    The trailing plateau from the last breakpoint to the end of the trace
    is censored (its endpoint was never observed) and is not counted.
    """
    if trace_len <= int(gap.x[-1]):
        raise InputError(
            f"trace length {trace_len} inconsistent with last breakpoint {int(gap.x[-1])}")
    lengths = np.diff(gap.x).astype(np.int64)
    return AvalancheRecord(lengths=lengths, start_levels=gap.level[:-1].copy())


def size_histogram(records, bin_width: float = 1.0, n_bins: int = 10000) -> SizeHistogram:
    """Ensemble mean and standard error of dN/dL over avalanche records.

    Lengths at or beyond the top edge 1 + n_bins*bin_width fall outside the
    tabulated range and are not counted.
    """
    if bin_width <= 0:
        raise InputError(f"bin_width must be positive, got {bin_width}")
    if n_bins < 1:
        raise InputError(f"n_bins must be >= 1, got {n_bins}")
    records = list(records)
    if not records:
        raise InputError("size_histogram needs at least one avalanche record")
    edges = 1.0 + bin_width * np.arange(n_bins + 1)
    per_run = np.empty((len(records), n_bins))
    for i, rec in enumerate(records):
        counts, _ = np.histogram(rec.lengths, bins=edges)
        per_run[i] = counts / bin_width
    mean = per_run.mean(axis=0)
    if len(records) > 1:
        errors = per_run.std(axis=0, ddof=1) / np.sqrt(len(records))
    else:
        errors = np.zeros(n_bins)
    centers = edges[:-1] + 0.5 * bin_width
    return SizeHistogram(bin_width=float(bin_width), centers=centers,
                         counts=mean, errors=errors, n_runs=len(records))


def weighted_line_fit(x, y, sigma=None) -> tuple[float, float, float]:
    """Least-squares line y = a + b x; returns (a, b, chi2).

    With sigma given, residuals are scaled by 1/sigma (least-chi2);
    otherwise ordinary least squares with unit weights.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.ones_like(x) if sigma is None else 1.0 / np.asarray(sigma, dtype=np.float64)
    a_mat = np.column_stack((w, w * x))
    coef, *_ = np.linalg.lstsq(a_mat, w * y, rcond=None)
    resid = w * (y - coef[0] - coef[1] * x)
    return float(coef[0]), float(coef[1]), float(resid @ resid)


def fit_power_law(hist: SizeHistogram, fit_range: tuple[float, float]) -> PowerLawFit:
    """Weighted line fit of log(count) on log(L) over in-range nonzero bins.

    Relative errors propagate to the log scale as sigma_log = error/count;
    if any usable bin lacks a positive error (single-run data) the fit
    falls back to unit weights.
    """
    lo, hi = fit_range
    mask = (hist.centers >= lo) & (hist.centers <= hi) & (hist.counts > 0)
    n_used = int(mask.sum())
    if n_used < 3:
        raise FitError(
            f"power-law fit needs >= 3 nonzero bins in [{lo}, {hi}], found {n_used}")
    x = np.log(hist.centers[mask])
    y = np.log(hist.counts[mask])
    err = hist.errors[mask]
    sigma = err / hist.counts[mask] if np.all(err > 0) else None
    intercept, slope, chi2 = weighted_line_fit(x, y, sigma)
    return PowerLawFit(amplitude=float(np.exp(intercept)), exponent=slope,
                       fit_range=(float(lo), float(hi)), chi2=chi2, dof=n_used - 2)


def integrate_count(fit: PowerLawFit, bounds: tuple[float, float]) -> float:
    """Closed-form integral of amplitude * L**exponent over [a, b]."""
    a, b = bounds
    g = fit.exponent
    if g == -1.0:
        return fit.amplitude * float(np.log(b / a))
    return fit.amplitude * (b ** (g + 1.0) - a ** (g + 1.0)) / (g + 1.0)


def activity_histogram(state) -> np.ndarray:
    """Per-site update-visit counts H accumulated since the start."""
    return np.array(state.hits, dtype=np.uint64, copy=True)


def entropy(field) -> float:
    """Mean of r_j * exp(r_j) over sites j = 1..n (site 0 excluded).

    Equals the average of R log R for the exponentiated field R = exp(r).
    Magnitudes beyond the exp overflow guard indicate a runaway field and
    raise, never occurring in the critical state.
    """
    r = np.asarray(getattr(field, "returns", field), dtype=np.float64)
    if r.ndim != 1 or r.size < 2:
        raise InputError("entropy needs a field with at least two sites")
    body = r[1:]
    if np.max(np.abs(body)) > _EXP_GUARD:
        raise ComputationError("field magnitude exceeds exp overflow guard (|r| > 700)")
    return float(np.sum(body * np.exp(body)) / body.size)


def write_trace_csv(trace: SignalTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("s,V\n")
        for i, v in enumerate(trace.values):
            fh.write(f"{trace.start_step + i},{float(v)!r}\n")


def write_gap_csv(gap: GapFunction, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x_k,level\n")
        for x, level in zip(gap.x, gap.level):
            fh.write(f"{x},{float(level)!r}\n")


def write_avalanches_csv(record: AvalancheRecord, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("k,length,start_level\n")
        for k, (length, level) in enumerate(zip(record.lengths, record.start_levels), start=1):
            fh.write(f"{k},{length},{float(level)!r}\n")


def write_size_histogram_csv(hist: SizeHistogram, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("lambda_bin_center,mean_count,stderr\n")
        for c, n, e in zip(hist.centers, hist.counts, hist.errors):
            fh.write(f"{float(c)!r},{float(n)!r},{float(e)!r}\n")


def write_hit_log_csv(s, j, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("s,j\n")
        for a, b in zip(s, j):
            fh.write(f"{a},{b}\n")


def write_entropy_csv(s, values, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("s,S\n")
        for a, v in zip(s, values):
            fh.write(f"{a},{float(v)!r}\n")


def write_power_law_json(fit: PowerLawFit, path) -> None:
    payload = {
        "amplitude": fit.amplitude,
        "exponent": fit.exponent,
        "lambda_min": fit.fit_range[0],
        "lambda_max": fit.fit_range[1],
        "chi2": fit.chi2,
        "dof": fit.dof,
        "n_bins_used": fit.n_bins_used,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
