"""Returns, prices, and local volatility as interchangeable views.

A critical-state lattice snapshot is read as a returns series over discrete
time j; prices follow from the exponential recursion p_j = p_{j-1} exp(r_j)
and volatility from a centered three-slice variance. Changing the draw
variance w only rescales the field by sqrt(lambda), so a single simulation
at w = 1 covers every scale; `rescale` applies that map explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .errors import ComputationError, InputError


class Boundary(Enum):
    PERIODIC = "periodic"
    OPEN = "open"


@dataclass(frozen=True)
class Simulated:
    seed: int
    steps: int
    variance_w: float


@dataclass(frozen=True)
class Historical:
    source: str
    offset: int


@dataclass(frozen=True)
class Derived:
    origin: str


@dataclass(frozen=True)
class ReturnsSeries:
    """A finite returns vector with provenance and boundary topology.

    Lattice snapshots are periodic (index wraps); ingested or price-derived
    series are open. rescaled_by accumulates the variance ratio lambda
    applied by `rescale`.
    """

    values: np.ndarray
    provenance: Simulated | Historical | Derived
    boundary: Boundary
    rescaled_by: float = 1.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.ndim != 1 or values.size < 2:
            raise InputError(f"returns series needs >= 2 values, got shape {values.shape}")
        if isinstance(self.provenance, Simulated) and self.boundary is not Boundary.PERIODIC:
            raise InputError("simulated series must carry periodic boundary")
        if isinstance(self.provenance, Historical) and self.boundary is not Boundary.OPEN:
            raise InputError("historical series must carry open boundary")

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class PriceSeries:
    """Strictly positive price path; currency_unit is a label only."""

    values: np.ndarray
    p0: float
    currency_unit: str = ""

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "values", values)
        if values.size == 0 or not np.all(values > 0) or not np.all(np.isfinite(values)):
            raise ComputationError("price series must be positive and finite")

    def __len__(self):
        return self.values.size


@dataclass(frozen=True)
class VolatilitySeries:
    """Three-slice local variance; NaN marks open-boundary endpoints."""

    values: np.ndarray
    boundary: Boundary

    def __len__(self):
        return self.values.size


def from_lattice(state, steps: int | None = None) -> ReturnsSeries:
    """Wrap a lattice state's field as a periodic simulated returns series."""
    return ReturnsSeries(values=state.returns.copy(),
                         provenance=Simulated(seed=state.config.seed,
                                              steps=state.step if steps is None else steps,
                                              variance_w=state.config.variance_w),
                         boundary=Boundary.PERIODIC)


def prices(r: ReturnsSeries, p0: float, currency_unit: str = "") -> PriceSeries:
    """Price path from the recursion p_j = p_{j-1} exp(r_j), p_0 = p0.

    For a periodic series the slot-0 return pairs lattice sites n and 0 and
    cannot enter an open price path, so the output has the same length as
    the input and starts at p0. For an open series every return is a step,
    giving len(r) + 1 prices.
    """
    if not (p0 > 0 and np.isfinite(p0)):
        raise InputError(f"p0 must be a positive real, got {p0!r}")
    if r.boundary is Boundary.PERIODIC:
        steps = r.values[1:]
    else:
        steps = r.values
    path = p0 * np.cumprod(np.exp(steps))
    values = np.concatenate(([p0], path))
    if not np.all(np.isfinite(values)) or not np.all(values > 0):
        raise ComputationError("price recursion overflowed (sum of returns too large)")
    return PriceSeries(values=values, p0=float(p0), currency_unit=currency_unit)


def returns_of(p: PriceSeries) -> ReturnsSeries:
    """Log returns r_j = log(p_j / p_{j-1}) of a positive price path."""
    v = p.values
    if v.size < 2:
        raise InputError("need at least two prices to form returns")
    return ReturnsSeries(values=np.log(v[1:] / v[:-1]),
                         provenance=Derived(origin="prices"),
                         boundary=Boundary.OPEN)


def volatility(r: ReturnsSeries) -> VolatilitySeries:
    """Centered three-slice variance v_j = mean((r_{j'} - rbar)^2).

    Periodic series wrap the window; open series leave the two endpoints
    undefined (NaN).
    """
    x = r.values
    if x.size < 3:
        raise InputError(f"volatility needs >= 3 returns, got {x.size}")
    a = np.roll(x, 1)
    c = np.roll(x, -1)
    mean = (a + x + c) / 3.0
    v = ((a - mean) ** 2 + (x - mean) ** 2 + (c - mean) ** 2) / 3.0
    if r.boundary is Boundary.OPEN:
        v[0] = np.nan
        v[-1] = np.nan
    return VolatilitySeries(values=v, boundary=r.boundary)


def rescale(r: ReturnsSeries, lam: float) -> ReturnsSeries:
    """Map the series to draw variance lambda * w: values scale by sqrt(lambda)."""
    if not (lam > 0 and np.isfinite(lam)):
        raise InputError(f"rescale factor must be a positive real, got {lam!r}")
    return replace(r, values=np.sqrt(lam) * r.values, rescaled_by=r.rescaled_by * lam)


def write_series_csv(path, r: ReturnsSeries, p: PriceSeries, v: VolatilitySeries) -> None:
    """Aligned `j,r,p,v` rows; cells are empty where a quantity is undefined.

    Periodic series align index-for-index with prices. Open series shift by
    one: return r_k and volatility v_k sit on row j = k + 1 next to the
    price they produced.
    """
    def cell(val):
        return "" if val is None or (isinstance(val, float) and np.isnan(val)) else repr(val)

    with open(path, "w", encoding="utf-8") as fh:
        fh.write("j,r,p,v\n")
        if r.boundary is Boundary.PERIODIC:
            for j in range(len(p)):
                fh.write(f"{j},{cell(float(r.values[j]))},{float(p.values[j])!r},"
                         f"{cell(float(v.values[j]))}\n")
        else:
            for j in range(len(p)):
                rv = float(r.values[j - 1]) if j >= 1 else None
                vv = float(v.values[j - 1]) if j >= 1 else None
                fh.write(f"{j},{cell(rv)},{float(p.values[j])!r},{cell(vv)}\n")
