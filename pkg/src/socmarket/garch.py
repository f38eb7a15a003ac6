"""GARCH(1,1) conditional-variance model with a Levenberg-Marquardt fitter.

The conditional variance follows s2_t = alpha0 + alpha1 * eps_{t-1}^2 +
beta1 * s2_{t-1} over shocks eps formed about the sample mean. Estimation
maximizes the Gaussian quasi-log-likelihood. Because the objective is a
plain sum over observations rather than a sum of squares, the optimizer
uses the outer product of per-observation score vectors as its curvature
matrix (the BHHH construction), which gives Levenberg-Marquardt a valid
Gauss-Newton step for a likelihood.

Stationarity is built into the search space: the optimizer works in
unconstrained coordinates theta = (log alpha0, logit persistence, logit
split), so alpha1 >= 0, beta1 >= 0 and alpha1 + beta1 < 1 hold for every
iterate. Standard errors come from the inverse BHHH matrix at the optimum,
mapped to natural parameters by the delta method.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter
from scipy.special import expit, logit

from .errors import ComputationError, InputError

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class GarchParams:
    alpha0: float
    alpha1: float
    beta1: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha0) and self.alpha0 > 0):
            raise InputError(f"alpha0 must be positive, got {self.alpha0!r}")
        if not (np.isfinite(self.alpha1) and self.alpha1 >= 0):
            raise InputError(f"alpha1 must be nonnegative, got {self.alpha1!r}")
        if not (np.isfinite(self.beta1) and self.beta1 >= 0):
            raise InputError(f"beta1 must be nonnegative, got {self.beta1!r}")
        if self.alpha1 + self.beta1 >= 1.0:
            raise InputError(
                f"alpha1 + beta1 = {self.alpha1 + self.beta1} violates stationarity")

    @property
    def persistence(self) -> float:
        return self.alpha1 + self.beta1

    def as_array(self) -> np.ndarray:
        return np.array([self.alpha0, self.alpha1, self.beta1])


@dataclass(frozen=True)
class ShockSeries:
    """Returns centered about their sample mean."""

    eps: np.ndarray
    mean: float

    @classmethod
    def from_returns(cls, values) -> "ShockSeries":
        v = np.asarray(getattr(values, "values", values), dtype=np.float64)
        if v.ndim != 1 or v.size < 2:
            raise InputError("shock series needs a one-dimensional returns vector")
        mean = float(v.mean())
        return cls(eps=v - mean, mean=mean)

    def __len__(self):
        return self.eps.size


@dataclass(frozen=True)
class GarchFit:
    params: GarchParams
    stderr: tuple[float, float, float]
    t_stats: tuple[float, float, float]
    loglik: float
    iterations: int
    converged: bool


def variance_recursion(params: GarchParams, shocks: ShockSeries,
                       sigma0_sq: float) -> np.ndarray:
    """Conditional variance path s2_t for t = 0..T-1 with s2_0 = sigma0_sq."""
    if not (sigma0_sq > 0 and np.isfinite(sigma0_sq)):
        raise InputError(f"sigma0_sq must be positive, got {sigma0_sq!r}")
    eps = shocks.eps
    sig2 = np.empty(eps.size)
    sig2[0] = sigma0_sq
    if eps.size > 1:
        drive = params.alpha0 + params.alpha1 * eps[:-1] ** 2
        out, _ = lfilter([1.0], [1.0, -params.beta1], drive,
                         zi=np.array([params.beta1 * sigma0_sq]))
        sig2[1:] = out
    return sig2


def _default_sigma0(shocks: ShockSeries) -> float:
    s0 = float(np.mean(shocks.eps ** 2))
    if s0 <= 0:
        raise InputError("shock series has zero variance")
    return s0


def neg_log_likelihood(params: GarchParams, shocks: ShockSeries,
                       sigma0_sq: float | None = None) -> float:
    """Gaussian quasi negative log-likelihood 0.5 * sum(log(2 pi s2) + eps^2/s2).

    sigma0_sq defaults to the sample variance of the shocks; the t = 0 term
    is included but is constant in the parameters.
    """
    s0 = _default_sigma0(shocks) if sigma0_sq is None else sigma0_sq
    sig2 = variance_recursion(params, shocks, s0)
    if not np.all(sig2 > 0) or not np.all(np.isfinite(sig2)):
        raise ComputationError("conditional variance left the positive domain")
    return float(0.5 * np.sum(_LOG_2PI + np.log(sig2) + shocks.eps ** 2 / sig2))


def _nll_and_scores(params: GarchParams, shocks: ShockSeries,
                    sigma0_sq: float) -> tuple[float, np.ndarray]:
    """Objective plus per-observation scores wrt (alpha0, alpha1, beta1).

    The variance sensitivities satisfy the same linear recursion as the
    variance itself (pole beta1) with zero initial conditions, so each is a
    single IIR filter pass.
    """
    eps = shocks.eps
    t_len = eps.size
    sig2 = variance_recursion(params, shocks, sigma0_sq)
    if not np.all(sig2 > 0) or not np.all(np.isfinite(sig2)):
        raise ComputationError("conditional variance left the positive domain")
    dldv = 0.5 * (sig2 - eps ** 2) / sig2 ** 2
    sens = np.zeros((t_len, 3))
    if t_len > 1:
        zi = np.zeros(1)
        b, a = [1.0], [1.0, -params.beta1]
        sens[1:, 0] = lfilter(b, a, np.ones(t_len - 1), zi=zi)[0]
        sens[1:, 1] = lfilter(b, a, eps[:-1] ** 2, zi=zi)[0]
        sens[1:, 2] = lfilter(b, a, sig2[:-1], zi=zi)[0]
    scores = dldv[:, None] * sens
    nll = float(0.5 * np.sum(_LOG_2PI + np.log(sig2) + eps ** 2 / sig2))
    return nll, scores


def score(params: GarchParams, shocks: ShockSeries,
          sigma0_sq: float | None = None) -> np.ndarray:
    """Gradient of the negative log-likelihood wrt (alpha0, alpha1, beta1)."""
    s0 = _default_sigma0(shocks) if sigma0_sq is None else sigma0_sq
    _, per_obs = _nll_and_scores(params, shocks, s0)
    return per_obs.sum(axis=0)


def to_unconstrained(params: GarchParams) -> np.ndarray:
    """(log alpha0, logit(alpha1+beta1), logit(alpha1/(alpha1+beta1)))."""
    p = params.alpha1 + params.beta1
    if not 0 < p < 1:
        raise InputError("reparameterization needs 0 < alpha1 + beta1 < 1")
    q = params.alpha1 / p
    if not 0 < q < 1:
        raise InputError("reparameterization needs 0 < alpha1 and 0 < beta1")
    return np.array([math.log(params.alpha0), logit(p), logit(q)])


def from_unconstrained(theta) -> GarchParams:
    t0, tp, tr = theta
    p = float(expit(tp))
    q = float(expit(tr))
    return GarchParams(alpha0=math.exp(t0), alpha1=p * q, beta1=p * (1.0 - q))


def _nat_jacobian(theta) -> np.ndarray:
    """d(alpha0, alpha1, beta1) / d(theta) at theta."""
    t0, tp, tr = theta
    p = float(expit(tp))
    q = float(expit(tr))
    dp = p * (1.0 - p)
    dq = q * (1.0 - q)
    return np.array([
        [math.exp(t0), 0.0, 0.0],
        [0.0, q * dp, p * dq],
        [0.0, (1.0 - q) * dp, -p * dq],
    ])


_START = GarchParams(alpha0=1.0, alpha1=0.09, beta1=0.81)  # alpha0 rescaled per series


def fit(returns, *, max_iter: int = 500, rel_tol: float = 1e-9) -> GarchFit:
    """Quasi-maximum-likelihood GARCH(1,1) fit of a returns series.

    Accepts a ReturnsSeries or a plain vector of at least 50 returns.
    Levenberg-Marquardt damping starts at 1e-3, divides by 10 on an
    accepted step and multiplies by 10 on a rejected one; iteration stops
    when the relative objective decrease falls below rel_tol or after
    max_iter steps (converged=False in that case).
    """
    values = np.asarray(getattr(returns, "values", returns), dtype=np.float64)
    if values.ndim != 1 or values.size < 50:
        raise InputError(f"fit needs >= 50 returns, got {values.size}")
    shocks = ShockSeries.from_returns(values)
    s0 = _default_sigma0(shocks)

    theta = to_unconstrained(GarchParams(alpha0=0.1 * s0, alpha1=_START.alpha1,
                                         beta1=_START.beta1))
    nll, per_obs = _nll_and_scores(from_unconstrained(theta), shocks, s0)
    damping = 1e-3
    iterations = 0
    converged = False
    while iterations < max_iter:
        iterations += 1
        jac = _nat_jacobian(theta)
        scores_u = per_obs @ jac
        grad = scores_u.sum(axis=0)
        curv = scores_u.T @ scores_u
        diag = np.diag(curv).copy()
        diag[diag <= 0] = max(diag.max(), 1e-300)
        try:
            delta = np.linalg.solve(curv + damping * np.diag(diag), -grad)
        except np.linalg.LinAlgError:
            damping *= 10.0
            continue
        trial = theta + delta
        try:
            trial_nll = neg_log_likelihood(from_unconstrained(trial), shocks, s0)
        except (InputError, ComputationError, OverflowError):
            trial_nll = np.inf
        if trial_nll < nll:
            decrease = nll - trial_nll
            theta = trial
            nll, per_obs = _nll_and_scores(from_unconstrained(theta), shocks, s0)
            damping = max(damping / 10.0, 1e-12)
            if decrease < rel_tol * max(abs(nll), 1e-8):
                converged = True
                break
        else:
            damping *= 10.0
            if damping > 1e14:
                break

    params = from_unconstrained(theta)
    jac = _nat_jacobian(theta)
    scores_u = per_obs @ jac
    curv = scores_u.T @ scores_u
    try:
        cov_u = np.linalg.inv(curv)
    except np.linalg.LinAlgError:
        cov_u = np.linalg.pinv(curv)
    cov_nat = jac @ cov_u @ jac.T
    se = np.sqrt(np.clip(np.diag(cov_nat), 0.0, None))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_stats = params.as_array() / se
    return GarchFit(params=params,
                    stderr=(float(se[0]), float(se[1]), float(se[2])),
                    t_stats=(float(t_stats[0]), float(t_stats[1]), float(t_stats[2])),
                    loglik=-nll, iterations=iterations, converged=converged)


def simulate(params: GarchParams, n: int, rng: np.random.Generator,
             burn: int = 500, mean: float = 0.0) -> np.ndarray:
    """Synthetic GARCH(1,1) path of length n with Gaussian innovations.

    Starts from the stationary variance and discards `burn` warm-up draws.
    """
    if n < 1:
        raise InputError(f"path length must be >= 1, got {n}")
    z = rng.standard_normal(n + burn)
    a0, a1, b1 = params.alpha0, params.alpha1, params.beta1
    sig2 = a0 / (1.0 - a1 - b1)
    out = np.empty(n)
    for t in range(n + burn):
        e = math.sqrt(sig2) * z[t]
        if t >= burn:
            out[t - burn] = mean + e
        sig2 = a0 + a1 * e * e + b1 * sig2
    return out


def _fmt_cell(est: float, se: float, t: float) -> str:
    if abs(est) < 1e-3:
        body = f"{est:.2E}({se:.2E})"
    else:
        body = f"{est:.6f}({se:.6f})"
    return f"{body}[{t:.7g}]"


def _sig_mark(t: float) -> str:
    if abs(t) > 2.576:
        return "**"
    if abs(t) > 1.96:
        return "*"
    return ""


def fit_report(lattice_fit: GarchFit, historical_fit: GarchFit,
               labels: tuple[str, str] = ("L", "N")) -> str:
    """Side-by-side parameter table: estimate(stderr)[t] with significance
    marks (* at 5%, ** at 1%) for the lattice and historical columns."""
    rows = []
    names = ("alpha_0", "alpha_1", "beta_1")
    for i, name in enumerate(names):
        cells = []
        for f in (lattice_fit, historical_fit):
            est = f.params.as_array()[i]
            cells.append(_fmt_cell(est, f.stderr[i], f.t_stats[i]) + _sig_mark(f.t_stats[i]))
        rows.append((name, cells))
    width = max(len(c) for _, cells in rows for c in cells)
    width = max(width, *(len(x) for x in labels))
    lines = [f"{'':10s} {labels[0]:<{width}s} {labels[1]:<{width}s}"]
    for name, cells in rows:
        lines.append(f"{name:10s} {cells[0]:<{width}s} {cells[1]:<{width}s}")
    lines.append("significance: * |t| > 1.96 (5%), ** |t| > 2.576 (1%)")
    return "\n".join(lines)


def write_garch_fit_json(fit_result: GarchFit, series_id: str, path) -> None:
    payload = {
        "series_id": series_id,
        "alpha0": fit_result.params.alpha0,
        "alpha1": fit_result.params.alpha1,
        "beta1": fit_result.params.beta1,
        "stderr": list(fit_result.stderr),
        "t": list(fit_result.t_stats),
        "loglik": fit_result.loglik,
        "iterations": fit_result.iterations,
        "converged": fit_result.converged,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
