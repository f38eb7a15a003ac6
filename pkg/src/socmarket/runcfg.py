"""Run configuration: INI file, CLI overrides, and the config hash.

A run is fully described by a flat sectioned key-value file; every value
can be overridden by a command-line flag. The hash covers the resolved
configuration (file plus overrides), so the manifest pins exactly what ran.
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, replace

from .errors import ConfigurationError
from .lattice import LatticeConfig, TieBreak

_TIE_NAMES = {"lowest": TieBreak.LOWEST_INDEX,
              "random": TieBreak.RANDOM_AMONG_TIES}


@dataclass(frozen=True)
class RunConfig:
    lattice: LatticeConfig = field(default_factory=lambda: LatticeConfig(n_intervals=780))
    equilibration_steps: int = 200_000
    ensemble_runs: int = 200
    jobs: int = 1
    lam: float = 2e-5
    p0: float = 1950.0
    gains_bin_width: float = 0.05
    gains_r_min: float = -5.0
    gains_r_max: float = 5.0
    gains_center_points: int = 7
    gains_tail_points: int = 38
    aval_bin_width: float = 1.0
    aval_n_bins: int = 10_000
    fit_lambda_min: float = 10.0
    fit_lambda_max: float = 100.0
    garch_max_iter: int = 500
    garch_rel_tol: float = 1e-9
    out_dir: str = "out"

    def __post_init__(self):
        if self.equilibration_steps < 0:
            raise ConfigurationError("equilibration_steps must be >= 0")
        if self.ensemble_runs < 1:
            raise ConfigurationError("ensemble_runs must be >= 1")
        if self.jobs < 1:
            raise ConfigurationError("jobs must be >= 1")
        if not self.lam > 0:
            raise ConfigurationError("lambda must be positive")
        if not self.p0 > 0:
            raise ConfigurationError("p0 must be positive")

    def items(self) -> list[tuple[str, str]]:
        """Canonical flat (section.key, value) pairs covering every field."""
        lat = self.lattice
        tie = "lowest" if lat.tie_break is TieBreak.LOWEST_INDEX else "random"
        pairs = [
            ("lattice.n_intervals", str(lat.n_intervals)),
            ("lattice.variance_w", repr(float(lat.variance_w))),
            ("lattice.seed", str(lat.seed)),
            ("lattice.tie_break", tie),
            ("run.equilibration_steps", str(self.equilibration_steps)),
            ("run.ensemble_runs", str(self.ensemble_runs)),
            ("run.jobs", str(self.jobs)),
            ("market.lambda", repr(float(self.lam))),
            ("market.p0", repr(float(self.p0))),
            ("gains.bin_width", repr(float(self.gains_bin_width))),
            ("gains.r_min", repr(float(self.gains_r_min))),
            ("gains.r_max", repr(float(self.gains_r_max))),
            ("gains.center_points", str(self.gains_center_points)),
            ("gains.tail_points", str(self.gains_tail_points)),
            ("avalanche.bin_width", repr(float(self.aval_bin_width))),
            ("avalanche.n_bins", str(self.aval_n_bins)),
            ("avalanche.fit_min", repr(float(self.fit_lambda_min))),
            ("avalanche.fit_max", repr(float(self.fit_lambda_max))),
            ("garch.max_iter", str(self.garch_max_iter)),
            ("garch.rel_tol", repr(float(self.garch_rel_tol))),
            ("output.out_dir", self.out_dir),
        ]
        return pairs

    def config_hash(self) -> str:
        text = "\n".join(f"{k}={v}" for k, v in sorted(self.items()))
        return hashlib.sha256(text.encode("utf-8")).hexdigest()


_SCHEMA = {
    "lattice": {"n_intervals": int, "variance_w": float, "seed": int, "tie_break": str},
    "run": {"equilibration_steps": int, "ensemble_runs": int, "jobs": int},
    "market": {"lambda": float, "p0": float},
    "gains": {"bin_width": float, "r_min": float, "r_max": float,
              "center_points": int, "tail_points": int},
    "avalanche": {"bin_width": float, "n_bins": int, "fit_min": float, "fit_max": float},
    "garch": {"max_iter": int, "rel_tol": float},
    "output": {"out_dir": str},
}


def load_run_config(path=None) -> RunConfig:
    """RunConfig from an INI-style file; missing file sections keep defaults."""
    raw: dict[str, dict[str, str]] = {}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"config file not found: {path}")
        for section in parser.sections():
            if section not in _SCHEMA:
                raise ConfigurationError(f"{path}: unknown config section [{section}]")
            raw[section] = {}
            for key, value in parser.items(section):
                if key not in _SCHEMA[section]:
                    raise ConfigurationError(f"{path}: unknown key {section}.{key}")
                raw[section][key] = value
    return _build(raw, origin=str(path) if path else "<defaults>")


def _get(raw, section, key, default):
    if section in raw and key in raw[section]:
        conv = _SCHEMA[section][key]
        text = raw[section][key]
        try:
            return conv(text)
        except ValueError as exc:
            raise ConfigurationError(f"bad value for {section}.{key}: {text!r}") from exc
    return default


def _build(raw, origin: str) -> RunConfig:
    tie_name = _get(raw, "lattice", "tie_break", "lowest").lower()
    if tie_name not in _TIE_NAMES:
        raise ConfigurationError(
            f"{origin}: tie_break must be one of {sorted(_TIE_NAMES)}, got {tie_name!r}")
    defaults = RunConfig()
    lattice = LatticeConfig(
        n_intervals=_get(raw, "lattice", "n_intervals", defaults.lattice.n_intervals),
        variance_w=_get(raw, "lattice", "variance_w", defaults.lattice.variance_w),
        seed=_get(raw, "lattice", "seed", defaults.lattice.seed),
        tie_break=_TIE_NAMES[tie_name])
    return RunConfig(
        lattice=lattice,
        equilibration_steps=_get(raw, "run", "equilibration_steps", defaults.equilibration_steps),
        ensemble_runs=_get(raw, "run", "ensemble_runs", defaults.ensemble_runs),
        jobs=_get(raw, "run", "jobs", defaults.jobs),
        lam=_get(raw, "market", "lambda", defaults.lam),
        p0=_get(raw, "market", "p0", defaults.p0),
        gains_bin_width=_get(raw, "gains", "bin_width", defaults.gains_bin_width),
        gains_r_min=_get(raw, "gains", "r_min", defaults.gains_r_min),
        gains_r_max=_get(raw, "gains", "r_max", defaults.gains_r_max),
        gains_center_points=_get(raw, "gains", "center_points", defaults.gains_center_points),
        gains_tail_points=_get(raw, "gains", "tail_points", defaults.gains_tail_points),
        aval_bin_width=_get(raw, "avalanche", "bin_width", defaults.aval_bin_width),
        aval_n_bins=_get(raw, "avalanche", "n_bins", defaults.aval_n_bins),
        fit_lambda_min=_get(raw, "avalanche", "fit_min", defaults.fit_lambda_min),
        fit_lambda_max=_get(raw, "avalanche", "fit_max", defaults.fit_lambda_max),
        garch_max_iter=_get(raw, "garch", "max_iter", defaults.garch_max_iter),
        garch_rel_tol=_get(raw, "garch", "rel_tol", defaults.garch_rel_tol),
        out_dir=_get(raw, "output", "out_dir", defaults.out_dir))


def with_overrides(cfg: RunConfig, **kwargs) -> RunConfig:
    """Apply non-None keyword overrides; lattice fields nest transparently."""
    lattice_keys = {"n_intervals", "variance_w", "seed", "tie_break"}
    lat_kw = {k: v for k, v in kwargs.items() if k in lattice_keys and v is not None}
    top_kw = {k: v for k, v in kwargs.items() if k not in lattice_keys and v is not None}
    lattice = replace(cfg.lattice, **lat_kw) if lat_kw else cfg.lattice
    return replace(cfg, lattice=lattice, **top_kw)
