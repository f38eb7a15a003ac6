"""Periodic returns lattice and its extremal-update dynamics.

A real field r_j lives on a ring of n+1 sites. Every site carries a signal
V_j = |r_j (r_{j+1} - r_{j-1})|; one update finds the site with the largest
signal, replaces the field there and at its two neighbours with a zero-sum
Gaussian triple, and refreshes the five signals that depend on the changed
values. Iterating the rule drives the field into a self-organized critical
state whose snapshots read as market return series.

Two engines share one draw protocol (3 standard normals per step, scaled by
sqrt(w), projected to zero sum by subtracting their mean):

  * incremental: jitted loop with an O(log n) max tournament (default),
  * rescan: per-step full signal recomputation with np.argmax, kept as a
    slow oracle.

Fed the same seed they produce bitwise-identical trajectories.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path

import numpy as np

from . import _kernel
from .analysis import entropy
from .errors import ComputationError, ConfigurationError, InputError, ParseError
from .seeds import splitmix64

_CHUNK_STEPS = 1 << 19


class TieBreak(IntEnum):
    LOWEST_INDEX = 0
    RANDOM_AMONG_TIES = 1


@dataclass(frozen=True)
class LatticeConfig:
    """Static simulation parameters: ring size n+1, draw variance w, seed."""

    n_intervals: int
    variance_w: float = 1.0
    seed: int = 0
    tie_break: TieBreak = TieBreak.LOWEST_INDEX

    def __post_init__(self):
        if not isinstance(self.n_intervals, (int, np.integer)) or self.n_intervals < 4:
            raise ConfigurationError(
                f"n_intervals must be an integer >= 4, got {self.n_intervals!r}")
        if not (isinstance(self.variance_w, (int, float)) and math.isfinite(self.variance_w)
                and self.variance_w > 0):
            raise ConfigurationError(
                f"variance_w must be a positive finite real, got {self.variance_w!r}")
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if not isinstance(self.tie_break, TieBreak):
            raise ConfigurationError(f"tie_break must be a TieBreak, got {self.tie_break!r}")

    @property
    def n_sites(self) -> int:
        return self.n_intervals + 1


@dataclass(frozen=True)
class UpdateEvent:
    """One replacement event: the step it produced, the chosen site, the
    triggering global signal, and the projected zero-sum triple that went
    onto sites (site-1, site, site+1)."""

    step: int
    site: int
    old_signal: float
    drawn: tuple[float, float, float]


def compute_signal(returns, j: int) -> float:
    """Signal of site j: |r_j (r_{j+1} - r_{j-1})| with periodic indexing."""
    r = np.asarray(returns)
    m = r.shape[0]
    return float(abs(r[j] * (r[(j + 1) % m] - r[(j - 1) % m])))


def compute_signals(returns) -> np.ndarray:
    """All site signals of a field, vectorized."""
    r = np.asarray(returns, dtype=np.float64)
    return np.abs(r * (np.roll(r, -1) - np.roll(r, 1)))


def max_signal(returns) -> tuple[float, int]:
    """Global signal and its lowest argmax site, by brute-force scan."""
    sig = compute_signals(returns)
    j = int(np.argmax(sig))
    return float(sig[j]), j


class LatticeState:
    """Mutable simulation state: field, cached signals, hit counts, clock.

    The signal cache is valid at every externally observable point; the
    incremental engine additionally keeps a max tournament over it. The
    state owns its draw stream (a PCG64 generator seeded from the config),
    so (config, seed) fully determines the trajectory.
    """

    def __init__(self, config: LatticeConfig, returns, *, step: int = 0,
                 hits=None, rng: np.random.Generator | None = None,
                 incremental: bool = True):
        returns = np.ascontiguousarray(returns, dtype=np.float64)
        if returns.shape != (config.n_sites,):
            raise ConfigurationError(
                f"returns must have shape ({config.n_sites},), got {returns.shape}")
        self.config = config
        self.returns = returns
        self.signals = compute_signals(returns)
        self.step = int(step)
        if hits is None:
            self.hits = np.zeros(config.n_sites, dtype=np.uint64)
        else:
            self.hits = np.ascontiguousarray(hits, dtype=np.uint64)
        self.rng = rng if rng is not None else np.random.default_rng(config.seed)
        self.incremental = bool(incremental)
        self._sqrt_w = math.sqrt(config.variance_w)
        self._tie_salt = splitmix64(splitmix64(config.seed))
        if incremental:
            m2 = 1 << (config.n_sites - 1).bit_length()
            self._m2 = m2
            self._tree = np.empty(2 * m2, dtype=np.float64)
            _kernel.tree_build(self.signals, self._tree, m2)
        else:
            self._m2 = 0
            self._tree = None

    @property
    def n_sites(self) -> int:
        return self.config.n_sites


def init_random(config: LatticeConfig, *, incremental: bool = True) -> LatticeState:
    """Fresh state at step 0: field iid Normal(0, w), zero hit counts."""
    rng = np.random.default_rng(config.seed)
    z = rng.standard_normal(config.n_sites)
    returns = math.sqrt(config.variance_w) * z
    return LatticeState(config, returns, rng=rng, incremental=incremental)


def global_signal(state: LatticeState) -> tuple[float, int]:
    """Current max signal V and the update site chosen by the tie policy."""
    sig = state.signals
    if state.config.tie_break is TieBreak.LOWEST_INDEX:
        j = int(np.argmax(sig))
        return float(sig[j]), j
    v = float(sig.max())
    ties = np.flatnonzero(sig == v)
    if ties.size == 1:
        return v, int(ties[0])
    pick = splitmix64(state._tie_salt ^ (state.step + 1)) % ties.size
    return v, int(ties[pick])


def _py_tree_update(tree, m2, j, val):
    i = m2 + j
    tree[i] = val
    i >>= 1
    while i >= 1:
        v = max(tree[2 * i], tree[2 * i + 1])
        if tree[i] == v:
            break
        tree[i] = v
        i >>= 1


def update_step(state: LatticeState, rng: np.random.Generator | None = None) -> UpdateEvent:
    """Apply one replacement step and return the event that occurred.

    Consumes exactly three standard normals from the draw stream. The
    triple is scaled by sqrt(w) then projected onto the zero-sum plane by
    subtracting its mean, preserving exchangeability of the three sites.
    """
    rng = state.rng if rng is None else rng
    v, js = global_signal(state)
    z = rng.standard_normal(3)
    sw = state._sqrt_w
    xm = sw * z[0]
    x0 = sw * z[1]
    xp = sw * z[2]
    mean = (xm + x0 + xp) / 3.0
    xm -= mean
    x0 -= mean
    xp -= mean

    m = state.n_sites
    jm = (js - 1) % m
    jp = (js + 1) % m
    state.returns[jm] = xm
    state.returns[js] = x0
    state.returns[jp] = xp
    state.hits[jm] += 1
    state.hits[js] += 1
    state.hits[jp] += 1
    state.step += 1
    if state.incremental:
        for jj in ((jm - 1) % m, jm, js, jp, (jp + 1) % m):
            val = compute_signal(state.returns, jj)
            state.signals[jj] = val
            _py_tree_update(state._tree, state._m2, jj, val)
    else:
        state.signals = compute_signals(state.returns)
    return UpdateEvent(step=state.step, site=js, old_signal=v,
                       drawn=(float(xm), float(x0), float(xp)))


class SignalTraceRecorder:
    """Collects the global signal V(s) at every step of a run, including
    the value at the step the recorder was first attached."""

    def __init__(self):
        self._parts = []
        self.start_step = None

    def on_run_start(self, state):
        if self.start_step is None:
            self.start_step = state.step
            self._parts.append(float(global_signal(state)[0]))

    def on_step(self, state, event):
        self._parts.append(float(state.signals.max()))

    def extend(self, values):
        self._parts.append(np.asarray(values, dtype=np.float64))

    @property
    def values(self) -> np.ndarray:
        return _stitch(self._parts, np.float64)


class HitLogRecorder:
    """Logs every site replacement as an (s, j) pair, three per step.

    record_range optionally bounds the recorded step window to keep long
    runs in memory; export-side filtering stays available either way.
    """

    def __init__(self, record_range: tuple[int, int] | None = None):
        if record_range is not None and record_range[0] > record_range[1]:
            raise InputError(f"empty hit record range {record_range}")
        self.record_range = record_range
        self._s_parts = []
        self._j_parts = []

    def on_run_start(self, state):
        pass

    def on_step(self, state, event):
        s = event.step
        lo, hi = self.record_range if self.record_range else (0, np.inf)
        if lo <= s <= hi:
            m = state.n_sites
            for j in ((event.site - 1) % m, event.site, (event.site + 1) % m):
                self._s_parts.append(s)
                self._j_parts.append(j)

    def extend(self, s_vals, j_vals):
        self._s_parts.append(np.asarray(s_vals, dtype=np.int64))
        self._j_parts.append(np.asarray(j_vals, dtype=np.int64))

    @property
    def entries(self) -> tuple[np.ndarray, np.ndarray]:
        return _stitch(self._s_parts, np.int64), _stitch(self._j_parts, np.int64)

    def window(self, s_range=None, j_range=None) -> tuple[np.ndarray, np.ndarray]:
        """Order-preserving (s, j) subset with both coordinates in range."""
        s, j = self.entries
        keep = np.ones(s.shape, dtype=bool)
        if s_range is not None:
            keep &= (s >= s_range[0]) & (s <= s_range[1])
        if j_range is not None:
            keep &= (j >= j_range[0]) & (j <= j_range[1])
        return s[keep], j[keep]


class EntropyRecorder:
    """Samples the field entropy every `every` steps during a run."""

    def __init__(self, every: int = 100):
        if every < 1:
            raise InputError(f"entropy cadence must be >= 1, got {every}")
        self.every = int(every)
        self._s_parts = []
        self._v_parts = []

    def on_run_start(self, state):
        if not self._s_parts and state.step % self.every == 0:
            self._s_parts.append(state.step)
            self._v_parts.append(entropy(state.returns))

    def on_step(self, state, event):
        if event.step % self.every == 0:
            self._s_parts.append(event.step)
            self._v_parts.append(entropy(state.returns))

    def extend(self, s_vals, values):
        self._s_parts.append(np.asarray(s_vals, dtype=np.int64))
        self._v_parts.append(np.asarray(values, dtype=np.float64))

    @property
    def samples(self) -> tuple[np.ndarray, np.ndarray]:
        return _stitch(self._s_parts, np.int64), _stitch(self._v_parts, np.float64)


def _stitch(parts, dtype):
    arrays = [np.atleast_1d(np.asarray(p, dtype=dtype)) for p in parts]
    if not arrays:
        return np.empty(0, dtype=dtype)
    return np.concatenate(arrays)


def run(state: LatticeState, steps: int, recorders=()) -> LatticeState:
    """Advance the state by `steps` updates, notifying attached recorders.

    Dispatches to the jitted incremental engine or the per-step rescan
    loop according to state.incremental; both consume the identical draw
    stream. Returns the same (mutated) state.
    """
    if steps < 0:
        raise InputError(f"steps must be >= 0, got {steps}")
    for rec in recorders:
        rec.on_run_start(state)
    if steps == 0:
        return state

    if not state.incremental:
        for _ in range(steps):
            event = update_step(state)
            for rec in recorders:
                rec.on_step(state, event)
        return state

    trace_recs = [r for r in recorders if isinstance(r, SignalTraceRecorder)]
    ent_recs = [r for r in recorders if isinstance(r, EntropyRecorder)]
    hit_recs = [r for r in recorders if isinstance(r, HitLogRecorder)]
    known = len(trace_recs) + len(ent_recs) + len(hit_recs)
    if known != len(list(recorders)):
        raise InputError("incremental runs support only the built-in recorder types")
    if len(ent_recs) > 1:
        raise InputError("at most one entropy recorder per incremental run")
    ent = ent_recs[0] if ent_recs else None

    if hit_recs:
        hit_lo = min(r.record_range[0] if r.record_range else 0 for r in hit_recs)
        hit_hi = max(r.record_range[1] if r.record_range else 2**62 for r in hit_recs)
    else:
        hit_lo, hit_hi = 1, 0

    empty_f = np.empty(0, dtype=np.float64)
    empty_i = np.empty(0, dtype=np.int64)
    done = 0
    while done < steps:
        k = min(_CHUNK_STEPS, steps - done)
        z = state.rng.standard_normal(3 * k)
        trace_buf = np.empty(k, dtype=np.float64) if trace_recs else empty_f
        if ent is not None:
            cap = k // ent.every + 2
            ent_s, ent_v = np.empty(cap, dtype=np.int64), np.empty(cap, dtype=np.float64)
        else:
            ent_s, ent_v = empty_i, empty_f
        if hit_recs:
            ov = min(hit_hi, state.step + k) - max(hit_lo, state.step + 1) + 1
            cap = 3 * max(0, ov)
        else:
            cap = 0
        hit_s = np.empty(cap, dtype=np.int64) if cap else empty_i
        hit_j = np.empty(cap, dtype=np.int64) if cap else empty_i

        en, hn, err = _kernel.run_chunk(
            state.returns, state.signals, state._tree, state._m2, state.hits,
            state._sqrt_w, z, k, state.step,
            int(state.config.tie_break), np.uint64(state._tie_salt),
            trace_buf,
            ent.every if ent is not None else 0, ent_s, ent_v, 0,
            hit_lo, hit_hi, hit_s, hit_j, 0)
        state.step += k
        done += k

        for rec in trace_recs:
            rec.extend(trace_buf)
        if ent is not None and en:
            ent.extend(ent_s[:en], ent_v[:en])
        if hn:
            for rec in hit_recs:
                if rec.record_range:
                    lo, hi = rec.record_range
                    keep = (hit_s[:hn] >= lo) & (hit_s[:hn] <= hi)
                    rec.extend(hit_s[:hn][keep], hit_j[:hn][keep])
                else:
                    rec.extend(hit_s[:hn], hit_j[:hn])
        if err:
            raise ComputationError(
                "field magnitude exceeded the exp overflow guard (|r| > 700) "
                "during entropy sampling")
    return state


_FRAME_HEADER = struct.Struct("<4sHIdQQ")
_FRAME_MAGIC = b"SOCL"
_FRAME_VERSION = 1


def write_snapshot_csv(state: LatticeState, path) -> None:
    """Field snapshot as `j,r_j` rows."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("j,r_j\n")
        for j, r in enumerate(state.returns):
            fh.write(f"{j},{float(r)!r}\n")


def write_snapshot_frame(state: LatticeState, path) -> None:
    """Compact binary snapshot: SOCL magic, version, n, w, seed, step, field."""
    header = _FRAME_HEADER.pack(_FRAME_MAGIC, _FRAME_VERSION,
                                state.config.n_intervals, state.config.variance_w,
                                state.config.seed, state.step)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(state.returns.astype("<f8").tobytes())


def read_snapshot_frame(path, *, incremental: bool = True) -> LatticeState:
    """Load a binary snapshot back into a state.

    The returned state is suitable for analysis and for fresh runs; the
    original generator position is not stored, so continuing a run from a
    snapshot does not replay the original stream.
    """
    raw = Path(path).read_bytes()
    if len(raw) < _FRAME_HEADER.size:
        raise ParseError(f"{path}: truncated snapshot frame")
    magic, version, n, w, seed, step = _FRAME_HEADER.unpack_from(raw)
    if magic != _FRAME_MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if version != _FRAME_VERSION:
        raise ParseError(f"{path}: unsupported frame version {version}")
    body = raw[_FRAME_HEADER.size:]
    if len(body) != 8 * (n + 1):
        raise ParseError(f"{path}: expected {n + 1} field values, got {len(body) // 8}")
    returns = np.frombuffer(body, dtype="<f8").astype(np.float64)
    config = LatticeConfig(n_intervals=n, variance_w=w, seed=seed)
    return LatticeState(config, returns, step=step, incremental=incremental)
