"""Self-organized-critical lattice market toolkit.

Simulates the max-signal triplet-replacement dynamics on a periodic returns
lattice, quantifies criticality (gap function, avalanche power law, entropy),
derives market series (prices, volatility, gains distributions), and fits
GARCH(1,1) volatility models to simulated and historical returns.
"""

from .analysis import (AvalancheRecord, GapFunction, PowerLawFit, SignalTrace,
                       SizeHistogram, activity_histogram, avalanches, entropy,
                       fit_power_law, gap_function, integrate_count, size_histogram)
from .bars import (GapPolicy, MinuteBar, historical_returns, ingest_minutes,
                   read_bars, scan_minutes, write_bars)
from .ensemble import ensemble_avalanches, ensemble_final_returns, indexed_map
from .errors import (ComputationError, ConfigurationError, FitError, InputError,
                     ParseError, SocMarketError, ValidationError)
from .gains import (NASDAQ_OVERLAY, GainsHistogram, GaussianFit, OverlayScaling,
                    Region, apply_overlay, ensemble_gains, fit_gaussian)
from .garch import (GarchFit, GarchParams, ShockSeries, fit, fit_report,
                    neg_log_likelihood, score, simulate, variance_recursion)
from .lattice import (EntropyRecorder, HitLogRecorder, LatticeConfig, LatticeState,
                      SignalTraceRecorder, TieBreak, UpdateEvent, compute_signal,
                      compute_signals, global_signal, init_random, max_signal,
                      read_snapshot_frame, run, update_step, write_snapshot_csv,
                      write_snapshot_frame)
from .runcfg import RunConfig, load_run_config, with_overrides
from .seeds import derive_seed, derive_seeds, splitmix64
from .series import (Boundary, Derived, Historical, PriceSeries, ReturnsSeries,
                     Simulated, VolatilitySeries, from_lattice, prices, rescale,
                     returns_of, volatility)

__version__ = "0.1.0"
