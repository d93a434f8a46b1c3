"""Adaptive Bayesian frequency estimation for atomic clocks.

Grid posteriors, Ramsey signal models, interrogation-time schedules, the
adaptive estimator, closed-loop locking and Allan-deviation analysis.
"""

from .adaptive import BfeConfig, EstimationTrace, IterationRecord, bfe_run, select_lo_frequency, utility
from .analysis import FractionalSeries, allan_deviation, fit_loglog_slope, improvement_db
from .errors import (BfeError, ConfigurationError, DegenerateUpdateError, InfeasibleBudgetError,
                     PreconditionError, RegridError, TraceFormatError)
from .locking import LoModel, LockTrace, lo_evolve, pid_error, run_bfe_lock, run_pid_lock
from .posterior import (FrequencyInterval, GridDistribution, bayes_update, entropy, gaussian_prior, mean,
                        regrid, std, uniform_prior)
from .schedule import Scheme, build_schedule, iteration_count, predicted_precision, solve_ratio_for_budget, \
    total_time
from .signal import SignalModel, gaussian_likelihood, ramsey_signal, simulate_measurement

__version__ = "0.1.0"
