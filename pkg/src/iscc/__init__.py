"""Sensing, computation and communication co-planning for a shared edge node."""

from ._backend import NAME as BACKEND
from .allocation import (CommBudget, DeviceAllocation, allocate, comm_feasible, fs_upper_bound,
                         oracle_allocate)
from .comm import (Device, DeviceTask, Link, Scenario, ScenarioParams, data_rate,
                   generate_scenario, task_delay)
from .errors import (AliasingError, BoundError, BracketError, ConfigError, DomainError,
                     FitError, InfeasibleError, InfiniteDelay, IsccError, NoGainError)
from .numerics import Tolerance, bisect_monotone, golden_section_max, q
from .optimizer import (AllocationPlan, evaluate_fixed_fs, run_benchmark, solve,
                        solve_exhaustive, solve_low_complexity)
from .sensing import (AlphaModel, ClassSet, ClassStats, SensingParams, avg_sensing_delay,
                      cnn_accuracy, cnn_pass_probability, default_class_set,
                      false_positive_rate, gain_condition, miss_rate, overall_accuracy,
                      performance_gain, power_stats)
from .threshold import ThresholdSolution, eta_accuracy_max, eta_delay_bound, select_threshold

__version__ = "0.1.0"
