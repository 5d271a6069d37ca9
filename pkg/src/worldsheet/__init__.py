"""Nambu-Goto strings in Schwarzschild space-time.

Ambient geometry, the extremal-surface identities, the first-order string
system, the characteristic chart, initial data, solvers, a spherical-chart
validation path and a command-line front end.
"""

from .config import RunConfig, load_config
from .data import (InitialData, boosted_pulse, check_assumptions, check_horizon_margin,
                   compact_patch, epsilon_family, epsilon_line, epsilon_loop, h3_violating,
                   lambda0_from_data, smallness_norms, standing_wave, straight_string)
from .errors import (AssumptionViolated, ConfigError, HorizonViolation, NotTimelike,
                     PolarSingularity, WorldsheetError)
from .geometry import MetricField, MetricKind, evaluate_metric
from .solvers import (DiagnosticsReport, GridParams, SolveResult, Termination,
                      dalembert_oracle, solve_characteristic, solve_upwind_raw)
from .spherical import SphericalChart, cross_chart_study, to_spherical_data
from .transform import CoordinateMap, LambdaInitial, build_map, solve_lambda_exact

__version__ = "0.1.0"
