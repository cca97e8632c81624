"""quadnest: a high-precision principal-nest laboratory for f_a(x) = a - x^2.

Builds the principal nest with its return/landing branch combinatorics,
computes branch statistics and the goodness taxonomy, bounds quasisymmetric
capacities, and classifies parameters as regular or Collet-Eckmann with
polynomial recurrence.
"""

__version__ = "0.1.0"

from .precision import (DEFAULT_PRECISION, PrecisionInterval, PrecisionReal,
                        working_precision)
from .dynamics import (CycleReport, MapParam, OrbitSample, distortion,
                       find_attracting_cycle, find_fixed_points,
                       invariant_interval, iterate)
from .nest import (AddressRecord, NestBudgets, NestReport, ReturnBranch,
                   ReturnSystem, Termination, TreeAddress, build_first_level,
                   build_nest, build_next_level, detect_central_and_simple,
                   discover_branches, hyperbolic_outside, landing_components,
                   landing_time, nest_report_to_dict)
from .constants import (PaperConstants, faithful_constants, k_of_gamma,
                        practical_constants)
from .qscapacity import (CapacityBound, IntervalSet, QsTestMap,
                         capacity_bounds, pullback_capacity_bound,
                         tree_decompose_bound)
from .branchstats import (BranchClass, LambdaReport, TimeStats,
                          check_G, classify_landing_LC, classify_landing_LE,
                          classify_landing_LS_LF, classify_returns_VG_B,
                          lambda_exponents, large_times_checklist,
                          partial_time_account, time_statistics,
                          tree_capacity_bound)
from .montecarlo import (MeasureEstimate, SyntheticNestedSystem,
                         borel_cantelli_harness)
from .classify import (ClassifyConfig, ExponentTrace, ParameterVerdict,
                       RecurrenceTrace, ce_exponent, classify_parameter,
                       recurrence_exponent, return_branch_recurrence)
from .parawindow import ParaWindow, parameter_window
