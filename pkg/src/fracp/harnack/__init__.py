from .lemmata import (AbsorbResult, CoveringResult, DeGiorgiSequence, IterationResult, absorb_bound_check,
                      covering_dilate, geometric_iteration)
from .reports import (DELTA_GRID, REPORTS, ExpansionReport, InequalityReport, caccioppoli_report,
                      expansion_report, harnack_report, implied_constant, inf_estimate_report,
                      power_caccioppoli_report, sup_bound_report, sup_bound_sweep, sup_exponent,
                      tail_control_report, weak_harnack_bound, weak_harnack_report)
from .experiments import (CounterexampleResult, SweepSummary, build_problem, constant_sweep, counterexample_base,
                          counterexample_run, evaluate_reports, solve_problem)
