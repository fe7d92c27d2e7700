"""Minimax-regret planning for sample-based uncertain stochastic shortest path problems."""

from .errors import (CoverageError, DivergenceError, ImproperPolicyError, NonConvergenceError, PlannerTimeout,
                     SearchBudgetExceeded, StructureError, UmdpError, ValidationError)
from .model import FactoredUmdp, MdpSample, StationaryPolicy, Umdp, validate_umdp
from .options import OptionPolicy, backward_induction, option_cost_and_transition, optimize_option_deterministic
from .planners import (OptionPlan, PlannerConfig, averaged_mdp_policy, best_sample_policy, cemr_minimax_vi,
                       exact_independent_minimax_regret, minimax_regret_vi, robust_vi)
from .solve import (cemr_eval, check_proper, evaluate_policy, expected_cost, optimal_values, q_gap,
                    regret_bellman_eval, regret_direct)

__version__ = "0.1.0"
