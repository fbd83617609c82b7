"""l1-regularized Tikhonov regularization with numerical rate certificates."""

__version__ = "0.1.0"

from .core_types import Norm, norm, project, sign_pattern_of, tail_sum
from .exceptions import (ApproximationError, ArgumentError, BracketError, ConvergenceError,
                         DegenerateRateError, InvalidCertificateError, NumericalError)
from .operators import Family, ForwardOp, apply, apply_adjoint, diagnose, make_operator
from .param_rules import (APrioriRule, ChosenAlpha, DiscrepancyRule, ZERO_SOLUTION, choose_a_priori,
                          choose_discrepancy)
from .solver import SolveResult, SolverOptions, TikhonovProblem, objective, soft_threshold, solve
from .source_cert import (GammaMethod, GammaTable, SourceCertificate, check_range_closure,
                          compute_gamma_table, constructive_approximation, find_witness)
from .vsc_rate import RateFunction, VscReport, check_vsc, phi_eval, theoretical_bound
from .harness import ExperimentReport, ExperimentSpec, fit_slope, make_noise, run_experiment
