"""Min-max fair coordinated multicell beamforming.

Large-system dual solver (interference-map fixed points, pairwise simplex
search, nested zero-forcing recursion), exact two-cell closed forms, rate
region boundaries, and finite-system Monte-Carlo validation of the resulting
beamforming recipes.
"""

__version__ = "0.1.0"

from .model_core import (ConfigError, ConvergenceError, DimensionExhaustedError,
                         DualPoint, InfeasibleError, KktReport, Level,
                         NestedSolution, NumericsError, SystemConfig,
                         ValidationResult, cell_margin, validate_config)
from .fixed_point import (FixedPointOptions, FpStatus, LambdaFixedPointResult,
                          MkValue, eval_F, lambda_fixed_point, solve_mk)
from .dual_solver import DualSolverOptions, solve_dual, verify_kkt
from .power_alloc import (altruistic_noise, gamma_prime, nested_solve,
                          solve_bs_powers)
from .two_cell import (Feasibility, TwoCellCase, TwoCellCurves, TwoCellSolution,
                       feasibility_two_cell, solve_two_cell, two_cell_curves,
                       zf_optimality_check)
from .rate_region import (RateProfile, feasible_rate, gammas_from_rate, max_rate,
                          sweep_boundary)
from .finite_mc import (BeamformerSet, ChannelSet, FiniteDualSolution,
                        FiniteSolverOptions, build_beamformers_ls, compute_sinr,
                        draw_channels, finite_dual_solve, finite_optimal_beamformers,
                        finite_power_alloc, power_control_only, run_avg_rate_region,
                        run_convergence, run_rate_cdf)

__all__ = [name for name in dir() if not name.startswith("_")]
