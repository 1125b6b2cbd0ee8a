"""Optimal sliding method for bilinearly-coupled saddle-point problems.

The package solves ``min_x max_y f(x) + <y, B x> - g(y)`` by casting it as a
three-component monotone variational inequality and running a recursive
sliding method that calls ``grad f``, ``grad g`` and products with ``B`` at
separate frequencies.  It also provides oracle-cost accounting, structured
hard instances and baseline solvers.
"""

from .adapter import (EPS_INNER, AdapterConfig, RestartPlan, SlidingSaddleSolver, build_vi, restart_plan,
                      restarted_solve)
from .baselines import BaselineConfig, ExtragradientSolver, GDASolver, run_baseline
from .instances import (InstanceSpec, gen_bilinear_tridiag, gen_chain_gradient, gen_chain_matrices,
                        gen_coupled_block, gen_random_quadratic, named_instance, validate_spectrum_E)
from .numerics import DiagWeight, kernel_basis, solve_linear, sym_eigs, weighted_dot
from .oracles import (CostModel, DenseLinearMap, LinearOp, OracleLedger, QuadraticFn, bregman,
                      execution_time, wrap_counting)
from .problem import (ConditionNumbers, DegenerateProblem, ProblemParams, SaddlePointProblem, SolutionSet,
                      condition_numbers, kkt_residual, lyapunov, r2_metric, solve_exact_quadratic,
                      validate_assumption5)
from .sliding import Schedule, SlidingVISolver, alpha, inner_argmin, make_schedule, run_sliding
from .traces import TraceRecord, read_trace_csv, write_trace_csv
from .vi import FullSpace, PBall, VIComponent, VIProblem, gap, project, theorem3_rhs

__version__ = "0.1.0"
