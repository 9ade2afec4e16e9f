"""Sparse recovery with the transformed-l1 penalty.

Modules
-------
penalty   pointwise penalty, its DC split, derivatives and soft thresholding
sensing   Gaussian and over-sampled DCT ensembles, sparse signals, problems
solver    DCA outer loop with ADMM inner solvers (unconstrained / constrained)
analysis  RIP estimates, recovery conditions, local-minimizer checks
harness   seeded success-rate sweeps and CSV output
"""

from .penalty import PenaltyParams, SubgradientSet, phi, phi_grad, penalty_sum, rho, rho_prime, shrink
from .sensing import EnsembleSpec, Problem, SignalSpec, make_problem
from .solver import SolveOptions, SolveResult, solve, solve_constrained, solve_l1_baseline, solve_unconstrained

__version__ = "0.1.0"
