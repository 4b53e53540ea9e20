"""Numerical verification lab for extremal-operator elliptic estimates.

Library layout:

  core      grids, domains, quadrature, stencils, symmetric eigensolvers
  pucci     extremal operators, model nonlinearities, structure checks
  envelope  convex envelope / contact set / gradient image / witnesses
  barrier   explicit radial barrier with certified properties
  solve     monotone wide-stencil solver, rescaling, Cole-Hopf transform
  abp       maximum-principle verifier with its explicit constant
  harnack   Harnack/Hoelder/level-set verifiers and cube decomposition
  cli       scenario runner (`ellipticlab suite` runs the full battery)
"""

from .core import (
    Ball,
    Cube,
    Grid,
    GridFunction,
    StructureParams,
    SymMatrix,
    eig_sym,
    eigvals_sym,
    fd_gradient,
    fd_hessian,
    grid_function_from_callable,
    load_grid_function,
    lp_norm,
    parallel_sum,
    save_grid_function,
    sup_inf_osc,
)
from .pucci import OperatorSpec, SingularGradientError, eval_operator, pucci_minus, pucci_plus
from .envelope import convex_envelope, gradient_image, witness_decomposition
from .barrier import BarrierSpec, build_barrier, verify_barrier
from .solve import ProblemSpec, SolveResult, cole_hopf, generate_radial, rescale, solve
from .abp import AbpReport, abp_check, abp_constant, abp_singular_bound
from .harnack import (
    DecayFit,
    DyadicCube,
    czd,
    harnack_report,
    holder_seminorm,
    level_set_decay,
    local_max_report,
    osc_decay_check,
    weak_harnack_report,
)
from .report import VerificationReport

__version__ = "0.1.0"
