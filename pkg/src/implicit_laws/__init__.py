"""Implicit constitutive laws G(J, D) = 0: model catalogue, condition audit,
epsilon-selection maps and a 1D finite element solver."""

from .errors import (CompatibilityError, ConfigError, DimensionError, ImplicitLawError,
                     ParameterDomainError, PropertyViolation, RootNotBracketedError,
                     SelectionFailure, SolverError, StepFailure)
from .fem import (Mesh1D, SolveConfig, Trajectory, build_mesh, energy_report, solve_elliptic,
                  solve_parabolic, sweep_eps, sweep_mesh)
from .models import (ConstitutiveModel, ModelKind, TensorPair, eval_residual, jacobians,
                     make_builtin, maxwell_stefan_B, null_curve_scalar)
from .selector import (SchemeConfig, SelectorResult, coercivity_eps, estimate_constants,
                       graph_distance, select, selection_curve)
from .verifier import (ConditionReport, SampleSpec, check_G1, check_G2, check_G3, check_G4,
                       check_pairwise, verify_model)

__version__ = "0.1.0"
