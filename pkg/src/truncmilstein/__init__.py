"""Truncated and randomized truncated Milstein schemes for non-autonomous
SDEs with super-linear coefficients, with tools for measuring their strong
convergence order."""

from .brownian import BrownianLattice, UniformOffsets, bridge_sample, coarsen, generate, offsets
from .errors import (ConfigurationError, DomainError, NotApplicableError, NumericEvaluationError,
                     PolicyDomainError, RegressionDomainError, ResolutionError, SdeError)
from .experiment import (ConvergenceReport, ErrorSample, convergence_study, fit_rate,
                         half_step_gap, moment_sweep, predicted_rate, strong_error)
from .model import ProblemCatalogEntry, SdeProblem, catalog, eval_lsigma, fd_check, get_entry
from .schemes import (SchemeKind, TrajectoryRecord, integrate, step_randomized,
                      step_truncated_milstein)
from .truncation import (GenericEnvelope, PowerLaw, TruncationPolicy, project, radius,
                         truncated_coefficients)

__version__ = "0.1.0"
