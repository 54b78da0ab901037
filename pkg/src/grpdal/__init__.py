"""Inexact golden-ratio primal-dual methods with linesearch."""

from .errors import (CertificateFailed, ConfigError, DomainViolation, GRPDALError,
                     InexactSolveFailed, InternalError, InvalidArgument, PreconditionViolation,
                     UnsupportedFunction)
from .functions import AnalysisL1, BoxIndicator, L1Norm, QuadraticLinear, Separable
from .linops import (BlurOperator, DenseOperator, GradientOperator, Metric, StackOperator,
                     operator_norm_in_metric)
from .prox import (ProxCertificate, ProxRequest, certify_type0, certify_type1, certify_type2,
                   fenchel_gap, prox_exact, prox_inexact)
from .saddle import ErgodicAverage, GapValue, SaddleProblem, gap
from .solvers import (ErrorSchedule, RunReport, SolverConfig, compute_strongly_convex_params,
                      dual_linesearch, golden_ratio_combination, grpdal_baseline, ip_grpdal,
                      ip_grpdal_accelerated_full, ip_grpdal_accelerated_partial, lyapunov_value,
                      pda_baseline, pdal_baseline)

__version__ = "0.1.0"
