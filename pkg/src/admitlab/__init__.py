"""Numerical laboratory for boundary determination of complex anisotropic
admittivities from local Dirichlet-to-Neumann data."""

__version__ = "0.1.0"

from .admittivity import (AdmittivityFamily, AprioriData, ParameterField,
                          best_frequency_window, eval_admittivity,
                          frequency_window, inverse_parts, validate_class_H)
from .errors import (AdmitLabError, ConfigError, EstimatorRefusal,
                     GeometryError, NumericError, SingularityError, SolverError)
from .estimator import (boundary_gap_estimate, build_forward, build_frame,
                        delta_h, derivative_gap_estimate, lipschitz_ratio,
                        weighted_integral)
from .gegenbauer import GegenbauerSpec, gegenbauer, gegenbauer_derivative, ode_residual
from .geometry import BoundaryPatch, BoxDomain, build_enlarged_domain, build_eta_sets
from .singular import build_corrected_probe, leading_gradient, leading_term, make_probe
