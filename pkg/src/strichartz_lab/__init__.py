"""Numerical laboratory for periodic Strichartz, bilinear and trilinear estimates."""
from ._kernels import BACKEND
from .core import (CoefficientVector, Dispersion, FrequencyRegion, TorusSpec, galilean_shift,
                   kdv_galilean_reduce, project)
from .estimators import (EstimateReport, PreconditionError, bilinear_short, linear_lp,
                         rescaled_verify, smoothing_ratio, square_function_gap,
                         strichartz_ratio, transversality_nu, trilinear_1d, trilinear_1d_log,
                         trilinear_2d)
from .extremize import ExtremizerResult, Objective, extremize_ratio, structured_data
from .field import FieldSamples, GridSampling, dump_field, evaluate_field, load_field
from .norms import (NormResult, exact_even_power_integral, lp_spacetime_norm, spacetime_norm)
from .sweep import ScalingFit, SweepSpec, SweepTable, fit_scaling, run_sweep
from .theory import BoundReport, iteration_count, theory_bound

__version__ = "0.1.0"
