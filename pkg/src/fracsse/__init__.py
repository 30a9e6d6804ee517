"""Pathwise simulation and verification for Schrodinger dynamics with
multiplicative fractional noise on the periodic box."""

__version__ = "0.1.0"

from .errors import (ConfigurationError, DomainError, EstimationError,
                     FracsseError, NumericalError)
from .fbm import FbmPath, estimate_holder, fbm_covariance, sample_fbm
from .fraccalc import (FracConfig, SampledFunction, lambda_alpha,
                       stieltjes_integral, stochastic_integral, w_alpha1_norm,
                       weyl_left, weyl_right, young_riemann)
from .magschrod import (WaveField, evolve, gauge_conjugation_identity,
                        magnetic_laplacian_apply, propagate)
from .nonlinear import NonlinearitySpec, apply_g, hartree_potential
from .qnoise import (NoiseField, NoiseSpectrum, build_spectrum, mollify_field,
                     sample_field, sobolev_norm)
from .sse import (ModeTestFunction, Trajectory, duhamel_residual, solve_direct,
                  solve_gauge, stage_times, weak_form_residual)

__all__ = [
    "ConfigurationError", "DomainError", "EstimationError", "FracsseError",
    "NumericalError", "FbmPath", "estimate_holder", "fbm_covariance",
    "sample_fbm", "FracConfig", "SampledFunction", "lambda_alpha",
    "stieltjes_integral", "stochastic_integral", "w_alpha1_norm", "weyl_left",
    "weyl_right", "young_riemann", "WaveField", "evolve",
    "gauge_conjugation_identity", "magnetic_laplacian_apply", "propagate",
    "NonlinearitySpec", "apply_g", "hartree_potential", "NoiseField",
    "NoiseSpectrum", "build_spectrum", "mollify_field", "sample_field",
    "sobolev_norm", "ModeTestFunction", "Trajectory", "duhamel_residual",
    "solve_direct", "solve_gauge", "stage_times", "weak_form_residual",
]
