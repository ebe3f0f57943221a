"""Young integration, semigroup convolutions and a windowed Picard solver for
dy = Ay dt + sigma(y) dx driven by Hölder paths of exponent above 1/2."""

__version__ = "0.1.0"

from .paths import (HolderPath, generate_analytic, generate_fbm, holder_norm, holder_seminorm,
                    mollify, read_path_csv, write_path_csv)
from .spectral import (ConstantField, Nemytskii, SigmaHat, SpectralOperator, State,
                       apply_generator, apply_semigroup, nemytskii_apply, norm_alpha,
                       parse_sigma_hat)
from .young import (SampledField, TwoParamSample, hat_delta1, hat_holder_seminorm,
                    remainder_scalar, young_convolution, young_integral)
from .solver import (GateError, Problem, SolverConfig, SolverError, Trajectory, apriori_bound,
                     integral_residual, picard_map, regularity_slope, solve_mild)
from .verifiers import (ChainRuleSpec, InvarianceSpec, chain_rule_residual, invariance_statistic,
                        smooth_approx_convergence)

__all__ = [
    "HolderPath", "generate_fbm", "generate_analytic", "holder_seminorm", "holder_norm",
    "mollify", "read_path_csv", "write_path_csv",
    "SpectralOperator", "State", "SigmaHat", "Nemytskii", "ConstantField", "apply_semigroup",
    "apply_generator", "norm_alpha", "nemytskii_apply", "parse_sigma_hat",
    "SampledField", "TwoParamSample", "young_integral", "remainder_scalar", "young_convolution",
    "hat_delta1", "hat_holder_seminorm",
    "Problem", "SolverConfig", "Trajectory", "GateError", "SolverError", "picard_map",
    "solve_mild", "apriori_bound", "integral_residual", "regularity_slope",
    "ChainRuleSpec", "InvarianceSpec", "chain_rule_residual", "invariance_statistic",
    "smooth_approx_convergence",
]
