"""Zeta and prime-power-modulus L-function values by block geometric sums.

Every evaluation returns a certified truncation bound, a tail bound and a
round-off estimate alongside the value.
"""

from .coefficients import build_beta_table, c_coeffs, epsilon_m
from .dirichlet import (PrimePowerCharacter, block_value_chi, build_character, calB_chi,
                        default_params_chi, lfun_theorem2, postnikov_L, twisted_geom_derivs,
                        twisted_geom_sum)
from .errors import BlockZetaError, ConsistencyError, DomainError, ParameterError, TableError
from .geomsum import (GeomDerivRequest, em_geom_deriv, geom_sum, geom_sum_derivs,
                      poly_exp_integral, y_laurent_derivs)
from .numeric import (ComplexPoint, PrecisionContext, complex_inv_power, reduce_mod_2pi,
                      required_mantissa_bits, roundoff_estimate)
from .schedule import BlockSchedule, EvalParams, build_schedule, default_params, validate_params
from .zeta import (EvalResult, block_value, calB, calB_closed_bound, zeta_direct,
                   zeta_euler_maclaurin, zeta_hybrid, zeta_theorem1)

__version__ = "0.1.0"

__all__ = [
    "BlockSchedule", "BlockZetaError", "ComplexPoint", "ConsistencyError", "DomainError",
    "EvalParams", "EvalResult", "GeomDerivRequest", "ParameterError", "PrecisionContext",
    "PrimePowerCharacter", "TableError",
    "block_value", "block_value_chi", "build_beta_table", "build_character", "build_schedule",
    "c_coeffs", "calB", "calB_chi", "calB_closed_bound", "complex_inv_power",
    "default_params", "default_params_chi", "em_geom_deriv", "epsilon_m", "geom_sum",
    "geom_sum_derivs", "lfun_theorem2", "poly_exp_integral", "postnikov_L",
    "reduce_mod_2pi", "required_mantissa_bits", "roundoff_estimate", "twisted_geom_derivs",
    "twisted_geom_sum", "validate_params", "y_laurent_derivs", "zeta_direct",
    "zeta_euler_maclaurin", "zeta_hybrid", "zeta_theorem1",
]
