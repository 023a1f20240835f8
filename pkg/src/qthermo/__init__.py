"""qthermo: quenched thermodynamic formalism for random non-uniformly
expanding circle and interval maps.

Builds the eigen-triple (lambda_omega, h_omega, nu_omega) of the random
Ruelle-Perron-Frobenius operator by Birkhoff-cone iteration, detects
hyperbolic times, and verifies combinatorial-expansion hypotheses, weak
Gibbs ratios, pressure identities, and correlation decay at desk scale.
"""

__version__ = "0.1.0"

from .base_driver import BaseSample, BaseSystem, advance, ensemble_average, sample_base
from .errors import (BurnInError, ConfigError, DomainError,
                     InsufficientDataError, NumericalError, OutOfWindowError,
                     QThermoError)
from .fiber_system import (BranchData, HypothesisReport, ModelSpec,
                           PotentialSpec, ZERO_POTENTIAL, branch_data,
                           check_hypotheses, eval_forward, inverse_branches,
                           potential_stats)
from .function_space import (ConeParams, GridFunction, cone_alpha_beta,
                             cone_diameter_bound, cone_member, deriv_bound,
                             kappa_along_orbit, projective_distance)
from .hyperbolicity import (OrbitRecord, empirical_exceptional_mass,
                            expansion_sequence, ht_density, hyperbolic_times,
                            pliss_times)
from .thermo_diagnostics import (correlation, cylinder_count_dp, dynamic_ball,
                                 fit_decay_rate, hyperbolic_threshold,
                                 implied_entropy, pressure_from_lambda,
                                 pressure_separated, weak_gibbs_ratio)
from .transfer_engine import (EigenTriple, apply_transfer, duality_residual,
                              invariance_residual, jacobian_check,
                              normalized_pullback_iterate, solve_triple)
