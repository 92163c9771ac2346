"""Numerical toolkit for the Riesz fractional calculus of variations."""

from .grid import (BOX, DECAY_COMPACT, DECAY_SCHWARTZ, DECAY_UNKNOWN,
                   PERIODIC, FractionalParams, GridSpec, SampledField,
                   compute_constants, field_from_function, gradient_mu,
                   laplacian_nu, load_field, lp_inner, lp_norm, make_grid,
                   riesz_gamma, save_field, sphere_area, zero_field)
from .fracops import (QUADRATURE, SPECTRAL, Backend, OperatorResult,
                        as_matrix, classical_gradient, fractional_divergence,
                        fractional_gradient, fractional_laplacian,
                        from_matrix, nonlocal_leibniz_remainder,
                        riesz_potential)
from .calculus_id import (IdentityReport, check_composition,
                          check_duality_gradient, check_duality_laplacian,
                          check_laplacian_push, check_leibniz,
                          check_periodic_mean_zero, check_poincare,
                          check_potential_lift, emit_reports, summary_table)
from .spaces import (ComplementarySpec, ConstructionResult,
                     OutsideDiagnostic, construct_prescribed,
                     prescribed_with_datum, project_complementary,
                     strong_outside_diagnostic)
from .envelope import (EnvelopeTable, ViolationWitness,
                       alpha_qc_violation_search, convex_envelope_1d,
                       laminate_upper_bound, periodic_pushforward)
from .varsolve import (INTEGRAND_PRESETS, Integrand, LscSequenceReport,
                       MinimizeOptions, MinimizeReport, evaluate_functional,
                       functional_gradient, lsc_probe, minimize,
                       minimizing_sequence, relaxed_energy)

__version__ = "0.1.0"
