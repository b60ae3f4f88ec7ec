"""Nehari-manifold solver for a singular critical Choquard problem on
grid-discretized bounded domains."""

from .grid import (DomainGrid, Field, GridError, build_grid, h1_seminorm_sq,
                   grad_inner, lp_integral, neg_laplacian, random_field,
                   read_field_csv, write_field_csv)
from .riesz import (ExponentError, Exponents, KernelTable, choquard_energy,
                    hls_check, kernel_table, make_exponents, riesz_potential)
from .energy import (EnergyBreakdown, SingularityError, energy, gradient_field,
                     singular_integral, weak_residual)
from .fiber import (NPLUS, NMINUS, NZERO, OFF_MANIFOLD, Constants,
                    FiberDiagnostics, FiberScalars, NoProjectionError,
                    classify_at_one, diagnostics_from_scalars,
                    empirical_lambda_crit_proxy, estimate_embedding_constant,
                    fiber_diagnostics, field_scalars, lambda_star_closed_form,
                    nehari_project_minus, nehari_project_plus)
from .bubble import (BubbleError, BubbleSpec, CriticalConstants, SeedFailure,
                     default_bubble_spec, estimate_critical_constants,
                     minimize_hls_quotient, mountain_pass_seed,
                     sobolev_constant_estimate, talenti_bubble)
from .regularity import (Envelope, EnvelopeError, boundary_envelope,
                         linf_bound, nonlocal_potential_bound,
                         supersolution_check)
from .solver import (SolutionReport, SolverConfig, SolverError,
                     minimize_nminus, minimize_nplus, verify_solution,
                     verify_solution_field)

__all__ = [name for name in dir() if not name.startswith("_")]
