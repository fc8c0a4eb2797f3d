"""Numerical laboratory for the quantitative stability of almost-Einstein
convex hypersurfaces: exact radial-graph geometry on S^n, curvature deficit
norms, polynomial lemma certification, and recentering experiments."""

from .curvature_algebra import Tensor4, kn_product, norm4, weyl_from_decomposition
from .harmonics import harmonic_field, num_harmonics, random_band_limited
from .identity_checks import (IdentityResidual, bianchi_residual,
                              bochner_residual, linearization_residuals,
                              obata_ratio)
from .polynomial_lemmas import (EigenVector, certify_zeros, eval_pqr, grad_p,
                                quotient_bounds)
from .radial_field import (FieldJet, RadialField, eval_jet,
                           eval_field_jets, linear_field,
                           ricci_commutation_check, shift_constant)
from .sphere_grid import (ChartPoint, QuadratureGrid, build_chart_point,
                          build_grid, integrate, lp_norm, sobolev_norm,
                          unit_sphere_volume)
from .stability_lab import (DeficitReport, OffsetSphere, SweepRecord,
                            closeness_norms, deficits, ray_trace_recenter,
                            run_sweep, solve_center, sweep_csv)
from .surface_geometry import (GeometryJet, admissibility, assemble,
                               assemble_grid, christoffel_fd_check,
                               normalize_volume)

__version__ = "0.1.0"
