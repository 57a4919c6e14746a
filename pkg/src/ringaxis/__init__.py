"""Simulation and verification toolkit for ring-plus-axis (n+1)-body solutions.

One body of mass m1 moves on a fixed axis while n equal masses m2 form a
rotating regular n-gon; the package integrates the reduced equations of
motion, reconstructs and cross-checks the full Cartesian system, certifies
collisionless confinement and boundedness from conserved quantities, fits
the axial profile g(r) on monotone radial segments, and searches for
periodic solutions.
"""

__version__ = "0.1.0"

from .errors import (BudgetExceededError, CollisionDomainError, ConfigurationError,
                     DivergenceError, OutsideFamilyError, RingAxisError,
                     SegmentError, TheoremViolationError)
from .model import (ConservedPair, FamilyFlags, RadialBounds, ReducedState,
                    RingConstants, SeedConfig, boundedness_lhs, closed_form_ring_sums,
                    conserved_from_seed, dump_seed, load_seed, make_constants,
                    seed_from_mapping, seed_to_mapping, validate_family)
from .dynamics import (characteristic_period, check_radial_confinement, circular_dy20,
                       energy, energy_along, energy_of, make_ode,
                       no_collision_certificate, radial_bounds, radial_bounds_from_seed,
                       reduced_rhs)
from .integrate import (IntegratorSettings, RadialEvent, Trajectory, endpoint_state,
                        initial_state, integrate, integrate_from_state,
                        monotone_segments, write_trajectory_csv)
from .nbody import (FullState, FullTrajectory, cartesian_energy, cross_validate,
                    integrate_full, masses_vector, nbody_rhs, reconstruct_full,
                    reconstructed_samples)
from .gshape import (GSample, fit_g_spline, g_ode_coefficients, g_ode_residual,
                     g_ode_residual_scale, rdot_squared_from_g,
                     reconstruct_by_quadrature, samples_from_trajectory)
from .search import (PeriodicCandidate, SweepResult, full_period_multiplier,
                     load_known_orbits, make_candidate, read_catalog, refine, sweep,
                     verify_recurrence, write_catalog, xi, xi_components)

__all__ = [name for name in dir() if not name.startswith("_")]
