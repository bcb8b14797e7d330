"""Explicit eigensection bound constants and their numerical verification on flat tori."""

from .constants import (
    BoundConstants,
    GeometricBounds,
    MoserSchedule,
    alpha_exponent,
    assemble_constants,
    epsilon_product,
    g_factor,
    gallot_constant,
    holonomy_lower_bound,
    sup_norm_bound,
    main_bound,
    moser_rhs,
)
from .eigensolver import ConvergenceError, Eigenpair, dense_reference, smallest_eigenpairs
from .holonomy import BetaResult, LoopSpec, beta_flat, loop_holonomy
from .lattice import (
    BundleSpec,
    LineComponent,
    LinkField,
    TorusSpec,
    build_links,
    flat_spectrum,
    plaquette_curvature,
    torus_metrics,
)
from .operator import apply_laplacian, covariant_gradient, lp_norm, pointwise_gram

__version__ = "0.1.0"
