"""Matrix-free eigendecomposition via the isotropic-noise-invariant
double-bracket flow on SO(n).

The heavy lifting lives in the C++ extension `dbflow._core`; this package
re-exports its operations.
"""

from dbflow._core import (
    __version__,
    cayley_exact,
    cayley_neumann,
    commutator_generator,
    direction_cosine,
    domain_radius,
    entry_threshold,
    givens_rotation,
    haar_rotation,
    hutchinson_trace,
    input_bound,
    lipschitz_bound,
    off_diagonal_energy,
    oja_effective_step,
    operator_norm,
    polar_retract,
    qr_factor_positive,
    qr_retract,
    rotated_covariance,
    run_experiment,
    si_contraction,
    solve,
    spectral_separation,
    trace_free,
)

__all__ = [
    "__version__",
    "cayley_exact",
    "cayley_neumann",
    "commutator_generator",
    "direction_cosine",
    "domain_radius",
    "entry_threshold",
    "givens_rotation",
    "haar_rotation",
    "hutchinson_trace",
    "input_bound",
    "lipschitz_bound",
    "off_diagonal_energy",
    "oja_effective_step",
    "operator_norm",
    "polar_retract",
    "qr_factor_positive",
    "qr_retract",
    "rotated_covariance",
    "run_experiment",
    "si_contraction",
    "solve",
    "spectral_separation",
    "trace_free",
]
