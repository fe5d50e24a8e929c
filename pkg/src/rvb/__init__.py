"""Exact photon-emission collapse and RVB states in the lossy-cavity Dicke model."""

__version__ = "0.1.0"

from .algebra import (  # noqa: E402
    HalfInteger,
    SqrtRational,
    binomial_exact,
    cg_general,
    delta_norm,
    e_lambda,
    ln_factorial,
)
from .emission import (  # noqa: E402
    emission_distribution,
    emission_probability,
    mean_gamma,
    spinon_stats,
    sweep_alpha,
    variance_gamma,
)
from .errors import CapacityError, DomainError, SymmetryError  # noqa: E402
from .simulator import brute_force_sector_weights, mixed_state_ensemble, sample_collapse  # noqa: E402
from .states import SystemShape, collapsed_state, row_schmidt, rvb_state  # noqa: E402
