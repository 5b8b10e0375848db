"""hbar-polar duality of symmetric convex bodies and concentration uncertainty."""
from .blobs import QuantumBlob, blob_from_spd, claim3_check, is_symplectic, standard_symplectic_form
from .exceptions import (
    DimensionMismatchError,
    GridLeakageError,
    InvalidBodyError,
    NumericalError,
    UnboundedBodyError,
    ValidationError,
)
from .geometry import (
    Box,
    Ellipsoid,
    HPolytope,
    VPolytope,
    apply_linear,
    contains,
    is_subset,
    polar_dual,
    sample_boundary,
    support,
)
from .uncertainty import donoho_stark_check, hardy_check, main_theorem_trial, theorem_sweep
from .volumes import (
    bs_upper,
    conjecture_lower,
    delta,
    delta_stirling,
    kuperberg_lower,
    mahler_volume,
    volume,
)
from .waves import (
    GaussianState,
    GridState,
    coherent_state,
    concentration,
    fourier_gaussian,
    fourier_grid,
)

__version__ = "0.1.0"
