"""Statevector simulation and relaxation analysis of Floquet circuits
built from a fixed two-qubit gate."""

__version__ = "0.1.0"

from .statevec import (  # noqa: F401
    Seed,
    StateVector,
    apply_pauli,
    apply_two_qubit_gate,
    inner_product,
    random_product_state,
)
from .gates import (  # noqa: F401
    GateSpec,
    build_V,
    build_W,
    build_dual_unitary_kicked,
    build_exp_xxz,
    canonical_params,
    is_dual_unitary,
    sample_random_kick,
)
from .circuits import CircuitConfig, FloquetStep, build_step, evolve, max_rank  # noqa: F401
from .observables import (  # noqa: F401
    OTOCSeries,
    PuritySeries,
    ReducedSpectrum,
    TwoPhaseFit,
    effective_rate,
    lambda_k_infty,
    mp_density,
    mp_tv_distance,
    numerical_rank,
    otoc,
    purity,
    purity_p,
    reduced_density,
    reduced_spectrum,
    stationary_purities,
    two_phase_fit,
)
