"""Monte Carlo achievable-rate laboratory for bi-static modulated re-scatter
(MRS) MIMO systems.

The package samples composite direct + keyhole channels, evaluates exact and
asymptotic achievable rates, simulates MMSE-SIC joint decoding and Hadamard
pilot based least-squares channel estimation, and drives seeded, reproducible
Monte Carlo experiments through a CSV-emitting command line front end.
"""

__version__ = "0.1.0"

from .channel import (
    ChannelRealization,
    Keyhole,
    SymbolDraw,
    SystemConfig,
    alpha_from_db,
    assemble_composite,
    keyhole_from_vectors,
    sample_direct,
    sample_keyhole,
    sample_realization,
    sample_symbols,
    substream,
)
from .estimation import (
    EstimationResult,
    PilotBlock,
    build_pilots,
    error_covariance_scale,
    estimated_csi_rate_bound,
    hadamard,
    ls_estimate,
    observe_pilots,
)
from .experiments import (
    LarPoint,
    RateRegionPoint,
    Scenario,
    SweepPoint,
    run,
    run_lar_convergence,
    run_rate_region,
    run_sum_rate_sweep,
)
from .numerics import (
    AccuracyError,
    bessel_i0_scaled,
    gram_logdet_rate,
    hermitian_eigenvalues,
    integrate_semi_infinite,
    kronecker,
    mmse_residual_sinr,
)
from .rates import (
    DominanceResult,
    LarTxLimit,
    RateSample,
    dominance_check,
    lar_rx_limit,
    lar_tx_limit,
    legacy_alone_rate,
    sum_rate,
)
from .receiver import (
    SicResult,
    decoding_order,
    joint_decode,
    joint_known_x1_rate,
    legacy_sic_rate,
    mrs_postsic_snr,
    mrs_rate_gaussian,
    mrs_rate_wpc,
    wyner_envelope_pdf,
)
