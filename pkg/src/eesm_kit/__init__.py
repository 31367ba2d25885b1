"""EESM-log-SGN PHY layer abstraction toolkit.

Implements a link-to-system (L2S) abstraction chain for MIMO-OFDM links
with imperfect channel estimation: per-packet channel generation, MMSE
detection, post-processing SINR, EESM effective SINR with beta
calibration, and log-SGN fitting of the effective-SINR distribution.
Both a Monte-Carlo simulation flow and a closed-form analysis flow are
provided, along with validation suites checking one against the other.
"""

from eesm_kit.channel import (
    ChannelConfig,
    ChannelRealization,
    ErrorModel,
    default_sigma_e2,
    generate_channel,
    inject_error,
    svd_precoder,
)
from eesm_kit.eesm import (
    AwgnPerReference,
    EesmCalibration,
    awgn_per,
    calibrate_beta,
    eesm_effective_sinr,
    generic_effective_sinr,
)
from eesm_kit.logsgn import (
    FitReport,
    LogSgnParams,
    fit_logsgn,
    ks_distance,
    sample_sgn,
    sgn_cdf,
    sgn_pdf,
)
from eesm_kit.receiver import (
    LinkOperatingPoint,
    PerturbationTerms,
    analytical_post_sinr,
    analytical_terms,
    k_matrix,
    mmse_detector,
    perturbed_detector_first_order,
    post_sinr,
)
from eesm_kit.pipeline import (
    PacketRecord,
    RunConfig,
    run_analysis_flow,
    run_simulation_flow,
)

__version__ = "0.1.0"
