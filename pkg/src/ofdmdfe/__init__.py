"""Modulation-constrained capacity of OFDM versus the ideal SC-DFE.

Capacities throughout are in bits per complex symbol.
"""

__version__ = "0.1.0"

from .channel import (
    ChannelTaps,
    SubcarrierProfile,
    fig1_channel,
    fig3_channel,
    freq_response,
    from_zeros,
    load_channel,
    normalize,
    profile,
    subcarrier_snrs,
)
from .exceptions import AccuracyError, ConditioningError, DomainError
from .qam_capacity import (
    Constellation,
    awgn_qam_capacity,
    convexity_intervals,
    gaussian_capacity,
    mixture_pdf,
    pam_mmse,
    tau,
    tau_second_derivative,
)
from .schemes import (
    CapacityCurve,
    capacity_ratio_sweep,
    dfe_capacity_gaussian,
    dfe_capacity_qam,
    dfe_snr,
    ofdm_capacity_gaussian,
    ofdm_capacity_qam,
    per_subcarrier_capacities,
)
from .simulator import (
    DfeDesign,
    SimConfig,
    SimResult,
    design_mmse_dfe,
    simulate_ofdm,
    simulate_scdfe_genie,
)
