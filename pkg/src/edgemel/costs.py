"""Physical cost model for orchestrated edge learners.

Converts radio and compute parameters of a learner into the quadratic
per-cycle time and energy coefficients used by every allocation solver:

    time(tau, d)   = c2 * tau * d + c1 * d + c0        [s]
    energy(tau, d) = g2 * tau * d + g1 * d + g0        [J]

where ``tau`` is the number of local model updates and ``d`` the batch size
assigned to the learner for one global cycle.  All inputs are SI units
(Hz, W, W/Hz, J, meters); powers given in dBm must be converted first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def dbm_to_watts(p_dbm: float) -> float:
    """Convert a dBm power figure to watts (0 dBm == 1 mW)."""
    if not math.isfinite(p_dbm):
        raise ValueError(f"power must be finite, got {p_dbm}")
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def path_loss_gain(distance_m: float) -> float:
    """Linear channel gain of the cellular attenuation model.

    Attenuation is 128 + 37.1*log10(R) dB with R in kilometers, so the
    fixed 128 dB offset applies at 1 km.
    """
    if distance_m <= 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    attenuation_db = 128.0 + 37.1 * math.log10(distance_m / 1000.0)
    return 10.0 ** (-attenuation_db / 10.0)


@dataclass(frozen=True)
class SystemParams:
    """Global radio and model constants shared by all learners.

    ``model_complexity`` is operations per data sample per update,
    ``model_size`` the parameter count shipped each way, and
    ``data_model_factor`` the extra parameters shipped per sample (zero for
    pure data parallelism).  ``transfer_mode`` selects whether the
    orchestrator ships training batches ("PL") or only model parameters
    ("FL").
    """

    bandwidth_hz: float
    noise_density_w_per_hz: float
    model_complexity: float
    model_size: float
    data_model_factor: float = 0.0
    precision_model_bits: float = 32.0
    precision_data_bits: float = 32.0
    feature_count: float = 16.0
    chip_capacitance: float = 1e-11
    compute_exponent: float = 2.0
    transfer_mode: str = "PL"

    def __post_init__(self):
        positive = {
            "bandwidth_hz": self.bandwidth_hz,
            "noise_density_w_per_hz": self.noise_density_w_per_hz,
            "model_complexity": self.model_complexity,
            "model_size": self.model_size,
            "precision_model_bits": self.precision_model_bits,
            "precision_data_bits": self.precision_data_bits,
            "feature_count": self.feature_count,
            "chip_capacitance": self.chip_capacitance,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if self.data_model_factor < 0:
            raise ValueError("data_model_factor must be >= 0")
        if self.compute_exponent < 1:
            raise ValueError("compute_exponent must be >= 1")
        if self.transfer_mode not in ("PL", "FL"):
            raise ValueError(f"transfer_mode must be 'PL' or 'FL', got {self.transfer_mode!r}")


@dataclass(frozen=True)
class LearnerProfile:
    """Per-learner compute, radio and energy budget figures."""

    id: int
    cpu_freq_hz: float
    tx_power_w: float
    channel_gain: float
    energy_cap_j: float

    def __post_init__(self):
        for name in ("cpu_freq_hz", "tx_power_w", "channel_gain", "energy_cap_j"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")


@dataclass(frozen=True)
class CostCoeffs:
    """Quadratic time/energy coefficients of one learner.

    c2 [s/(sample*update)], c1 [s/sample], c0 [s];
    g2 [J/(sample*update)], g1 [J/sample], g0 [J].
    """

    c2: float
    c1: float
    c0: float
    g2: float
    g1: float
    g0: float


def achievable_rate(profile: LearnerProfile, sys: SystemParams) -> float:
    """Uplink/downlink rate in bits/s.

    The SNR uses total in-band noise power N0*W so units stay consistent
    when the noise figure is a spectral density.
    """
    noise_w = sys.noise_density_w_per_hz * sys.bandwidth_hz
    snr = profile.tx_power_w * profile.channel_gain / noise_w
    return sys.bandwidth_hz * math.log2(1.0 + snr)


def time_coeffs(profile: LearnerProfile, sys: SystemParams) -> tuple[float, float, float]:
    """(c2, c1, c0): compute slope, per-sample transfer, fixed model exchange.

    The per-sample data shipment term in c1 only exists when the
    orchestrator sends batches ("PL" mode).
    """
    rate = achievable_rate(profile, sys)
    c2 = sys.model_complexity / profile.cpu_freq_hz
    data_term = sys.feature_count * sys.precision_data_bits if sys.transfer_mode == "PL" else 0.0
    c1 = (data_term + 2.0 * sys.precision_model_bits * sys.data_model_factor) / rate
    c0 = 2.0 * sys.precision_model_bits * sys.model_size / rate
    return c2, c1, c0


def energy_coeffs(profile: LearnerProfile, sys: SystemParams) -> tuple[float, float, float]:
    """(g2, g1, g0): compute energy slope and report-back radio energy."""
    rate = achievable_rate(profile, sys)
    g2 = (
        sys.chip_capacitance
        * sys.model_complexity
        * profile.cpu_freq_hz ** (sys.compute_exponent - 1.0)
    )
    g1 = profile.tx_power_w * sys.precision_model_bits * sys.data_model_factor / rate
    g0 = profile.tx_power_w * sys.precision_model_bits * sys.model_size / rate
    return g2, g1, g0


def cost_coeffs(profile: LearnerProfile, sys: SystemParams) -> CostCoeffs:
    """Bundle time and energy coefficients for one learner."""
    c2, c1, c0 = time_coeffs(profile, sys)
    g2, g1, g0 = energy_coeffs(profile, sys)
    return CostCoeffs(c2=c2, c1=c1, c0=c0, g2=g2, g1=g1, g0=g0)


def predict_time(coeffs: CostCoeffs, tau: float, d: float) -> float:
    """Wall time of one global cycle for (tau updates, d samples)."""
    if tau < 0 or d < 0:
        raise ValueError("tau and d must be nonnegative")
    return coeffs.c2 * tau * d + coeffs.c1 * d + coeffs.c0


def predict_energy(coeffs: CostCoeffs, tau: float, d: float) -> float:
    """Energy drawn by the learner over one global cycle."""
    if tau < 0 or d < 0:
        raise ValueError("tau and d must be nonnegative")
    return coeffs.g2 * tau * d + coeffs.g1 * d + coeffs.g0
