from __future__ import annotations

import hashlib
import math
from typing import List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .config import (
    ADC_FOM_UW_PER_GHZ,
    DEFAULT_DOPPLER_NORM,
    DEFAULT_EVM_DB,
    DEFAULT_GRID_THRESHOLD,
    DEFAULT_PDP_DECAY,
    DEFAULT_REALIZATIONS,
    DEFAULT_SAMPLING_RATE_GHZ,
    MAX_ADC_BITS,
    P_1_UW,
    P_H_UW,
    P_LA_UW,
    P_LNA_UW,
    P_LO_UW,
    P_M_UW,
    P_PS_UW,
    P_VGA_UW,
    SLOT_SYMBOLS,
)

Mode = Literal["DBF", "HBF", "DBF-mixed"]
QuantizerFamily = Literal["lloyd-max", "uniform"]


def mixed_adc_bits(rf_chains: int, high_count: int, high_bits: int, low_bits: int) -> list[int]:
    """Per-chain resolution list for a mixed-ADC bank, high-resolution chains first."""

    if not 0 <= high_count <= rf_chains:
        raise ValueError(f"high_count={high_count} must lie in 0..{rf_chains}")
    return [high_bits] * high_count + [low_bits] * (rf_chains - high_count)


class PowerComponents(BaseModel):
    """Receiver front-end component powers in integer microwatts."""

    model_config = ConfigDict(extra="forbid")

    lo_uw: int = Field(P_LO_UW, ge=0, description="Local oscillator, shared by the whole receiver")
    lna_uw: int = Field(P_LNA_UW, ge=0, description="Low-noise amplifier, one per antenna")
    mixer_uw: int = Field(P_M_UW, ge=0, description="Mixer, two per antenna (I and Q)")
    hybrid_uw: int = Field(P_H_UW, ge=0, description="90 degree hybrid and LO buffer, one per antenna")
    la_uw: int = Field(P_LA_UW, ge=0, description="Limiting amplifier replacing the VGA in 1-bit chains")
    one_bit_uw: int = Field(P_1_UW, ge=0, description="1-bit converter (comparator) power")
    phase_shifter_uw: int = Field(P_PS_UW, ge=0, description="Phase shifter, one per antenna when combining")
    vga_uw: int = Field(P_VGA_UW, ge=0, description="Variable-gain amplifier, two per multi-bit chain")
    adc_fom_uw_per_ghz: int = Field(
        ADC_FOM_UW_PER_GHZ,
        ge=0,
        description="ADC figure of merit; P_ADC = fom * f_s[GHz] * 2^ENOB microwatts",
    )


class MixedAdc(BaseModel):
    """Mixed-resolution converter bank: `high_count` chains at `high_bits`, the rest at `low_bits`."""

    model_config = ConfigDict(extra="forbid")

    high_count: int = Field(..., ge=0, description="Number of high-resolution chains (M_h)")
    high_bits: int = Field(..., ge=1, le=MAX_ADC_BITS, description="High resolution b_h")
    low_bits: int = Field(..., ge=1, le=MAX_ADC_BITS, description="Low resolution b_l")


class SystemConfig(BaseModel):
    """Full description of one simulated receiver/channel/SNR operating point."""

    model_config = ConfigDict(extra="forbid")

    rx_antennas: int = Field(64, ge=1, description="Receive antennas M_R")
    antennas_per_chain: int = Field(1, ge=1, description="Antennas per RF chain M_C")
    rf_chains: int = Field(64, ge=1, description="RF chains M_RFE; M_R = M_C * M_RFE")
    users: int = Field(4, ge=1, description="Number of users U")
    tx_antennas: int = Field(1, ge=1, description="Transmit antennas per user M_T")
    max_delay: int = Field(128, ge=1, description="Maximum channel length L in samples")
    taps: int = Field(32, ge=1, description="Nonzero channel taps P")
    pdp_decay: float = Field(DEFAULT_PDP_DECAY, gt=0, description="Exponential PDP decay beta per sample")
    snr_db: Union[float, List[float]] = Field(
        0.0, description="Per-antenna average SNR in dB; one value for all users or one per user"
    )
    snr_scaling: Literal["realization", "ensemble"] = Field(
        "realization", description="Scale transmit power on the realized channel or on its ensemble average"
    )
    evm_db: Optional[float] = Field(
        DEFAULT_EVM_DB, description="Transmitter EVM sigma_evm^2 / P_u in dB; null disables the impairment"
    )
    n_bins: int = Field(128, ge=1, description="Frequency bins N_f")
    band: Optional[Tuple[int, int]] = Field(
        None, description="Band of interest [f1_bin, f2_bin] inclusive; null means the full band"
    )
    sampling_rate_ghz: float = Field(DEFAULT_SAMPLING_RATE_GHZ, ge=0, description="ADC sampling rate f_s in GHz")
    adc_bits: Union[int, List[int]] = Field(
        4, description="ADC resolution: one value for every chain or a per-chain list of length M_RFE"
    )
    mixed: Optional[MixedAdc] = Field(None, description="Mixed-ADC bank; overrides adc_bits when given")
    quantize: bool = Field(True, description="false models infinite-resolution converters")
    quantizer_family: QuantizerFamily = Field("lloyd-max", description="Scalar quantizer design")
    grid_threshold: float = Field(
        DEFAULT_GRID_THRESHOLD, gt=0, lt=1, description="Max output-correlation step between map grid points"
    )
    mode: Mode = Field("DBF", description="DBF, HBF (sub-array hybrid) or DBF-mixed")
    realizations: int = Field(DEFAULT_REALIZATIONS, ge=1, description="Monte-Carlo channel draws")
    seed: int = Field(0, ge=0, description="Master RNG seed")
    estimation_error: bool = Field(True, description="Add channel-estimation error noise from the MSE table")
    doppler_norm: float = Field(DEFAULT_DOPPLER_NORM, ge=0, description="Normalized Doppler f_D * T_sym")
    ofdm_symbols: int = Field(SLOT_SYMBOLS, ge=1, description="OFDM symbols in the estimation grid")
    delay_spread_mismatch: float = Field(
        1.0, gt=0, description="Delay spread assumed by the Wiener filter relative to the true one"
    )
    doppler_mismatch: float = Field(1.0, ge=0, description="Doppler assumed by the Wiener filter relative to the true one")
    spatial_smoothing: bool = Field(False, description="Also smooth the pilot noise across antennas")
    enob_offset: float = Field(0.0, description="ENOB = bits + enob_offset in the ADC power model")
    power: PowerComponents = Field(default_factory=PowerComponents, description="Component power table")

    @model_validator(mode="after")
    def _check_invariants(self) -> "SystemConfig":
        problems: list[str] = []

        if self.rx_antennas != self.antennas_per_chain * self.rf_chains:
            problems.append(
                f"rx_antennas ({self.rx_antennas}) must equal antennas_per_chain * rf_chains "
                f"({self.antennas_per_chain} * {self.rf_chains} = {self.antennas_per_chain * self.rf_chains})"
            )
        if self.mode in ("DBF", "DBF-mixed") and self.antennas_per_chain != 1:
            problems.append(f"mode {self.mode} requires antennas_per_chain = 1, got {self.antennas_per_chain}")
        if self.mode == "HBF" and self.antennas_per_chain < 2:
            problems.append("mode HBF requires antennas_per_chain >= 2")
        if self.taps > self.max_delay:
            problems.append(f"taps ({self.taps}) must not exceed max_delay ({self.max_delay})")
        if self.n_bins < self.max_delay:
            problems.append(f"n_bins ({self.n_bins}) must be at least max_delay ({self.max_delay})")
        if isinstance(self.snr_db, list) and len(self.snr_db) != self.users:
            problems.append(f"snr_db lists one value per user: expected {self.users}, got {len(self.snr_db)}")
        if self.band is not None:
            f1, f2 = self.band
            if not 0 <= f1 <= f2 < self.n_bins:
                problems.append(f"band [{f1}, {f2}] must satisfy 0 <= f1_bin <= f2_bin < n_bins ({self.n_bins})")

        if self.mixed is not None:
            if self.mode != "DBF-mixed":
                problems.append(f"mixed is only valid with mode DBF-mixed, got {self.mode}")
            if self.mixed.high_count > self.rf_chains:
                problems.append(f"mixed.high_count ({self.mixed.high_count}) exceeds rf_chains ({self.rf_chains})")
            else:
                self.adc_bits = mixed_adc_bits(
                    self.rf_chains, self.mixed.high_count, self.mixed.high_bits, self.mixed.low_bits
                )
        if isinstance(self.adc_bits, int):
            self.adc_bits = [self.adc_bits] * self.rf_chains
        if len(self.adc_bits) != self.rf_chains:
            problems.append(f"adc_bits lists one value per RF chain: expected {self.rf_chains}, got {len(self.adc_bits)}")
        bad_bits = sorted({b for b in self.adc_bits if not 1 <= b <= MAX_ADC_BITS})
        if bad_bits:
            problems.append(f"adc_bits entries must lie in 1..{MAX_ADC_BITS}, got {bad_bits}")

        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def bits_per_chain(self) -> list[int]:
        assert isinstance(self.adc_bits, list)
        return list(self.adc_bits)

    @property
    def band_bins(self) -> tuple[int, int]:
        if self.band is None:
            return 0, self.n_bins - 1
        return self.band

    @property
    def snr_db_per_user(self) -> list[float]:
        if isinstance(self.snr_db, list):
            return list(self.snr_db)
        return [float(self.snr_db)] * self.users

    @property
    def snr_linear_per_user(self) -> list[float]:
        return [0.0 if math.isinf(s) and s < 0 else 10.0 ** (s / 10.0) for s in self.snr_db_per_user]

    def config_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


class SweepPlan(BaseModel):
    """Axes of an experiment; every expanded point is validated as a SystemConfig."""

    model_config = ConfigDict(extra="forbid")

    base: SystemConfig = Field(default_factory=SystemConfig, description="Shared settings for every point")
    snr_db: List[float] = Field(..., min_length=1, description="SNR axis in dB")
    modes: List[Mode] = Field(default_factory=lambda: ["DBF"], min_length=1, description="Architectures to run")
    bits: List[int] = Field(default_factory=lambda: list(range(1, 9)), description="Uniform resolutions")
    rf_chains: List[int] = Field(default_factory=lambda: [4, 8, 16, 32], description="M_RFE values for HBF")
    mixed_high_counts: List[int] = Field(default_factory=list, description="M_h values for DBF-mixed")
    mixed_high_bits: List[int] = Field(default_factory=lambda: [5], description="b_h values for DBF-mixed")
    mixed_low_bits: List[int] = Field(default_factory=lambda: [1, 2, 3, 4], description="b_l values for DBF-mixed")
    output_dir: Optional[str] = Field(None, description="Directory for CSVs and the manifest")

    def config_hash(self) -> str:
        return hashlib.sha256(self.model_dump_json().encode("utf-8")).hexdigest()


class RateResult(BaseModel):
    """Achievable sum rate of one realization, or the aggregate over several."""

    sum_rate: float = Field(..., ge=0, description="bits/s/Hz, mean over the band bins")
    per_bin: List[float] = Field(default_factory=list, description="Mutual information per band bin")
    per_realization: List[float] = Field(default_factory=list)
    mean: float = 0.0
    stderr: float = 0.0

    @classmethod
    def from_realizations(cls, results: List["RateResult"]) -> "RateResult":
        if not results:
            raise ValueError("at least one realization is required")
        values = [r.sum_rate for r in results]
        n = len(values)
        mean = math.fsum(values) / n
        if n > 1:
            var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
            stderr = math.sqrt(var / n)
        else:
            stderr = 0.0
        n_bins = len(results[0].per_bin)
        per_bin = [math.fsum(r.per_bin[k] for r in results) / n for k in range(n_bins)]
        return cls(sum_rate=mean, per_bin=per_bin, per_realization=values, mean=mean, stderr=stderr)


class SweepManifest(BaseModel):
    """Provenance record written next to the sweep CSVs."""

    seed: int
    config_hash: str
    plan: SweepPlan
    version: str
    threads: int
    points: int
    files: List[str]
    wall_time_s: float


class OracleCheck(BaseModel):
    """One row of the `verify` oracle suite."""

    name: str
    analytic: float
    estimate: float
    stderr: float
    tolerance: str
    passed: bool

    @property
    def emoji(self) -> str:
        return "✅" if self.passed else "❌"
