from __future__ import annotations

import logging
from dataclasses import dataclass, fields
from fractions import Fraction

from .errors import ParameterError
from .models import PowerComponents, SystemConfig

logger = logging.getLogger(__name__)


def _exact(value: float) -> Fraction:
    # decimal string so 2.0 GHz or 0.3 mW stay exact
    return Fraction(str(value))


def _adc_uw(fom_uw_per_ghz: int, f_s_ghz: float, enob: float) -> Fraction:
    scale = Fraction(2) ** int(enob) if float(enob).is_integer() else Fraction(2.0**enob)
    return fom_uw_per_ghz * _exact(f_s_ghz) * scale


def adc_power(f_s_ghz: float, enob: float, fom_uw_per_ghz: int = PowerComponents().adc_fom_uw_per_ghz) -> float:
    """ADC power in mW: fom * f_s * 2^ENOB."""

    if f_s_ghz < 0:
        raise ParameterError(f"sampling rate must be nonnegative, got {f_s_ghz}")
    return float(_adc_uw(fom_uw_per_ghz, f_s_ghz, enob) / 1000)


@dataclass(frozen=True)
class PowerBreakdown:
    """Receiver front-end power per component group, held exactly in microwatts."""

    lo: Fraction
    lna: Fraction
    hybrid: Fraction
    mixers: Fraction
    phase_shifters: Fraction
    vgas: Fraction
    las: Fraction
    one_bit: Fraction
    adcs: Fraction
    combining: bool
    one_bit_chains: int

    def parts(self) -> dict[str, Fraction]:
        return {f.name: getattr(self, f.name) for f in fields(self) if isinstance(getattr(self, f.name), Fraction)}

    @property
    def total_uw(self) -> Fraction:
        return sum(self.parts().values(), Fraction(0))

    @property
    def total_mw(self) -> float:
        return float(self.total_uw / 1000)

    @property
    def total_w(self) -> float:
        return float(self.total_uw / 1_000_000)

    def as_mw(self) -> dict[str, float]:
        out = {name: float(v / 1000) for name, v in self.parts().items()}
        out["total"] = self.total_mw
        return out


def frontend_power(cfg: SystemConfig) -> PowerBreakdown:
    """P_R of the configured receiver.

    Every antenna pays LNA, hybrid and two mixers; phase shifters appear only
    when M_C > 1. Each RF chain pays two limiting amplifiers and comparators
    at 1 bit, or two VGAs and two ADCs otherwise.
    """

    p = cfg.power
    m_r = cfg.rx_antennas
    combining = cfg.antennas_per_chain > 1
    bits = cfg.bits_per_chain

    one_bit_chains = sum(1 for b in bits if b == 1)
    multi = [b for b in bits if b > 1]

    breakdown = PowerBreakdown(
        lo=Fraction(p.lo_uw),
        lna=Fraction(m_r * p.lna_uw),
        hybrid=Fraction(m_r * p.hybrid_uw),
        mixers=Fraction(2 * m_r * p.mixer_uw),
        phase_shifters=Fraction(m_r * p.phase_shifter_uw if combining else 0),
        vgas=Fraction(2 * len(multi) * p.vga_uw),
        las=Fraction(2 * one_bit_chains * p.la_uw),
        one_bit=Fraction(2 * one_bit_chains * p.one_bit_uw),
        adcs=sum(
            (2 * _adc_uw(p.adc_fom_uw_per_ghz, cfg.sampling_rate_ghz, b + cfg.enob_offset) for b in multi),
            Fraction(0),
        ),
        combining=combining,
        one_bit_chains=one_bit_chains,
    )
    logger.debug("front-end power %.4f mW (%s)", breakdown.total_mw, cfg.mode)
    return breakdown


def energy_efficiency(rate_bpshz: float, p_r_mw: float) -> float:
    """Sum rate per watt of front-end power, in (bit/s/Hz)/W."""

    if p_r_mw <= 0:
        raise ParameterError(f"front-end power must be positive, got {p_r_mw} mW")
    return rate_bpshz / (p_r_mw / 1000.0)
