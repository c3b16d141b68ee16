"""End-to-end achievable sum rate of one channel realization.

Pipeline: transmit powers -> receive covariance over the band -> analog
combining -> quantization (Bussgang gain F and error covariance R_ee) ->
effective channel and noise -> channel-estimation error -> per-bin log-det.
"""

from __future__ import annotations

import logging
from itertools import combinations_with_replacement
from typing import Iterable

import numpy as np

from .beamforming import select_combiner
from .channel import ChannelRealization, receive_cov, snr_to_power, to_frequency, transmit_covariances
from .chanest import MseTable, est_error_cov
from .errors import DimensionError, ParameterError
from .hermitian import check_psd, hermitian_part, log2det_pd
from .models import RateResult, SystemConfig
from .quantization import (
    CorrelationMapCache,
    QuantizerSpec,
    ideal_quantizer,
    quant_error_cov,
    quantizer_for,
    transform_cov,
)

logger = logging.getLogger(__name__)


def _gain_vector(f: np.ndarray) -> np.ndarray:
    return np.diag(f) if np.ndim(f) == 2 else np.asarray(f, dtype=float)


def chain_quantizers(cfg: SystemConfig) -> list[QuantizerSpec]:
    """Quantizer of every RF chain, ideal when quantization is disabled."""

    if not cfg.quantize:
        return [ideal_quantizer()] * cfg.rf_chains
    return [quantizer_for(cfg.quantizer_family, b) for b in cfg.bits_per_chain]


def quantizer_pairs(configs: Iterable[SystemConfig]) -> list[tuple[QuantizerSpec, QuantizerSpec]]:
    """Every distinct quantizer pair the given configs will ask a CorrelationMapCache for."""

    pairs: dict[tuple, tuple[QuantizerSpec, QuantizerSpec]] = {}
    for cfg in configs:
        unique = {s.key: s for s in chain_quantizers(cfg) if not s.is_ideal}
        for a, b in combinations_with_replacement([unique[k] for k in sorted(unique)], 2):
            pairs.setdefault((a.key, b.key), (a, b))
    return [pairs[k] for k in sorted(pairs)]


def effective_channel(f: np.ndarray, w_r: np.ndarray, taps: np.ndarray, n_bins: int) -> np.ndarray:
    """H'[f] = DFT_l(F W_R^H H[l]); `taps` is (L, M_R, K), result (N_f, M_RFE, K)."""

    gains = _gain_vector(f)
    if taps.ndim != 3 or taps.shape[1] != w_r.shape[0] or w_r.shape[1] != gains.shape[0]:
        raise DimensionError(f"taps {taps.shape}, W_R {w_r.shape} and F ({gains.shape[0]}) do not chain")
    combined = gains[None, :, None] * np.einsum("mc,lmk->lck", w_r.conj(), taps)
    return to_frequency(combined, n_bins, axis=0)


def effective_noise_cov(f: np.ndarray, w_r: np.ndarray, r_noise: np.ndarray, r_ee: np.ndarray) -> np.ndarray:
    """R_n'n' = F W_R^H R_n W_R F^H + R_ee."""

    gains = _gain_vector(f)
    m_rfe = gains.shape[0]
    if w_r.shape[1] != m_rfe or r_noise.shape != (w_r.shape[0],) * 2 or r_ee.shape != (m_rfe, m_rfe):
        raise DimensionError(f"F ({m_rfe}), W_R {w_r.shape}, R {r_noise.shape}, R_ee {r_ee.shape} do not match")
    combined = w_r.conj().T @ r_noise @ w_r
    out = hermitian_part(gains[:, None] * combined * gains[None, :] + r_ee)
    check_psd(out, "R_n'n'")
    return out


def combined_error_cov(f: np.ndarray, w_r: np.ndarray, h_freq: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """Estimation-error covariance after combining and quantization, per bin.

    R_ww[f] is formed on the antenna-domain channel `h_freq` (N_f, M_R, K)
    and taken through the receiver as F W_R^H R_ww[f] W_R F^H.
    """

    gains = _gain_vector(f)
    if h_freq.ndim != 3 or h_freq.shape[1] != w_r.shape[0] or w_r.shape[1] != gains.shape[0]:
        raise DimensionError(f"H {h_freq.shape}, W_R {w_r.shape} and F ({gains.shape[0]}) do not chain")
    r_ww = est_error_cov(h_freq, sigma2)
    combined = np.einsum("mc,fmn,nd->fcd", w_r.conj(), r_ww, w_r)
    return gains[None, :, None] * combined * gains[None, None, :]


def per_bin_mutual_info(h: np.ndarray, r_xx: np.ndarray, r_noise: np.ndarray) -> float:
    """log2 det(I + R^-1 H R_xx H^H), evaluated as log2 det(R + H R_xx H^H) - log2 det R."""

    if h.ndim != 2 or r_xx.shape != (h.shape[1],) * 2 or r_noise.shape != (h.shape[0],) * 2:
        raise DimensionError(f"H {h.shape}, R_xx {r_xx.shape}, R {r_noise.shape} do not match")
    total = hermitian_part(r_noise + h @ r_xx @ h.conj().T)
    value = log2det_pd(total, "R + H R_xx H^H") - log2det_pd(r_noise, "noise covariance")
    return max(value, 0.0)


def sum_rate(
    cfg: SystemConfig,
    realization: ChannelRealization,
    mse_table: MseTable | None = None,
    maps: CorrelationMapCache | None = None,
) -> RateResult:
    if cfg.estimation_error and mse_table is None:
        raise ParameterError("estimation_error is enabled but no MSE table was given")
    if maps is None:
        maps = CorrelationMapCache(cfg.grid_threshold)

    m_r = cfg.rx_antennas
    band = cfg.band_bins
    noise = np.eye(m_r, dtype=complex)

    powers = snr_to_power(cfg, realization)
    taps = realization.stacked()
    h_freq = to_frequency(taps, cfg.n_bins)
    r_xx, r_evm = transmit_covariances(cfg, powers)

    r_yy = receive_cov(h_freq, r_xx, r_evm, noise, band)
    w_r, _ = select_combiner(cfg, realization)
    r_yc = hermitian_part(w_r.conj().T @ r_yy @ w_r)

    specs = chain_quantizers(cfg)
    gains = np.array([s.gain for s in specs])
    if all(s.is_ideal for s in specs):
        r_ee = np.zeros_like(r_yc)
    else:
        r_rr = transform_cov(r_yc, specs, maps)
        r_ee = quant_error_cov(r_rr, gains, r_yc)

    # thermal noise plus EVM seen through the channel, before combining
    r_eta = receive_cov(h_freq, np.zeros_like(r_xx), r_evm, noise, band)
    r_nn = effective_noise_cov(gains, w_r, r_eta, r_ee)

    h_eff = effective_channel(gains, w_r, taps, cfg.n_bins)
    f1, f2 = band
    h_band = h_eff[f1 : f2 + 1]

    if cfg.estimation_error:
        sigma2 = np.repeat(mse_table.lookup(cfg.snr_db_per_user), cfg.tx_antennas)
        scale = np.sqrt(np.repeat(powers, cfg.tx_antennas))
        h_ant = h_freq[f1 : f2 + 1] * scale[None, None, :]
        r_ww = combined_error_cov(gains, w_r, h_ant, sigma2)
    else:
        r_ww = np.zeros((h_band.shape[0],) + r_nn.shape, dtype=complex)

    per_bin = [per_bin_mutual_info(h_band[i], r_xx, r_nn + r_ww[i]) for i in range(h_band.shape[0])]
    rate = float(np.mean(per_bin))
    logger.debug("sum rate %.4f bit/s/Hz over %d bins (%s)", rate, len(per_bin), cfg.mode)
    return RateResult(sum_rate=rate, per_bin=per_bin, per_realization=[rate], mean=rate)
