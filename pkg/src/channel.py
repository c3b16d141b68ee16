from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, NumericalError, ParameterError
from .hermitian import hermitian_part, require_square
from .models import SystemConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ChannelRealization:
    """One multiuser multipath draw.

    Tap records are indexed (user, tap); `taps` is the dense per-delay matrix
    H_u[l] with shape (U, L, M_R, M_T) and `pdp` the (U, L) variance profile.
    """

    delays: np.ndarray
    gains: np.ndarray
    phi_r: np.ndarray
    phi_t: np.ndarray
    taps: np.ndarray
    pdp: np.ndarray

    @property
    def users(self) -> int:
        return self.taps.shape[0]

    @property
    def max_delay(self) -> int:
        return self.taps.shape[1]

    @property
    def rx_antennas(self) -> int:
        return self.taps.shape[2]

    @property
    def tx_antennas(self) -> int:
        return self.taps.shape[3]

    def energy(self) -> np.ndarray:
        """Sum over delays of ||H_u[l]||_F^2 for each user."""

        return np.sum(np.abs(self.taps) ** 2, axis=(1, 2, 3))

    def stacked(self) -> np.ndarray:
        """Combined channel of all users, shape (L, M_R, U * M_T)."""

        u, l, m, t = self.taps.shape
        return np.transpose(self.taps, (1, 2, 0, 3)).reshape(l, m, u * t)


def _draw_pdp(max_delay: int, taps: int, beta: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    if not 1 <= taps <= max_delay:
        raise ParameterError(f"need 1 <= P <= L, got P={taps}, L={max_delay}")
    if beta < 0:
        raise ParameterError(f"PDP decay must be nonnegative, got {beta}")

    # Delay 0 always carries the first arrival.
    others = rng.choice(np.arange(1, max_delay), size=taps - 1, replace=False) if taps > 1 else np.empty(0, int)
    delays = np.sort(np.concatenate(([0], others))).astype(int)

    raw = np.exp(-beta * delays)
    pdp = np.zeros(max_delay)
    pdp[delays] = raw / raw.sum()
    return delays, pdp


def gen_pdp(max_delay: int, taps: int, beta: float, rng: np.random.Generator) -> np.ndarray:
    """Exponential power delay profile on a random subset of `taps` delays.

    Returns the length-L variance vector, normalized to unit sum.
    """

    _, pdp = _draw_pdp(max_delay, taps, beta, rng)
    return pdp


def steering_vector(phi: float, m: int) -> np.ndarray:
    """ULA response [1, e^{j phi}, ..., e^{j (m-1) phi}]."""

    if m < 1:
        raise ParameterError(f"array size must be >= 1, got {m}")
    return np.exp(1j * phi * np.arange(m))


def sample_channel(cfg: SystemConfig, rng: np.random.Generator) -> ChannelRealization:
    u_count, max_delay, taps = cfg.users, cfg.max_delay, cfg.taps
    m_r, m_t = cfg.rx_antennas, cfg.tx_antennas

    dense = np.zeros((u_count, max_delay, m_r, m_t), dtype=complex)
    pdp = np.zeros((u_count, max_delay))
    delays = np.zeros((u_count, taps), dtype=int)
    gains = np.zeros((u_count, taps), dtype=complex)
    phi_r = np.zeros((u_count, taps))
    phi_t = np.zeros((u_count, taps))

    for u in range(u_count):
        d, v = _draw_pdp(max_delay, taps, cfg.pdp_decay, rng)
        alpha = np.sqrt(v[d] / 2.0) * (rng.standard_normal(taps) + 1j * rng.standard_normal(taps))
        # phi = pi sin(theta), theta uniform over the full circle
        pr = np.pi * np.sin(rng.uniform(-np.pi, np.pi, taps))
        pt = np.pi * np.sin(rng.uniform(-np.pi, np.pi, taps))

        a_r = np.exp(1j * np.outer(pr, np.arange(m_r)))
        a_t = np.exp(1j * np.outer(pt, np.arange(m_t)))
        dense[u, d] = (alpha / np.sqrt(m_t))[:, None, None] * a_r[:, :, None] * a_t[:, None, :]

        pdp[u], delays[u], gains[u], phi_r[u], phi_t[u] = v, d, alpha, pr, pt

    return ChannelRealization(delays=delays, gains=gains, phi_r=phi_r, phi_t=phi_t, taps=dense, pdp=pdp)


def to_frequency(taps: np.ndarray, n_bins: int, axis: int = 0) -> np.ndarray:
    """Zero-padded N_f-point DFT of a tap sequence along `axis`.

    Unnormalized, so (1/N_f) sum_f ||H[f]||^2 = sum_l ||H[l]||^2.
    """

    length = taps.shape[axis]
    if n_bins < length:
        raise ParameterError(f"n_bins ({n_bins}) must be at least the channel length ({length})")
    return np.fft.fft(taps, n=n_bins, axis=axis)


def snr_to_power(cfg: SystemConfig, realization: ChannelRealization) -> np.ndarray:
    """Transmit power P_u per user that realizes the configured per-antenna SNR.

    Noise is unit variance per receive antenna and symbols are unit variance,
    so gamma_u = P_u * sum_l ||H_u[l]||_F^2 / M_R.
    """

    gamma = np.asarray(cfg.snr_linear_per_user, dtype=float)
    if cfg.snr_scaling == "ensemble":
        # The ensemble average of sum_l ||H_u[l]||_F^2 is M_R.
        return gamma.copy()

    energy = realization.energy()
    if np.any(energy <= 0.0):
        zero = [int(u) for u in np.flatnonzero(energy <= 0.0)]
        raise NumericalError(f"zero-energy channel for user(s) {zero}; cannot scale to the requested SNR")
    return gamma * realization.rx_antennas / energy


def transmit_covariances(cfg: SystemConfig, powers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symbol covariance R_xx and transmitter EVM covariance for the stacked users."""

    per_stream = np.repeat(np.asarray(powers, dtype=float), cfg.tx_antennas)
    r_xx = np.diag(per_stream).astype(complex)
    if cfg.evm_db is None:
        return r_xx, np.zeros_like(r_xx)
    return r_xx, r_xx * 10.0 ** (cfg.evm_db / 10.0)


def receive_cov(
    h_freq: np.ndarray,
    r_xx: np.ndarray,
    r_evm: np.ndarray,
    r_noise: np.ndarray,
    band: tuple[int, int] | None = None,
) -> np.ndarray:
    """Band-averaged receive covariance.

    R_yy = (1/N_b) sum_{f in band} H[f] (R_xx + R_evm) H[f]^H + R_noise, with
    `h_freq` shaped (N_f, M, K).
    """

    if h_freq.ndim != 3:
        raise DimensionError(f"h_freq must be (N_f, M, K), got shape {h_freq.shape}")
    n_bins, m, k = h_freq.shape
    require_square(r_xx, "R_xx", k)
    require_square(r_evm, "R_evm", k)
    require_square(r_noise, "R_noise", m)

    f1, f2 = (0, n_bins - 1) if band is None else band
    if not 0 <= f1 <= f2 < n_bins:
        raise DimensionError(f"band [{f1}, {f2}] outside 0..{n_bins - 1}")

    hb = h_freq[f1 : f2 + 1]
    source = r_xx + r_evm
    signal = np.einsum("fmk,kl,fnl->mn", hb, source, hb.conj()) / hb.shape[0]
    return hermitian_part(signal + r_noise)
