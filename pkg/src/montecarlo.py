"""Sampling oracles for the analytic quantization and channel-estimation results.

Samples are drawn in batches of MC_BATCH_SIZE and reduced in batch order, so
an estimate depends only on the generator state and the sample count.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .chanest import PilotPattern, SeparableCovariance, WienerFilters
from .config import DIRECT_MSE_MAX_DIM, MC_BATCH_SIZE
from .errors import ParameterError
from .hermitian import check_psd, hermitian_part
from .quantization import QuantizerSpec, quantize_samples

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float

    def agrees_with(self, expected: float, sigmas: float = 3.0, floor: float = 0.0) -> bool:
        return abs(self.value - expected) <= sigmas * self.stderr + floor


def _batches(n_samples: int) -> list[int]:
    full, rest = divmod(n_samples, MC_BATCH_SIZE)
    return [MC_BATCH_SIZE] * full + ([rest] if rest else [])


def _mean_and_stderr(n_samples: int, draw: Callable[[int], np.ndarray]) -> Estimate:
    """Mean of i.i.d. real samples produced batch by batch with its standard error."""

    if n_samples < 2:
        raise ParameterError(f"need at least 2 samples, got {n_samples}")
    sums: list[float] = []
    squares: list[float] = []
    for size in _batches(n_samples):
        x = draw(size)
        sums.append(float(np.sum(x)))
        squares.append(float(np.sum(x * x)))
    mean = math.fsum(sums) / n_samples
    var = max(math.fsum(squares) / n_samples - mean * mean, 0.0) * n_samples / (n_samples - 1)
    return Estimate(value=mean, stderr=math.sqrt(var / n_samples))


def mc_output_corr(
    spec_a: QuantizerSpec, spec_b: QuantizerSpec, rho: float, n_samples: int, rng: np.random.Generator
) -> Estimate:
    """E[Q_A(a) Q_B(c)] for unit-variance real Gaussians with correlation `rho`."""

    if abs(rho) > 1:
        raise ParameterError(f"|rho| must not exceed 1, got {rho}")
    spread = math.sqrt(1.0 - rho * rho)

    def draw(size: int) -> np.ndarray:
        z = rng.standard_normal((2, size))
        a = z[0]
        c = rho * z[0] + spread * z[1]
        return quantize_samples(spec_a, a, 1.0) * quantize_samples(spec_b, c, 1.0)

    return _mean_and_stderr(n_samples, draw)


def mc_distortion(spec: QuantizerSpec, n_samples: int, rng: np.random.Generator) -> Estimate:
    """E[(x - Q(x))^2] for x ~ N(0, 1)."""

    def draw(size: int) -> np.ndarray:
        x = rng.standard_normal(size)
        return (x - quantize_samples(spec, x, 1.0)) ** 2

    return _mean_and_stderr(n_samples, draw)


def mc_bussgang(spec: QuantizerSpec, n_samples: int, rng: np.random.Generator) -> tuple[Estimate, Estimate]:
    """Bussgang gain of a complex unit-power input and the residual correlation |E[e y*]|.

    The residual uses the closed-form gain, e = Q(y) - spec.gain * y.
    """

    component = math.sqrt(0.5)

    def pair(size: int) -> tuple[np.ndarray, np.ndarray]:
        y = component * (rng.standard_normal(size) + 1j * rng.standard_normal(size))
        return y, quantize_samples(spec, y, component)

    gain_terms: list[float] = []
    gain_squares: list[float] = []
    power: list[float] = []
    resid_sum: list[complex] = []
    resid_sq: list[float] = []
    for size in _batches(n_samples):
        y, r = pair(size)
        g = np.real(r * y.conj())
        gain_terms.append(float(np.sum(g)))
        gain_squares.append(float(np.sum(g * g)))
        power.append(float(np.sum(np.abs(y) ** 2)))
        e = (r - spec.gain * y) * y.conj()
        resid_sum.append(complex(np.sum(e)))
        resid_sq.append(float(np.sum(np.abs(e) ** 2)))

    n = n_samples
    mean_power = math.fsum(power) / n
    g_mean = math.fsum(gain_terms) / n
    g_var = max(math.fsum(gain_squares) / n - g_mean * g_mean, 0.0)
    gain = Estimate(value=g_mean / mean_power, stderr=math.sqrt(g_var / n) / mean_power)

    r_mean = complex(math.fsum(z.real for z in resid_sum), math.fsum(z.imag for z in resid_sum)) / n
    r_var = max(math.fsum(resid_sq) / n - abs(r_mean) ** 2, 0.0)
    residual = Estimate(value=abs(r_mean), stderr=math.sqrt(r_var / n))
    return gain, residual


def mc_error_cov(
    r_yy: np.ndarray,
    specs: list[QuantizerSpec],
    gains: np.ndarray,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Sample quantization-error covariance E[e e^H] with e = Q(y) - F y, y ~ CN(0, R_yy).

    Returns (estimate, entrywise standard error of the complex mean).
    """

    check_psd(r_yy, "R_yy")
    n = r_yy.shape[0]
    vals, vecs = np.linalg.eigh(hermitian_part(r_yy))
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))
    agc = np.sqrt(np.real(np.diag(r_yy)) / 2.0)
    gains = np.asarray(gains, dtype=float)

    first = np.zeros((n, n), dtype=complex)
    second = np.zeros((n, n))
    for size in _batches(n_samples):
        z = math.sqrt(0.5) * (rng.standard_normal((n, size)) + 1j * rng.standard_normal((n, size)))
        y = root @ z
        r = np.stack([quantize_samples(specs[i], y[i], agc[i]) for i in range(n)])
        e = r - gains[:, None] * y
        outer = e[:, None, :] * e.conj()[None, :, :]
        first += outer.sum(axis=2)
        second += (np.abs(outer) ** 2).sum(axis=2)

    mean = first / n_samples
    var = np.clip(second / n_samples - np.abs(mean) ** 2, 0.0, None)
    return mean, np.sqrt(var / n_samples)


def _factor_root(r: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(hermitian_part(r))
    return vecs * np.sqrt(np.clip(vals, 0.0, None))


def mc_channel_est(
    filters: WienerFilters,
    cov: SeparableCovariance,
    pattern: PilotPattern,
    n_draws: int,
    rng: np.random.Generator,
    user: int = 0,
) -> Estimate:
    """Empirical normalized MSE of the separable Wiener estimator on a small grid."""

    m, l_sym, k = cov.dims
    if m * l_sym * k > DIRECT_MSE_MAX_DIM:
        raise ParameterError(f"grid {m}x{l_sym}x{k} is too large for sampling")

    signal = [_factor_root(r) for r in (cov.r_s, cov.r_t, cov.r_f)]
    noise = [_factor_root(r) for r in (cov.n_s, cov.n_t, cov.n_f)]
    mask = pattern.grid_mask(user)[None, :, :]

    def colour(roots: list[np.ndarray], size: int) -> np.ndarray:
        z = math.sqrt(0.5) * (
            rng.standard_normal((size, m, l_sym, k)) + 1j * rng.standard_normal((size, m, l_sym, k))
        )
        return np.einsum("ai,bj,ck,nijk->nabc", roots[0], roots[1], roots[2], z)

    def draw(size: int) -> np.ndarray:
        h = colour(signal, size)
        observed = np.where(mask, h + colour(noise, size), 0.0)
        h_hat = np.einsum("ai,bj,ck,nijk->nabc", filters.a_s, filters.a_t, filters.a_f, observed)
        return np.sum(np.abs(h_hat - h) ** 2, axis=(1, 2, 3)) / (m * l_sym * k)

    return _mean_and_stderr(n_draws, draw)
