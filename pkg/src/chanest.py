"""Analytic MSE of separable time-frequency-space Wiener channel estimation.

The channel on a K x L_sym x M grid has covariance R_s (x) R_t (x) R_f and is
observed with noise on the DMRS pilots only. Grids are flattened with the
subcarrier index fastest, then symbol, then antenna.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd
from scipy.linalg import cho_solve
from scipy.special import j0

from .channel import gen_pdp
from .config import (
    CSV_FLOAT_FORMAT,
    DIRECT_MSE_MAX_DIM,
    DMRS_SYMBOL,
    ENSEMBLE_PDP_DRAWS,
    MAX_DMRS_USERS,
    MSE_SNR_GRID_DB,
    SLOT_SYMBOLS,
)
from .errors import DimensionError, ParameterError
from .hermitian import cholesky_with_ridge, require_square
from .models import SystemConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PilotPattern:
    """Per-user pilot positions on the K x L_sym grid, replicated over all antennas.

    Each user's set is the product `symbols` x `subcarriers[u]`.
    """

    n_subcarriers: int
    n_symbols: int
    n_antennas: int
    symbols: np.ndarray
    subcarriers: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if np.any((self.symbols < 0) | (self.symbols >= self.n_symbols)):
            raise DimensionError(f"pilot symbols {self.symbols.tolist()} outside 0..{self.n_symbols - 1}")
        seen: set[int] = set()
        for u, sc in enumerate(self.subcarriers):
            if np.any((sc < 0) | (sc >= self.n_subcarriers)):
                raise DimensionError(f"user {u} pilot subcarriers outside 0..{self.n_subcarriers - 1}")
            overlap = seen.intersection(sc.tolist())
            if overlap:
                raise ParameterError(f"user {u} pilots overlap another user on subcarriers {sorted(overlap)}")
            seen.update(sc.tolist())

    @property
    def users(self) -> int:
        return len(self.subcarriers)

    @property
    def size(self) -> int:
        return self.n_subcarriers * self.n_symbols * self.n_antennas

    def flat_index(self, user: int) -> np.ndarray:
        """Flattened pilot positions of `user` over the full K x L_sym x M grid."""

        s = np.arange(self.n_antennas)[:, None, None]
        t = self.symbols[None, :, None]
        f = self.subcarriers[user][None, None, :]
        return ((s * self.n_symbols + t) * self.n_subcarriers + f).ravel()

    def grid_mask(self, user: int) -> np.ndarray:
        """Boolean (L_sym, K) mask of the user's pilot resource elements."""

        mask = np.zeros((self.n_symbols, self.n_subcarriers), dtype=bool)
        mask[np.ix_(self.symbols, self.subcarriers[user])] = True
        return mask


@dataclass(frozen=True)
class SeparableCovariance:
    """Kronecker factors of the channel covariance and of the pilot noise covariance."""

    r_s: np.ndarray
    r_t: np.ndarray
    r_f: np.ndarray
    n_s: np.ndarray
    n_t: np.ndarray
    n_f: np.ndarray

    def __post_init__(self) -> None:
        for name in ("r_s", "r_t", "r_f"):
            require_square(getattr(self, name), name)
        require_square(self.n_s, "n_s", self.r_s.shape[0])
        require_square(self.n_t, "n_t", self.r_t.shape[0])
        require_square(self.n_f, "n_f", self.r_f.shape[0])

    @property
    def dims(self) -> tuple[int, int, int]:
        """(M, L_sym, K)"""
        return self.r_s.shape[0], self.r_t.shape[0], self.r_f.shape[0]

    def full(self) -> tuple[np.ndarray, np.ndarray]:
        """Materialized (R_hh, R_nn); test-scale grids only."""

        r_hh = np.kron(self.r_s, np.kron(self.r_t, self.r_f))
        r_nn = np.kron(self.n_s, np.kron(self.n_t, self.n_f))
        return r_hh, r_nn


@dataclass(frozen=True)
class WienerFilters:
    a_s: np.ndarray
    a_t: np.ndarray
    a_f: np.ndarray

    def full(self) -> np.ndarray:
        return np.kron(self.a_s, np.kron(self.a_t, self.a_f))


def time_corr(doppler_norm: float, n_symbols: int) -> np.ndarray:
    """Jakes time correlation J0(2 pi f_D T_sym (l1 - l2)) between OFDM symbols."""

    if doppler_norm < 0:
        raise ParameterError(f"doppler_norm must be nonnegative, got {doppler_norm}")
    lag = np.subtract.outer(np.arange(n_symbols), np.arange(n_symbols))
    return j0(2.0 * np.pi * doppler_norm * lag).astype(complex)


def freq_corr(pdp: np.ndarray, n_subcarriers: int) -> np.ndarray:
    """R_f = W Diag(pdp) W^H with W the first L columns of the K-point DFT matrix."""

    pdp = np.asarray(pdp, dtype=float)
    if n_subcarriers < len(pdp):
        raise ParameterError(f"{n_subcarriers} subcarriers cannot resolve a {len(pdp)}-tap profile")
    w = np.exp(-2j * np.pi * np.outer(np.arange(n_subcarriers), np.arange(len(pdp))) / n_subcarriers)
    return (w * pdp) @ w.conj().T


def spatial_corr(n_antennas: int, mode: str = "DBF") -> np.ndarray:
    """Half-wavelength ULA correlation J0(pi (m1 - m2)); identity after HBF combining."""

    if n_antennas < 1:
        raise ParameterError(f"n_antennas must be >= 1, got {n_antennas}")
    if mode == "HBF":
        return np.eye(n_antennas, dtype=complex)
    lag = np.subtract.outer(np.arange(n_antennas), np.arange(n_antennas))
    return j0(np.pi * lag).astype(complex)


def model_pdp(max_delay: int, beta: float, delay_spread_mismatch: float = 1.0) -> np.ndarray:
    """Exponential profile over every delay, as assumed by the estimator.

    A mismatch factor above 1 stretches the assumed delay spread.
    """

    if delay_spread_mismatch <= 0:
        raise ParameterError(f"delay_spread_mismatch must be positive, got {delay_spread_mismatch}")
    raw = np.exp(-(beta / delay_spread_mismatch) * np.arange(max_delay))
    return raw / raw.sum()


def ensemble_pdp(
    max_delay: int, taps: int, beta: float, draws: int = ENSEMBLE_PDP_DRAWS, seed: int = 0
) -> np.ndarray:
    """Average of `draws` random-tap profiles; the true frequency covariance comes from this."""

    rng = np.random.default_rng(seed)
    total = np.zeros(max_delay)
    for _ in range(draws):
        total += gen_pdp(max_delay, taps, beta, rng)
    return total / draws


def wiener_matrix(r: np.ndarray, noise_var: float, pilots: np.ndarray | None = None) -> np.ndarray:
    """MMSE interpolator from the pilot positions to every position of one dimension.

    A[:, P] = R[:, P] (R[P, P] + noise_var I)^-1, zero columns elsewhere. With
    `pilots` omitted every position is observed (smoothing only).
    """

    require_square(r, "R")
    if noise_var < 0:
        raise ParameterError(f"noise_var must be nonnegative, got {noise_var}")
    n = r.shape[0]
    p = np.arange(n) if pilots is None else np.asarray(pilots, dtype=int)
    a = np.zeros((n, n), dtype=complex)
    if p.size == 0:
        return a

    system = r[np.ix_(p, p)] + noise_var * np.eye(p.size)
    chol = cholesky_with_ridge(system, "pilot covariance")
    # system is Hermitian: R[:, P] S^-1 = (S^-1 R[P, :])^H
    a[:, p] = cho_solve((chol, True), r[p, :]).conj().T
    return a


def dmrs_pattern(users: int, n_subcarriers: int, n_symbols: int, n_antennas: int = 1) -> PilotPattern:
    """Type-1 front-loaded DMRS for up to four users.

    One DMRS symbol per 14-symbol slot. Users 0 and 1 use the even comb, users
    2 and 3 the odd comb; when two users share a comb their orthogonal cover
    code is resolved as alternating subcarrier pairs, leaving every 4th
    subcarrier per user.
    """

    if not 1 <= users <= MAX_DMRS_USERS:
        raise ParameterError(f"DMRS type 1 supports 1..{MAX_DMRS_USERS} users, got {users}")
    if n_subcarriers % 2:
        raise ParameterError(f"DMRS comb needs an even number of subcarriers, got {n_subcarriers}")

    symbols = np.arange(DMRS_SYMBOL, n_symbols, SLOT_SYMBOLS)
    if symbols.size == 0:
        raise ParameterError(f"{n_symbols} symbols do not reach the DMRS symbol {DMRS_SYMBOL}")

    per_comb = np.bincount([u // 2 for u in range(users)], minlength=2)
    subcarriers = []
    for u in range(users):
        comb = u // 2
        if per_comb[comb] > 1:
            sc = np.arange(comb + 2 * (u % 2), n_subcarriers, 4)
        else:
            # a comb with a single user has no cover code to despread and keeps every 2nd subcarrier
            sc = np.arange(comb, n_subcarriers, 2)
        if sc.size == 0:
            raise ParameterError(f"user {u} gets no pilot subcarrier with K={n_subcarriers}")
        subcarriers.append(sc)

    return PilotPattern(
        n_subcarriers=n_subcarriers,
        n_symbols=n_symbols,
        n_antennas=n_antennas,
        symbols=symbols,
        subcarriers=tuple(subcarriers),
    )


def design_filters(
    model: SeparableCovariance,
    noise_var: float,
    pattern: PilotPattern,
    user: int,
    spatial_smoothing: bool = False,
) -> WienerFilters:
    """Per-dimension Wiener filters for one user.

    The pilot noise is handled by the frequency filter; the time filter only
    interpolates between DMRS symbols. A_s defaults to the identity (R_s R_s^-1,
    no smoothing across antennas); with `spatial_smoothing` it is
    R_s (R_s + noise_var I)^-1.
    """

    a_f = wiener_matrix(model.r_f, noise_var, pattern.subcarriers[user])
    a_t = wiener_matrix(model.r_t, 0.0, pattern.symbols)
    a_s = wiener_matrix(model.r_s, noise_var if spatial_smoothing else 0.0)
    return WienerFilters(a_s=a_s, a_t=a_t, a_f=a_f)


def _check_grid(filters: WienerFilters, cov: SeparableCovariance, pattern: PilotPattern) -> None:
    m, l_sym, k = cov.dims
    if (pattern.n_antennas, pattern.n_symbols, pattern.n_subcarriers) != (m, l_sym, k):
        raise DimensionError(
            f"pattern grid {(pattern.n_antennas, pattern.n_symbols, pattern.n_subcarriers)} "
            f"does not match covariance grid {(m, l_sym, k)}"
        )
    for name, a, n in (("A_s", filters.a_s, m), ("A_t", filters.a_t, l_sym), ("A_f", filters.a_f, k)):
        require_square(a, name, n)


def analytic_mse_kron(
    filters: WienerFilters, cov: SeparableCovariance, pattern: PilotPattern, user: int = 0
) -> float:
    """Normalized estimation MSE evaluated factor by factor.

    MSE = (C1 - 2 Re C2 + C3) / (K L_sym M) where C1 is the filtered signal
    plus noise power, C2 the cross term and C3 = tr R_hh. Each term is a
    product of per-dimension sums over the pilot index pairs.
    """

    _check_grid(filters, cov, pattern)
    pilots = (np.arange(pattern.n_antennas), pattern.symbols, pattern.subcarriers[user])
    filt = (filters.a_s, filters.a_t, filters.a_f)
    signal = (cov.r_s, cov.r_t, cov.r_f)
    noise = (cov.n_s, cov.n_t, cov.n_f)

    def hadamard_sum(r: np.ndarray, a: np.ndarray, p: np.ndarray) -> complex:
        ap = a[:, p]
        return complex(np.sum(r[np.ix_(p, p)] * (ap.conj().T @ ap).T))

    c1 = np.prod([hadamard_sum(r, a, p) for r, a, p in zip(signal, filt, pilots)])
    c1 += np.prod([hadamard_sum(n, a, p) for n, a, p in zip(noise, filt, pilots)])
    c2 = np.prod([np.trace(a[:, p] @ r[p, :]) for r, a, p in zip(signal, filt, pilots)])
    c3 = np.prod([np.trace(r) for r in signal])

    return float(np.real(c1 - 2.0 * np.real(c2) + c3)) / pattern.size


def analytic_mse_direct(a_stf: np.ndarray, r_hh: np.ndarray, r_nn: np.ndarray, pilots: np.ndarray) -> float:
    """Same MSE from the materialized matrices; refuses grids above DIRECT_MSE_MAX_DIM."""

    n = r_hh.shape[0]
    if n > DIRECT_MSE_MAX_DIM:
        raise ParameterError(f"grid of {n} elements exceeds the direct evaluation cap {DIRECT_MSE_MAX_DIM}")
    require_square(r_hh, "R_hh")
    require_square(r_nn, "R_nn", n)
    require_square(a_stf, "A_stf", n)

    p = np.asarray(pilots, dtype=int)
    ap = a_stf[:, p]
    c1 = np.trace(ap @ (r_hh[np.ix_(p, p)] + r_nn[np.ix_(p, p)]) @ ap.conj().T)
    c2 = np.trace(ap @ r_hh[p, :])
    c3 = np.trace(r_hh)
    return float(np.real(c1 - 2.0 * np.real(c2) + c3)) / n


def estimation_grid(cfg: SystemConfig) -> tuple[int, int, int]:
    """(K, L_sym, M) of the estimation problem; M counts effective channels after combining."""

    m = cfg.rf_chains if cfg.mode == "HBF" else cfg.rx_antennas
    return cfg.n_bins, cfg.ofdm_symbols, m


def true_covariance(cfg: SystemConfig, noise_var: float) -> SeparableCovariance:
    k, l_sym, m = estimation_grid(cfg)
    return SeparableCovariance(
        r_s=spatial_corr(m, cfg.mode),
        r_t=time_corr(cfg.doppler_norm, l_sym),
        r_f=freq_corr(ensemble_pdp(cfg.max_delay, cfg.taps, cfg.pdp_decay), k),
        n_s=np.eye(m),
        n_t=np.eye(l_sym),
        n_f=noise_var * np.eye(k),
    )


def model_covariance(cfg: SystemConfig, noise_var: float) -> SeparableCovariance:
    """Covariance the estimator believes in, including the configured mismatch."""

    k, l_sym, m = estimation_grid(cfg)
    return SeparableCovariance(
        r_s=spatial_corr(m, cfg.mode),
        r_t=time_corr(cfg.doppler_norm * cfg.doppler_mismatch, l_sym),
        r_f=freq_corr(model_pdp(cfg.max_delay, cfg.pdp_decay, cfg.delay_spread_mismatch), k),
        n_s=np.eye(m),
        n_t=np.eye(l_sym),
        n_f=noise_var * np.eye(k),
    )


@dataclass(frozen=True)
class MseTable:
    """Channel-estimation MSE against per-antenna SNR, linear in dB between grid points."""

    snr_db: np.ndarray
    mse: np.ndarray

    def __post_init__(self) -> None:
        if self.snr_db.ndim != 1 or self.snr_db.shape != self.mse.shape or self.snr_db.size < 2:
            raise DimensionError(f"MSE table needs matching 1-D grids of >= 2 points, got {self.snr_db.shape}, {self.mse.shape}")
        if np.any(np.diff(self.snr_db) <= 0):
            raise ParameterError("MSE table SNR grid must be strictly increasing")
        if np.any(self.mse <= 0):
            raise ParameterError("MSE table entries must be positive")

    def lookup(self, snr_db: float | np.ndarray) -> np.ndarray:
        """Interpolated MSE; SNRs outside the grid take the end value."""

        s = np.asarray(snr_db, dtype=float)
        # -inf SNR means a silent user; the low end of the table is the closest estimate
        s = np.where(np.isneginf(s), self.snr_db[0], s)
        return np.interp(s, self.snr_db, self.mse)

    __call__ = lookup

    def snr_degradation(self) -> np.ndarray:
        """Effective-SNR loss factor 1 + sigma^2 gamma of a single-antenna link."""

        return 1.0 + self.mse * 10.0 ** (self.snr_db / 10.0)

    def to_csv(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame({"snr_db": self.snr_db, "mse": self.mse}).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)

    @classmethod
    def from_csv(cls, path: Path) -> "MseTable":
        df = pd.read_csv(path)
        missing = {"snr_db", "mse"} - set(df.columns)
        if missing:
            raise ParameterError(f"{path} is missing column(s) {sorted(missing)}")
        return cls(snr_db=df["snr_db"].to_numpy(dtype=float), mse=df["mse"].to_numpy(dtype=float))


def _mse_at(cfg: SystemConfig, snr_db: float, pattern: PilotPattern, truth_signal: SeparableCovariance) -> float:
    noise_var = 10.0 ** (-snr_db / 10.0)
    model = model_covariance(cfg, noise_var)
    truth = SeparableCovariance(
        r_s=truth_signal.r_s,
        r_t=truth_signal.r_t,
        r_f=truth_signal.r_f,
        n_s=truth_signal.n_s,
        n_t=truth_signal.n_t,
        n_f=noise_var * np.eye(truth_signal.r_f.shape[0]),
    )
    values = [
        analytic_mse_kron(design_filters(model, noise_var, pattern, u, cfg.spatial_smoothing), truth, pattern, u)
        for u in range(pattern.users)
    ]
    return float(np.mean(values))


def build_mse_table(
    cfg: SystemConfig, snr_grid_db: Sequence[float] = MSE_SNR_GRID_DB, threads: int = 1
) -> MseTable:
    """Tabulate the estimation MSE over an SNR grid, averaged over the DMRS users."""

    grid = np.asarray(snr_grid_db, dtype=float)
    if grid[0] > MSE_SNR_GRID_DB[0] or grid[-1] < MSE_SNR_GRID_DB[-1]:
        logger.warning(
            "MSE grid [%g, %g] dB is narrower than [%g, %g] dB; lookups outside it are clamped",
            grid[0],
            grid[-1],
            MSE_SNR_GRID_DB[0],
            MSE_SNR_GRID_DB[-1],
        )

    k, l_sym, m = estimation_grid(cfg)
    pattern = dmrs_pattern(cfg.users, k, l_sym, m)
    truth = true_covariance(cfg, 1.0)
    logger.info("building MSE table: %d SNR points, grid K=%d L=%d M=%d, %d user(s)", len(grid), k, l_sym, m, cfg.users)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            mse = list(pool.map(lambda s: _mse_at(cfg, s, pattern, truth), grid))
    else:
        mse = [_mse_at(cfg, s, pattern, truth) for s in grid]

    mse = np.asarray(mse)
    if np.any(np.diff(mse) >= 0):
        logger.warning("MSE is not strictly decreasing over the SNR grid (model mismatch?)")
    return MseTable(snr_db=grid, mse=mse)


def est_error_cov(h_freq: np.ndarray, sigma2: np.ndarray) -> np.ndarray:
    """Spatially white estimation-error covariance per bin.

    R_ww[f] = sum_k Diag(|h_k[f]|^2) sigma2_k over the columns k of `h_freq`
    (N_f, M, K); returns (N_f, M, M).
    """

    if h_freq.ndim != 3:
        raise DimensionError(f"h_freq must be (N_f, M, K), got shape {h_freq.shape}")
    sigma2 = np.asarray(sigma2, dtype=float)
    if sigma2.shape != (h_freq.shape[2],):
        raise DimensionError(f"need one sigma^2 per channel column ({h_freq.shape[2]}), got {sigma2.shape}")
    if np.any(sigma2 < 0):
        raise ParameterError("estimation MSE must be nonnegative")

    diag = np.einsum("fmk,k->fm", np.abs(h_freq) ** 2, sigma2)
    n_bins, m = diag.shape
    out = np.zeros((n_bins, m, m), dtype=complex)
    out[:, np.arange(m), np.arange(m)] = diag
    return out
