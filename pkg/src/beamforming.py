from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .channel import ChannelRealization, steering_vector
from .errors import DimensionError, ParameterError
from .models import Mode, SystemConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Codebook:
    """Phase-shifter codebook for one sub-array; combining applies w^H."""

    antennas_per_chain: int
    phases: np.ndarray
    vectors: np.ndarray  # (4 * M_C, M_C)

    def __len__(self) -> int:
        return len(self.phases)


@dataclass(frozen=True)
class BeamAllocation:
    """RF chain i serves user `user[i]` with codebook entry `beam[i]` (0-based)."""

    user: np.ndarray
    beam: np.ndarray
    power: np.ndarray  # (U, M_RFE)
    index: np.ndarray  # (U, M_RFE)
    order: tuple[int, ...]  # chains in the order they were picked

    def chain_counts(self, users: int) -> np.ndarray:
        return np.bincount(self.user, minlength=users)


def build_codebook(antennas_per_chain: int) -> Codebook:
    """4*M_C phases uniformly spaced over [-pi, pi)."""

    if antennas_per_chain < 1:
        raise ParameterError(f"antennas_per_chain must be >= 1, got {antennas_per_chain}")
    size = 4 * antennas_per_chain
    phases = -np.pi + np.arange(size) * (2.0 * np.pi / size)
    vectors = np.stack([steering_vector(phi, antennas_per_chain) for phi in phases])
    return Codebook(antennas_per_chain=antennas_per_chain, phases=phases, vectors=vectors)


def beam_power_table(
    realization: ChannelRealization, codebook: Codebook, cfg: SystemConfig
) -> tuple[np.ndarray, np.ndarray]:
    """Best received power and its codebook index for every (user, sub-array) pair.

    [P]_{u,i} = max_j sum_l ||w_j^H H_u^i[l]||^2, ties resolved to the lowest j.
    """

    m_c, m_rfe = cfg.antennas_per_chain, cfg.rf_chains
    if codebook.antennas_per_chain != m_c:
        raise DimensionError(f"codebook is for M_C={codebook.antennas_per_chain}, config has M_C={m_c}")
    u, l, m_r, m_t = realization.taps.shape
    if m_r != m_c * m_rfe:
        raise DimensionError(f"channel has {m_r} receive antennas, config expects {m_c * m_rfe}")

    sub = realization.taps.reshape(u, l, m_rfe, m_c, m_t)
    proj = np.einsum("jc,ulict->ujlit", codebook.vectors.conj(), sub)
    power = np.sum(np.abs(proj) ** 2, axis=(2, 4))  # (U, J, M_RFE)

    index = np.argmax(power, axis=1)
    best = np.take_along_axis(power, index[:, None, :], axis=1)[:, 0, :]
    return best, index


def allocate_beams(power: np.ndarray, index: np.ndarray, users: int, rf_chains: int) -> BeamAllocation:
    """Greedy resource-fair assignment of RF chains to users.

    Each pick takes the largest remaining entry over (remaining users x free
    chains); once every user has been served the user set is refilled.
    """

    if users < 1 or rf_chains < 1:
        raise ParameterError(f"need users >= 1 and rf_chains >= 1, got {users}, {rf_chains}")
    if power.shape != (users, rf_chains) or index.shape != (users, rf_chains):
        raise DimensionError(f"power/index tables must be {users}x{rf_chains}, got {power.shape}, {index.shape}")

    user_of = np.full(rf_chains, -1, dtype=int)
    beam_of = np.full(rf_chains, -1, dtype=int)
    open_users: list[int] = []
    free_chains = list(range(rf_chains))
    order: list[int] = []

    for _ in range(rf_chains):
        if not open_users:
            open_users = list(range(users))
        sub = power[np.ix_(open_users, free_chains)]
        # argmax over the row-major flattening: lowest user, then lowest chain on ties
        ui, ci = np.unravel_index(int(np.argmax(sub)), sub.shape)
        u, i = open_users[ui], free_chains[ci]

        user_of[i] = u
        beam_of[i] = index[u, i]
        order.append(i)
        open_users.remove(u)
        free_chains.remove(i)

    return BeamAllocation(user=user_of, beam=beam_of, power=power, index=index, order=tuple(order))


def assemble_combiner(
    mode: Mode,
    rx_antennas: int,
    allocation: BeamAllocation | None = None,
    codebook: Codebook | None = None,
) -> np.ndarray:
    """Analog combiner W_R (M_R x M_RFE); the identity for digital beamforming."""

    if mode != "HBF":
        return np.eye(rx_antennas, dtype=complex)

    if allocation is None or codebook is None:
        raise ParameterError("HBF combiner needs a beam allocation and a codebook")
    m_c = codebook.antennas_per_chain
    m_rfe = len(allocation.beam)
    if m_c * m_rfe != rx_antennas:
        raise DimensionError(f"{m_rfe} chains x {m_c} antennas does not cover {rx_antennas} antennas")

    w = np.zeros((rx_antennas, m_rfe), dtype=complex)
    for i, j in enumerate(allocation.beam):
        w[i * m_c : (i + 1) * m_c, i] = codebook.vectors[j]
    return w


def select_combiner(cfg: SystemConfig, realization: ChannelRealization) -> tuple[np.ndarray, BeamAllocation | None]:
    """Run beam selection for HBF configs and return (W_R, allocation)."""

    if cfg.mode != "HBF":
        return assemble_combiner(cfg.mode, cfg.rx_antennas), None

    codebook = build_codebook(cfg.antennas_per_chain)
    power, index = beam_power_table(realization, codebook, cfg)
    allocation = allocate_beams(power, index, cfg.users, cfg.rf_chains)
    logger.debug("beam allocation: users %s beams %s", allocation.user.tolist(), allocation.beam.tolist())
    return assemble_combiner(cfg.mode, cfg.rx_antennas, allocation, codebook), allocation
