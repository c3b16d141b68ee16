"""Helpers for complex Hermitian (covariance) matrices stored as numpy arrays."""

from __future__ import annotations

import logging

import numpy as np

from .config import HERMITIAN_RTOL, PSD_RTOL, RIDGE_SCALE
from .errors import DimensionError, NumericalError

__all__ = (
    "hermitian_part",
    "require_square",
    "check_hermitian",
    "check_psd",
    "cholesky_with_ridge",
    "log2det_pd",
)

logger = logging.getLogger(__name__)


def hermitian_part(a: np.ndarray) -> np.ndarray:
    """Return ``(a + a^H) / 2`` over the last two axes."""

    return 0.5 * (a + np.conj(np.swapaxes(a, -2, -1)))


def require_square(a: np.ndarray, name: str, n: int | None = None) -> None:
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be a square matrix, got shape {a.shape}")
    if n is not None and a.shape[0] != n:
        raise DimensionError(f"{name} must be {n}x{n}, got {a.shape[0]}x{a.shape[1]}")


def check_hermitian(a: np.ndarray, name: str, rtol: float = HERMITIAN_RTOL) -> None:
    require_square(a, name)
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    skew = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if skew > rtol * max(scale, np.finfo(float).tiny):
        raise NumericalError(f"{name} is not Hermitian (max |A - A^H| = {skew:.3e}, scale {scale:.3e})")


def check_psd(a: np.ndarray, name: str, rtol: float = PSD_RTOL) -> None:
    """Raise NumericalError when the smallest eigenvalue is below -rtol * trace."""

    require_square(a, name)
    if a.shape[0] == 0:
        return
    eig_min = float(np.linalg.eigvalsh(hermitian_part(a))[0])
    trace = float(np.real(np.trace(a)))
    if eig_min < -rtol * abs(trace):
        raise NumericalError(
            f"{name} is not positive semidefinite (min eigenvalue {eig_min:.3e}, trace {trace:.3e})"
        )


def cholesky_with_ridge(a: np.ndarray, name: str) -> np.ndarray:
    """Lower Cholesky factor of the Hermitian part of `a`.

    On failure a ridge of RIDGE_SCALE * trace is added once, with a warning.
    """

    sym = hermitian_part(a)
    try:
        return np.linalg.cholesky(sym)
    except np.linalg.LinAlgError:
        trace = float(np.real(np.trace(sym)))
        ridge = RIDGE_SCALE * max(abs(trace), 1.0)
        logger.warning("%s is singular; adding ridge %.3e before factorization", name, ridge)
        try:
            return np.linalg.cholesky(sym + ridge * np.eye(sym.shape[0]))
        except np.linalg.LinAlgError as e:
            raise NumericalError(f"{name} is not positive definite even after ridge {ridge:.3e}") from e


def log2det_pd(a: np.ndarray, name: str = "matrix") -> float:
    """log2 det of a Hermitian positive definite matrix via Cholesky."""

    chol = cholesky_with_ridge(a, name)
    return float(2.0 * np.sum(np.log2(np.real(np.diag(chol)))))
