"""Scalar quantizer design and covariance transforms through quantization.

Quantizers are designed for a zero-mean unit-variance real Gaussian input and
scaled per chain by an ideal AGC. Complex samples are quantized component-wise,
each component carrying half of the chain power.
"""

from __future__ import annotations

import logging
import threading
import warnings
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import pandas as pd
from scipy import integrate
from scipy.interpolate import CubicSpline
from scipy.linalg import solve_banded
from scipy.optimize import minimize_scalar
from scipy.special import ndtr
from scipy.stats import norm

from .config import (
    LLOYD_MAX_NEWTON_STEPS,
    LLOYD_TOL,
    LLOYD_WARMUP_ITERATIONS,
    MAP_CACHE_VERSION,
    MAX_ADC_BITS,
    QUAD_ABS_TOL,
    RHO_EDGE,
)
from .errors import DimensionError, NumericalError, ParameterError
from .hermitian import check_hermitian, check_psd, hermitian_part

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class QuantizerSpec:
    """Symmetric scalar quantizer for unit-variance input.

    `gain` is E[x Q(x)] (the Bussgang gain) and `output_power` is E[Q(x)^2];
    both equal 1 - distortion for a Lloyd-Max design. An ideal converter has
    bits = None and no levels.
    """

    family: str
    bits: int | None
    thresholds: np.ndarray
    representatives: np.ndarray
    distortion: float
    gain: float
    output_power: float

    @property
    def is_ideal(self) -> bool:
        return self.bits is None

    @property
    def key(self) -> tuple[str, int]:
        return self.family, 0 if self.bits is None else self.bits

    @property
    def levels(self) -> int:
        return len(self.representatives)

    def __repr__(self) -> str:
        return f"QuantizerSpec({self.family}, bits={self.bits}, distortion={self.distortion:.6g})"


def _check_bits(bits: int) -> None:
    if not 1 <= bits <= MAX_ADC_BITS:
        raise ParameterError(f"bits must lie in 1..{MAX_ADC_BITS}, got {bits}")


def _half_bins(reps: np.ndarray, inner: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Positive-half bins [a_k, b_k) with Gaussian mass and first moment."""

    a = np.concatenate(([0.0], inner))
    b = np.concatenate((inner, [np.inf]))
    mass = norm.sf(a) - norm.sf(b)
    first = norm.pdf(a) - norm.pdf(b)
    return a, b, mass, first


def _moments(reps: np.ndarray, inner: np.ndarray) -> tuple[float, float, float]:
    """(gain, output_power, distortion) of the symmetric quantizer with positive half `reps`."""

    _, _, mass, first = _half_bins(reps, inner)
    gain = 2.0 * float(np.dot(reps, first))
    output_power = 2.0 * float(np.dot(reps * reps, mass))
    return gain, output_power, 1.0 - 2.0 * gain + output_power


def _assemble(family: str, bits: int, reps: np.ndarray, inner: np.ndarray) -> QuantizerSpec:
    gain, output_power, distortion = _moments(reps, inner)
    thresholds = np.concatenate((-inner[::-1], [0.0], inner))
    representatives = np.concatenate((-reps[::-1], reps))
    return QuantizerSpec(
        family=family,
        bits=bits,
        thresholds=thresholds,
        representatives=representatives,
        distortion=distortion,
        gain=gain,
        output_power=output_power,
    )


def _centroids(reps: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    inner = 0.5 * (reps[:-1] + reps[1:])
    a, b, mass, first = _half_bins(reps, inner)
    return first / mass, a, b, mass, inner


def _newton_step(reps: np.ndarray) -> np.ndarray:
    """One Newton step on r - c(r) = 0; the Jacobian is tridiagonal."""

    c, a, b, mass, _ = _centroids(reps)
    n = len(reps)
    with np.errstate(invalid="ignore"):
        d_upper = np.where(np.isfinite(b), norm.pdf(b) * (b - c) / mass, 0.0)
    d_lower = norm.pdf(a) * (c - a) / mass
    d_lower[0] = 0.0  # a_0 = 0 is fixed by symmetry

    ab = np.zeros((3, n))
    ab[1] = 1.0 - 0.5 * d_lower - 0.5 * d_upper
    ab[0, 1:] = -0.5 * d_upper[:-1]
    ab[2, :-1] = -0.5 * d_lower[1:]
    return solve_banded((1, 1), ab, reps - c)


@lru_cache(maxsize=None)
def design_quantizer(bits: int) -> QuantizerSpec:
    """Lloyd-Max quantizer for a zero-mean unit-variance Gaussian.

    Starts from the companding (N(0, 3) quantile) layout, runs plain Lloyd
    iterations, then polishes with Newton steps until the centroid update is
    below LLOYD_TOL.
    """

    _check_bits(bits)
    n = 2 ** (bits - 1)
    k = np.arange(1, n + 1)
    reps = np.sqrt(3.0) * norm.ppf(0.5 + (k - 0.5) / (2 * n))

    for _ in range(LLOYD_WARMUP_ITERATIONS):
        reps = _centroids(reps)[0]

    for _ in range(LLOYD_MAX_NEWTON_STEPS):
        c = _centroids(reps)[0]
        update = float(np.max(np.abs(c - reps)))
        if update < LLOYD_TOL:
            break
        candidate = reps - _newton_step(reps)
        ok = np.all(candidate > 0) and np.all(np.diff(candidate) > 0)
        if ok and float(np.max(np.abs(_centroids(candidate)[0] - candidate))) < update:
            reps = candidate
        else:
            reps = c
    else:
        raise NumericalError(f"Lloyd-Max design for {bits} bits did not converge to {LLOYD_TOL:g}")

    reps = _centroids(reps)[0]
    inner = 0.5 * (reps[:-1] + reps[1:])
    return _assemble("lloyd-max", bits, reps, inner)


@lru_cache(maxsize=None)
def design_uniform_quantizer(bits: int) -> QuantizerSpec:
    """Mid-rise uniform quantizer with the MSE-optimal step for Gaussian input."""

    _check_bits(bits)
    n = 2 ** (bits - 1)

    def layout(log_step: float) -> tuple[np.ndarray, np.ndarray]:
        step = np.exp(log_step)
        return (np.arange(n) + 0.5) * step, np.arange(1, n) * step

    res = minimize_scalar(
        lambda s: _moments(*layout(s))[2],
        bounds=(np.log(1e-5), np.log(4.0)),
        method="bounded",
        options={"xatol": 1e-10},
    )
    if not res.success:
        raise NumericalError(f"uniform step search for {bits} bits failed: {res.message}")
    reps, inner = layout(float(res.x))
    return _assemble("uniform", bits, reps, inner)


def ideal_quantizer() -> QuantizerSpec:
    """Infinite-resolution converter."""

    return QuantizerSpec(
        family="ideal",
        bits=None,
        thresholds=np.empty(0),
        representatives=np.empty(0),
        distortion=0.0,
        gain=1.0,
        output_power=1.0,
    )


def quantizer_for(family: str, bits: int) -> QuantizerSpec:
    if family == "lloyd-max":
        return design_quantizer(bits)
    if family == "uniform":
        return design_uniform_quantizer(bits)
    if family == "ideal":
        return ideal_quantizer()
    raise ParameterError(f"unknown quantizer family {family!r}")


def bussgang_gains(specs: Sequence[QuantizerSpec]) -> np.ndarray:
    """Diagonal Bussgang matrix F; entry i is 1 - sigma_qi^2 for Lloyd-Max chains."""

    return np.diag([s.gain for s in specs]).astype(float)


def quantize_samples(spec: QuantizerSpec, samples: np.ndarray, agc_std: float | np.ndarray) -> np.ndarray:
    """Quantize real or complex samples after normalizing by `agc_std`.

    Real and imaginary parts are quantized independently. Inputs exactly on a
    threshold go to the bin above it, so 0 maps to the positive level.
    """

    agc = np.asarray(agc_std, dtype=float)
    if np.any(agc <= 0):
        raise ParameterError("agc_std must be positive")
    x = np.asarray(samples)
    if spec.is_ideal:
        return x.copy()

    def _real(part: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(spec.thresholds, part / agc, side="right")
        return spec.representatives[idx] * agc

    if np.iscomplexobj(x):
        return _real(x.real) + 1j * _real(x.imag)
    return _real(x)


def direct_output_corr(spec_a: QuantizerSpec, spec_b: QuantizerSpec) -> float:
    """E[Q_A(x) Q_B(x)] for x ~ N(0, 1), summed over the merged bins."""

    if spec_a.is_ideal and spec_b.is_ideal:
        return 1.0
    if spec_a.is_ideal:
        return spec_b.gain
    if spec_b.is_ideal:
        return spec_a.gain

    # Positive half, doubled by symmetry.
    edges = np.union1d(spec_a.thresholds[spec_a.thresholds > 0], spec_b.thresholds[spec_b.thresholds > 0])
    lo = np.concatenate(([0.0], edges))
    hi = np.concatenate((edges, [np.inf]))
    inner = np.where(np.isfinite(hi), 0.5 * (lo + hi), lo + 1.0)
    qa = spec_a.representatives[np.searchsorted(spec_a.thresholds, inner, side="right")]
    qb = spec_b.representatives[np.searchsorted(spec_b.thresholds, inner, side="right")]
    mass = norm.sf(lo) - norm.sf(hi)
    return 2.0 * float(np.dot(qa * qb, mass))


@dataclass(frozen=True)
class CorrelationMap:
    """Monotone map from input to output correlation for one quantizer pair.

    Defined on [0, 1] and extended to [-1, 0) by odd symmetry. `slope` is set
    for pairs involving an ideal converter, where the map is exactly linear.
    """

    key_a: tuple[str, int]
    key_b: tuple[str, int]
    rho_in: np.ndarray
    rho_out: np.ndarray
    spline: CubicSpline
    slope: float | None = None

    def __call__(self, rho: np.ndarray | float) -> np.ndarray:
        r = np.clip(np.asarray(rho, dtype=float), -1.0, 1.0)
        if self.slope is not None:
            return self.slope * r
        mag = np.minimum(self.spline(np.abs(r)), self.rho_out[-1])
        return np.sign(r) * mag


def _pair_integrand(spec_a: QuantizerSpec, spec_b: QuantizerSpec):
    s = spec_a.thresholds
    t = spec_b.thresholds
    da = np.diff(spec_a.representatives)
    dc = np.diff(spec_b.representatives)
    ss = s[:, None] ** 2 + t[None, :] ** 2
    st = s[:, None] * t[None, :]

    def f(rho: float) -> float:
        q = 1.0 - rho * rho
        dens = np.exp(-(ss - 2.0 * rho * st) / (2.0 * q)) / (2.0 * np.pi * np.sqrt(q))
        return float(da @ dens @ dc)

    return f


def _segment(f, lo: float, hi: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            value, _ = integrate.quad(f, lo, hi, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=200)
            return value
        except integrate.IntegrationWarning as e:
            logger.warning("quadrature on [%.9f, %.9f] did not reach tolerance (%s); keeping best estimate", lo, hi, e)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        value, _ = integrate.quad(f, lo, hi, epsabs=QUAD_ABS_TOL, epsrel=1e-12, limit=1000)
    return value


def _initial_grid() -> np.ndarray:
    # uniform on [0, 0.9], geometric towards the singular end at rho = 1
    head = np.linspace(0.0, 0.9, 46)[:-1]
    tail = 1.0 - np.logspace(-1.0, np.log10(1.0 - RHO_EDGE), 26)
    return np.concatenate((head, tail))


def _linear_map(spec_a: QuantizerSpec, spec_b: QuantizerSpec, grid_threshold: float) -> CorrelationMap:
    slope = spec_a.gain * spec_b.gain
    n = max(2, int(np.ceil(slope / grid_threshold)) + 1)
    rho_in = np.linspace(0.0, 1.0, n)
    rho_out = slope * rho_in
    return CorrelationMap(
        key_a=spec_a.key,
        key_b=spec_b.key,
        rho_in=rho_in,
        rho_out=rho_out,
        spline=CubicSpline(rho_in, rho_out, bc_type="natural"),
        slope=slope,
    )


def build_correlation_map(spec_a: QuantizerSpec, spec_b: QuantizerSpec, grid_threshold: float) -> CorrelationMap:
    """Output correlation E[Q_A(a) Q_B(c)] of unit-variance Gaussians as a function of corr(a, c).

    By Price's theorem the derivative in rho is the sum over threshold pairs of
    the step heights times the bivariate normal density at that pair, so each
    grid segment is one adaptive quadrature. Segments are bisected until the
    output changes by at most `grid_threshold` across each; the rho = 1 end
    point is the exact bin sum.
    """

    if not 0.0 < grid_threshold < 1.0:
        raise ParameterError(f"grid_threshold must lie in (0, 1), got {grid_threshold}")
    if spec_a.is_ideal or spec_b.is_ideal:
        return _linear_map(spec_a, spec_b, grid_threshold)

    f = _pair_integrand(spec_a, spec_b)
    nodes = _initial_grid()
    segments = [(lo, hi, _segment(f, lo, hi)) for lo, hi in zip(nodes[:-1], nodes[1:])]

    while True:
        coarse = [seg for seg in segments if abs(seg[2]) > grid_threshold]
        if not coarse:
            break
        refined: list[tuple[float, float, float]] = []
        for lo, hi, value in segments:
            if abs(value) > grid_threshold:
                mid = 0.5 * (lo + hi)
                refined.append((lo, mid, _segment(f, lo, mid)))
                refined.append((mid, hi, _segment(f, mid, hi)))
            else:
                refined.append((lo, hi, value))
        segments = refined

    rho_in = np.concatenate(([segments[0][0]], [hi for _, hi, _ in segments]))
    rho_out = np.concatenate(([0.0], np.cumsum([value for _, _, value in segments])))

    end = direct_output_corr(spec_a, spec_b)
    if end <= rho_out[-1]:
        logger.warning(
            "map %s/%s: end point %.12f not above last grid value %.12f; nudging",
            spec_a.key,
            spec_b.key,
            end,
            rho_out[-1],
        )
        end = rho_out[-1] + 1e-12
    elif end - rho_out[-1] > grid_threshold:
        logger.debug("map %s/%s: last step to rho=1 is %.3e", spec_a.key, spec_b.key, end - rho_out[-1])
    rho_in = np.append(rho_in, 1.0)
    rho_out = np.append(rho_out, end)

    if np.any(np.diff(rho_out) <= 0):
        raise NumericalError(f"correlation map {spec_a.key}/{spec_b.key} is not strictly increasing")

    logger.debug("built correlation map %s/%s with %d grid points", spec_a.key, spec_b.key, len(rho_in))
    return CorrelationMap(
        key_a=spec_a.key,
        key_b=spec_b.key,
        rho_in=rho_in,
        rho_out=rho_out,
        spline=CubicSpline(rho_in, rho_out, bc_type="natural"),
    )


class CorrelationMapCache:
    """Correlation maps keyed by the (unordered) quantizer pair.

    Builds happen under a lock; call `prepare` before fanning out to worker
    threads so the workers only read. With `cache_dir` set, grids are also
    persisted as CSV.
    """

    def __init__(self, grid_threshold: float, cache_dir: Path | None = None) -> None:
        self.grid_threshold = grid_threshold
        self.cache_dir = cache_dir
        self._maps: dict[tuple, CorrelationMap] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._maps)

    def _path(self, key: tuple) -> Path | None:
        if self.cache_dir is None:
            return None
        (fa, ba), (fb, bb) = key
        return self.cache_dir / f"v{MAP_CACHE_VERSION}_{fa}{ba}_{fb}{bb}_t{self.grid_threshold:g}.csv"

    def _load(self, key: tuple, path: Path) -> CorrelationMap | None:
        df = pd.read_csv(path)
        rho_in = df["rho_in"].to_numpy(dtype=float)
        rho_out = df["rho_out"].to_numpy(dtype=float)
        if len(rho_in) < 2 or np.any(np.diff(rho_in) <= 0) or np.any(np.diff(rho_out) <= 0):
            logger.warning("ignoring malformed correlation map cache %s", path)
            return None
        return CorrelationMap(
            key_a=key[0],
            key_b=key[1],
            rho_in=rho_in,
            rho_out=rho_out,
            spline=CubicSpline(rho_in, rho_out, bc_type="natural"),
        )

    def get(self, spec_a: QuantizerSpec, spec_b: QuantizerSpec) -> CorrelationMap:
        key = tuple(sorted((spec_a.key, spec_b.key)))
        found = self._maps.get(key)
        if found is not None:
            return found

        with self._lock:
            found = self._maps.get(key)
            if found is not None:
                return found

            path = self._path(key)
            ideal = spec_a.is_ideal or spec_b.is_ideal
            if path is not None and path.exists() and not ideal:
                found = self._load(key, path)
            if found is None:
                first, second = (spec_a, spec_b) if spec_a.key <= spec_b.key else (spec_b, spec_a)
                found = build_correlation_map(first, second, self.grid_threshold)
                if path is not None and not ideal:
                    path.parent.mkdir(parents=True, exist_ok=True)
                    pd.DataFrame({"rho_in": found.rho_in, "rho_out": found.rho_out}).to_csv(
                        path, index=False, float_format="%.17g"
                    )
            self._maps[key] = found
            return found

    def prepare(self, pairs: Iterable[tuple[QuantizerSpec, QuantizerSpec]]) -> None:
        for spec_a, spec_b in pairs:
            self.get(spec_a, spec_b)


def _unique_specs(specs: Sequence[QuantizerSpec]) -> dict[tuple, tuple[QuantizerSpec, np.ndarray]]:
    groups: dict[tuple, list[int]] = {}
    first: dict[tuple, QuantizerSpec] = {}
    for i, s in enumerate(specs):
        groups.setdefault(s.key, []).append(i)
        first.setdefault(s.key, s)
    return {k: (first[k], np.asarray(v)) for k, v in groups.items()}


def transform_cov(r_yy: np.ndarray, specs: Sequence[QuantizerSpec], maps: CorrelationMapCache) -> np.ndarray:
    """Covariance of the quantized chain outputs R_rr from the input covariance R_yy.

    Diagonal entries scale by each chain's output power. Off-diagonal complex
    correlations are split into the real-component correlations of a proper
    Gaussian (Re-Re = Im-Im = Re c, Im_i-Re_j = Im c), mapped through the
    pair's CorrelationMap, and rescaled by sqrt(R_ii R_jj).
    """

    check_hermitian(r_yy, "R_yy")
    n = r_yy.shape[0]
    if len(specs) != n:
        raise DimensionError(f"{len(specs)} quantizer specs for a {n}x{n} covariance")
    check_psd(r_yy, "R_yy")

    r_yy = hermitian_part(r_yy)
    if all(s.is_ideal for s in specs):
        return r_yy.copy()

    power = np.real(np.diag(r_yy)).clip(min=0.0)
    scale = np.sqrt(np.outer(power, power))
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(scale > 0, r_yy / np.where(scale > 0, scale, 1.0), 0.0)
    np.fill_diagonal(c, 0.0)

    mag = np.abs(c)
    if np.any(mag > 1.0):
        logger.warning("clamping %d correlation(s) with |c| > 1 (max %.12f)", int(np.sum(mag > 1.0)), float(mag.max()))
        c = np.where(mag > 1.0, c / np.where(mag > 1.0, mag, 1.0), c)

    out = np.zeros((n, n), dtype=complex)
    groups = _unique_specs(specs)
    for spec_a, rows in groups.values():
        for spec_b, cols in groups.values():
            block = c[np.ix_(rows, cols)]
            cmap = maps.get(spec_a, spec_b)
            out[np.ix_(rows, cols)] = cmap(block.real) + 1j * cmap(block.imag)

    out *= scale
    np.fill_diagonal(out, np.array([s.output_power for s in specs]) * power)
    return out


def quant_error_cov(r_rr: np.ndarray, gains: np.ndarray, r_yy: np.ndarray) -> np.ndarray:
    """R_ee = R_rr - F R_yy F^H; `gains` is the diagonal F or its diagonal vector."""

    f = np.diag(gains) if np.ndim(gains) == 2 else np.asarray(gains, dtype=float)
    n = r_yy.shape[0]
    if r_rr.shape != (n, n) or f.shape != (n,):
        raise DimensionError(f"R_rr {r_rr.shape}, F {f.shape} and R_yy {r_yy.shape} do not match")

    r_ee = hermitian_part(r_rr - f[:, None] * r_yy * f[None, :])
    check_psd(r_ee, "R_ee")
    return r_ee
