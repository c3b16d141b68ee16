from __future__ import annotations

import logging
import math

import numpy as np
from rich.table import Table

from .chanest import (
    SeparableCovariance,
    analytic_mse_direct,
    analytic_mse_kron,
    design_filters,
    dmrs_pattern,
    freq_corr,
    spatial_corr,
    time_corr,
)
from .models import OracleCheck, SystemConfig
from .montecarlo import mc_bussgang, mc_channel_est, mc_distortion, mc_output_corr
from .power import frontend_power
from .quantization import build_correlation_map, design_quantizer, direct_output_corr

logger = logging.getLogger(__name__)


def _check(name: str, analytic: float, estimate: float, stderr: float, tolerance: str, passed: bool) -> OracleCheck:
    check = OracleCheck(
        name=name,
        analytic=analytic,
        estimate=estimate,
        stderr=stderr,
        tolerance=tolerance,
        passed=bool(passed),
    )
    logger.debug("%s %s: analytic %.6g estimate %.6g", check.emoji, name, analytic, estimate)
    return check


def _quantizer_checks(rng: np.random.Generator, samples: int) -> list[OracleCheck]:
    checks = []
    one_bit = design_quantizer(1)
    closed = 1.0 - 2.0 / math.pi
    checks.append(
        _check("1-bit distortion", closed, one_bit.distortion, 0.0, "1e-12", abs(one_bit.distortion - closed) <= 1e-12)
    )
    for b in (2, 3, 4):
        spec = design_quantizer(b)
        est = mc_distortion(spec, samples, rng)
        checks.append(
            _check(
                f"{b}-bit distortion",
                spec.distortion,
                est.value,
                est.stderr,
                "1e-3",
                abs(est.value - spec.distortion) <= 1e-3,
            )
        )
    return checks


def _map_checks(rng: np.random.Generator, samples: int) -> list[OracleCheck]:
    checks = []
    one_bit = design_quantizer(1)
    cmap = build_correlation_map(one_bit, one_bit, 1e-3)
    rho = np.linspace(0.0, 1.0, 1001)
    err = float(np.max(np.abs(cmap(rho) - (4.0 / math.pi**2) * np.arcsin(rho))))
    checks.append(_check("1-bit map vs arcsine law", 0.0, err, 0.0, "max 1e-3", err <= 1e-3))

    for rho_i in (0.1, 0.5, 0.9):
        est = mc_output_corr(one_bit, one_bit, rho_i, samples, rng)
        analytic = float(cmap(rho_i))
        checks.append(
            _check(f"1-bit map at rho={rho_i}", analytic, est.value, est.stderr, "3 stderr", est.agrees_with(analytic))
        )

    a, b = design_quantizer(2), design_quantizer(3)
    end = direct_output_corr(a, b)
    mixed_map = build_correlation_map(a, b, 1e-3)
    est = mc_output_corr(a, b, 0.5, samples, rng)
    analytic = float(mixed_map(0.5))
    checks.append(_check("2/3-bit map at rho=0.5", analytic, est.value, est.stderr, "3 stderr", est.agrees_with(analytic)))
    checks.append(
        _check("2/3-bit map end point", end, float(mixed_map(1.0)), 0.0, "1e-12", abs(float(mixed_map(1.0)) - end) <= 1e-12)
    )
    return checks


def _bussgang_checks(rng: np.random.Generator, samples: int) -> list[OracleCheck]:
    checks = []
    gain, _ = mc_bussgang(design_quantizer(1), samples, rng)
    checks.append(_check("1-bit Bussgang gain", 2.0 / math.pi, gain.value, gain.stderr, "3 stderr", gain.agrees_with(2.0 / math.pi)))
    for b in range(1, 7):
        _, residual = mc_bussgang(design_quantizer(b), samples, rng)
        checks.append(
            _check(
                f"{b}-bit error orthogonality",
                0.0,
                residual.value,
                residual.stderr,
                "4 stderr",
                residual.value <= 4.0 * residual.stderr,
            )
        )
    return checks


def random_separable(rng: np.random.Generator, k: int, l_sym: int, m: int, noise_var: float) -> SeparableCovariance:
    """Random unit-diagonal PSD factors for a k x l_sym x m grid."""

    def factor(n: int) -> np.ndarray:
        x = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        r = x @ x.conj().T
        d = np.sqrt(np.real(np.diag(r)))
        return r / np.outer(d, d)

    return SeparableCovariance(
        r_s=factor(m),
        r_t=factor(l_sym),
        r_f=factor(k),
        n_s=np.eye(m),
        n_t=np.eye(l_sym),
        n_f=noise_var * np.eye(k),
    )


def _chanest_checks(rng: np.random.Generator, draws: int) -> list[OracleCheck]:
    checks = []
    pattern = dmrs_pattern(1, 8, 4, 2)
    worst = 0.0
    for _ in range(10):
        cov = random_separable(rng, 8, 4, 2, 0.5)
        filters = design_filters(cov, 0.5, pattern, 0, spatial_smoothing=True)
        kron = analytic_mse_kron(filters, cov, pattern)
        r_hh, r_nn = cov.full()
        direct = analytic_mse_direct(filters.full(), r_hh, r_nn, pattern.flat_index(0))
        worst = max(worst, abs(kron - direct) / abs(direct))
    checks.append(_check("kron vs direct MSE", 0.0, worst, 0.0, "1e-10 rel", worst <= 1e-10))

    for snr_db in (-10.0, 0.0, 10.0):
        noise_var = 10.0 ** (-snr_db / 10.0)
        cov = SeparableCovariance(
            r_s=spatial_corr(2),
            r_t=time_corr(0.05, 4),
            r_f=freq_corr(np.exp(-0.5 * np.arange(4)) / np.exp(-0.5 * np.arange(4)).sum(), 8),
            n_s=np.eye(2),
            n_t=np.eye(4),
            n_f=noise_var * np.eye(8),
        )
        filters = design_filters(cov, noise_var, pattern, 0)
        analytic = analytic_mse_kron(filters, cov, pattern)
        est = mc_channel_est(filters, cov, pattern, draws, rng)
        checks.append(
            _check(
                f"channel-estimation MSE at {snr_db:g} dB",
                analytic,
                est.value,
                est.stderr,
                "3%",
                abs(est.value - analytic) <= 0.03 * analytic,
            )
        )
    return checks


def _power_checks() -> list[OracleCheck]:
    dbf = SystemConfig(rx_antennas=64, rf_chains=64, adc_bits=1, mode="DBF")
    hbf = SystemConfig(rx_antennas=64, antennas_per_chain=4, rf_chains=16, adc_bits=4, mode="HBF", sampling_rate_ghz=2)
    checks = []
    for name, cfg, expected in (("DBF 64 x 1-bit power", dbf, 700.9), ("HBF 16 x 4-bit power", hbf, 805.86)):
        total = frontend_power(cfg).total_mw
        checks.append(_check(name, expected, total, 0.0, "exact", abs(total - expected) < 1e-9))
    return checks


def run_oracles(seed: int = 0, samples: int = 1_000_000, draws: int = 10_000) -> list[OracleCheck]:
    """Every analytic-vs-sampled consistency check, seeded for reproducibility."""

    rng = np.random.default_rng(seed)
    checks: list[OracleCheck] = []
    checks += _quantizer_checks(rng, samples)
    checks += _map_checks(rng, samples)
    checks += _bussgang_checks(rng, samples)
    checks += _chanest_checks(rng, draws)
    checks += _power_checks()
    return checks


def oracle_table(checks: list[OracleCheck]) -> Table:
    table = Table(title="Oracle checks")
    table.add_column("check", style="cyan")
    table.add_column("analytic", justify="right")
    table.add_column("estimate", justify="right")
    table.add_column("stderr", justify="right")
    table.add_column("tolerance")
    table.add_column("ok", style="bold")
    for c in checks:
        table.add_row(c.name, f"{c.analytic:.6g}", f"{c.estimate:.6g}", f"{c.stderr:.2g}", c.tolerance, c.emoji)
    return table
