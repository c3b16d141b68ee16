import math
import unittest

import numpy as np

from src.channel import sample_channel
from src.chanest import MseTable, est_error_cov
from src.errors import DimensionError, ParameterError
from src.models import MixedAdc, SystemConfig
from src.quantization import CorrelationMapCache, design_quantizer
from src.rate import (
    chain_quantizers,
    combined_error_cov,
    effective_channel,
    effective_noise_cov,
    per_bin_mutual_info,
    quantizer_pairs,
    sum_rate,
)


def rate_config(**overrides) -> SystemConfig:
    fields = dict(
        rx_antennas=4,
        rf_chains=4,
        users=2,
        max_delay=4,
        taps=2,
        n_bins=8,
        snr_db=10.0,
        adc_bits=3,
        estimation_error=False,
    )
    fields.update(overrides)
    return SystemConfig(**fields)


def flat_table(mse: float) -> MseTable:
    return MseTable(snr_db=np.array([-30.0, 30.0]), mse=np.array([mse, mse]))


class TestMutualInformation(unittest.TestCase):
    def test_scalar(self):
        one = np.ones((1, 1), dtype=complex)
        self.assertAlmostEqual(per_bin_mutual_info(one, one, one), 1.0, delta=1e-12)
        self.assertEqual(per_bin_mutual_info(np.zeros((1, 1)), one, one), 0.0)

    def test_matches_eigenvalue_form(self):
        rng = np.random.default_rng(9)
        h = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        r_xx = np.diag([1.5, 0.5]).astype(complex)
        x = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        r = x @ x.conj().T + np.eye(3)
        _, logdet = np.linalg.slogdet(np.eye(3) + np.linalg.solve(r, h @ r_xx @ h.conj().T))
        self.assertAlmostEqual(per_bin_mutual_info(h, r_xx, r), logdet / math.log(2), delta=1e-10)

    def test_unitary_rotation_leaves_rate_unchanged(self):
        rng = np.random.default_rng(2)
        h = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        q, _ = np.linalg.qr(rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)))
        r = np.diag([1.0, 2.0, 0.5]).astype(complex)
        r_xx = np.eye(2, dtype=complex)
        self.assertAlmostEqual(
            per_bin_mutual_info(h, r_xx, r), per_bin_mutual_info(q @ h, r_xx, q @ r @ q.conj().T), delta=1e-10
        )

    def test_shape_mismatch(self):
        with self.assertRaises(DimensionError):
            per_bin_mutual_info(np.ones((2, 2)), np.eye(3), np.eye(2))


class TestEffectiveModel(unittest.TestCase):
    def test_effective_channel_scales_and_transforms(self):
        taps = np.array([[[1.0], [2.0]]], dtype=complex)  # L=1, M_R=2, K=1
        h = effective_channel(np.array([0.5, 1.0]), np.eye(2), taps, 2)
        self.assertEqual(h.shape, (2, 2, 1))
        np.testing.assert_allclose(h[:, :, 0], [[0.5, 2.0], [0.5, 2.0]])

    def test_effective_noise_covariance(self):
        r = effective_noise_cov(np.array([0.5, 1.0]), np.eye(2), np.eye(2), np.diag([0.1, 0.2]))
        np.testing.assert_allclose(r, np.diag([0.35, 1.2]))

    def test_chain_mismatch(self):
        with self.assertRaises(DimensionError):
            effective_noise_cov(np.array([1.0]), np.eye(2), np.eye(2), np.zeros((1, 1)))

    def test_estimation_error_is_formed_before_combining(self):
        h = np.array([[[1.0], [2.0j], [0.5], [-1.0]]], dtype=complex)  # N_f=1, M_R=4, K=1
        w_r = np.zeros((4, 2), dtype=complex)
        w_r[:2, 0] = [1.0, np.exp(1j * 0.4)]
        w_r[2:, 1] = [1.0, np.exp(-1j * 1.1)]
        gains = np.array([0.5, 0.8])
        r_ww = combined_error_cov(gains, w_r, h, np.array([0.1]))
        # disjoint sub-arrays keep it diagonal; each chain sums its own antennas
        np.testing.assert_allclose(r_ww[0], np.diag([0.25 * 0.1 * 5.0, 0.64 * 0.1 * 1.25]), atol=1e-15)

        combined = gains[None, :, None] * np.einsum("mc,fmk->fck", w_r.conj(), h)
        self.assertFalse(np.allclose(r_ww, est_error_cov(combined, np.array([0.1]))))

    def test_estimation_error_without_analog_stage(self):
        rng = np.random.default_rng(10)
        h = rng.standard_normal((3, 2, 2)) + 1j * rng.standard_normal((3, 2, 2))
        gains = np.array([0.6, 0.9])
        sigma2 = np.array([0.05, 0.2])
        r_ww = combined_error_cov(gains, np.eye(2), h, sigma2)
        np.testing.assert_allclose(r_ww, est_error_cov(gains[None, :, None] * h, sigma2), atol=1e-14)

        with self.assertRaises(DimensionError):
            combined_error_cov(gains, np.eye(3), h, sigma2)


class TestQuantizerSelection(unittest.TestCase):
    def test_ideal_when_quantization_off(self):
        specs = chain_quantizers(rate_config(quantize=False))
        self.assertTrue(all(s.is_ideal for s in specs))

    def test_pairs_cover_every_combination_once(self):
        mixed = rate_config(mode="DBF-mixed", mixed=MixedAdc(high_count=1, high_bits=5, low_bits=2))
        pairs = quantizer_pairs([mixed, rate_config(adc_bits=2)])
        keys = [(a.bits, b.bits) for a, b in pairs]
        self.assertEqual(keys, [(2, 2), (2, 5), (5, 5)])


class TestSumRate(unittest.TestCase):
    def setUp(self):
        self.maps = CorrelationMapCache(1e-3)

    def test_single_antenna_ideal_link(self):
        cfg = SystemConfig(
            rx_antennas=1,
            rf_chains=1,
            users=1,
            max_delay=1,
            taps=1,
            n_bins=1,
            snr_db=10.0,
            evm_db=None,
            quantize=False,
            estimation_error=False,
        )
        ch = sample_channel(cfg, np.random.default_rng(0))
        self.assertAlmostEqual(sum_rate(cfg, ch).sum_rate, math.log2(11.0), delta=1e-9)

    def test_equal_mixed_banks_match_uniform(self):
        uniform = rate_config(adc_bits=5)
        mixed = rate_config(mode="DBF-mixed", mixed=MixedAdc(high_count=2, high_bits=5, low_bits=5))
        ch = sample_channel(uniform, np.random.default_rng(5))
        a = sum_rate(uniform, ch, maps=self.maps)
        b = sum_rate(mixed, ch, maps=self.maps)
        self.assertEqual(a.sum_rate, b.sum_rate)
        self.assertEqual(a.per_bin, b.per_bin)

    def test_more_bits_give_more_rate(self):
        base = rate_config()
        ch = sample_channel(base, np.random.default_rng(6))
        rates = [sum_rate(rate_config(adc_bits=b), ch, maps=self.maps).sum_rate for b in range(1, 6)]
        self.assertTrue(all(x < y for x, y in zip(rates, rates[1:])), rates)
        ideal = sum_rate(rate_config(quantize=False), ch).sum_rate
        self.assertLess(rates[-1], ideal)

    def test_estimation_error_lowers_rate(self):
        cfg = rate_config(estimation_error=True)
        ch = sample_channel(cfg, np.random.default_rng(7))
        low = sum_rate(cfg, ch, mse_table=flat_table(0.01), maps=self.maps).sum_rate
        high = sum_rate(cfg, ch, mse_table=flat_table(0.2), maps=self.maps).sum_rate
        perfect = sum_rate(rate_config(), ch, maps=self.maps).sum_rate
        self.assertLess(high, low)
        self.assertLess(low, perfect)

    def test_missing_table(self):
        cfg = rate_config(estimation_error=True)
        with self.assertRaises(ParameterError):
            sum_rate(cfg, sample_channel(cfg, np.random.default_rng(0)))

    def test_evm_lowers_rate(self):
        clean = rate_config(evm_db=None, quantize=False)
        ch = sample_channel(clean, np.random.default_rng(8))
        noisy = rate_config(evm_db=-10.0, quantize=False)
        self.assertLess(sum_rate(noisy, ch).sum_rate, sum_rate(clean, ch).sum_rate)

    def test_band_of_interest(self):
        cfg = rate_config(band=(2, 5))
        result = sum_rate(cfg, sample_channel(cfg, np.random.default_rng(3)), maps=self.maps)
        self.assertEqual(len(result.per_bin), 4)
        self.assertAlmostEqual(result.sum_rate, float(np.mean(result.per_bin)))

    def test_hybrid_receiver(self):
        cfg = rate_config(rx_antennas=8, antennas_per_chain=2, rf_chains=4, mode="HBF", adc_bits=2)
        result = sum_rate(cfg, sample_channel(cfg, np.random.default_rng(4)), maps=self.maps)
        self.assertGreater(result.sum_rate, 0.0)
        self.assertTrue(math.isfinite(result.sum_rate))
        self.assertIsNotNone(self.maps.get(design_quantizer(2), design_quantizer(2)))

    def test_digital_receiver_beats_hybrid_on_common_draws(self):
        common = dict(rx_antennas=8, users=2, snr_db=15.0)
        rng = np.random.default_rng(21)
        for quantize in (False, True):
            dbf = rate_config(rf_chains=8, quantize=quantize, **common)
            hbf = rate_config(antennas_per_chain=2, rf_chains=4, mode="HBF", quantize=quantize, **common)
            rates = []
            for _ in range(10):
                ch = sample_channel(dbf, rng)
                rates.append((sum_rate(dbf, ch, maps=self.maps).sum_rate, sum_rate(hbf, ch, maps=self.maps).sum_rate))
            rates = np.array(rates)
            if not quantize:
                # the hybrid output is a linear function of the digital one
                self.assertTrue(np.all(rates[:, 0] >= rates[:, 1] - 1e-9), rates)
            self.assertGreater(rates[:, 0].mean(), rates[:, 1].mean())


if __name__ == "__main__":
    unittest.main()
