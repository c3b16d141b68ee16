import math
import tempfile
import unittest
from pathlib import Path

import numpy as np

from src.errors import DimensionError, NumericalError, ParameterError
from src.quantization import (
    CorrelationMapCache,
    build_correlation_map,
    bussgang_gains,
    design_quantizer,
    design_uniform_quantizer,
    direct_output_corr,
    ideal_quantizer,
    quant_error_cov,
    quantize_samples,
    quantizer_for,
    transform_cov,
)


class TestLloydMax(unittest.TestCase):
    def test_one_bit_closed_form(self):
        q = design_quantizer(1)
        self.assertAlmostEqual(q.distortion, 1.0 - 2.0 / math.pi, delta=1e-12)
        np.testing.assert_allclose(q.representatives, [-math.sqrt(2 / math.pi), math.sqrt(2 / math.pi)], atol=1e-12)
        np.testing.assert_array_equal(q.thresholds, [0.0])

    def test_two_bit_tabulated_design(self):
        q = design_quantizer(2)
        self.assertAlmostEqual(q.distortion, 0.1175, delta=1e-4)
        np.testing.assert_allclose(q.representatives[2:], [0.4528, 1.5104], atol=1e-3)
        self.assertAlmostEqual(q.thresholds[-1], 0.9816, delta=1e-3)

    def test_distortion_decreases_and_moments_agree(self):
        previous = 1.0
        for b in range(1, 9):
            q = design_quantizer(b)
            self.assertLess(q.distortion, previous)
            previous = q.distortion
            self.assertAlmostEqual(q.gain, 1.0 - q.distortion, delta=1e-10)
            self.assertAlmostEqual(q.output_power, 1.0 - q.distortion, delta=1e-10)
            self.assertEqual(q.levels, 2**b)
            self.assertTrue(np.all(np.diff(q.thresholds) > 0))

    def test_bits_out_of_range(self):
        with self.assertRaises(ParameterError):
            design_quantizer(0)
        with self.assertRaises(ParameterError):
            design_quantizer(13)


class TestOtherQuantizers(unittest.TestCase):
    def test_uniform_one_bit_matches_lloyd_max(self):
        self.assertAlmostEqual(design_uniform_quantizer(1).distortion, design_quantizer(1).distortion, delta=1e-8)

    def test_uniform_two_bit_and_ordering(self):
        self.assertAlmostEqual(design_uniform_quantizer(2).distortion, 0.1188, delta=1e-3)
        for b in (2, 3, 4):
            self.assertGreaterEqual(design_uniform_quantizer(b).distortion, design_quantizer(b).distortion - 1e-12)
        q = design_uniform_quantizer(3)
        np.testing.assert_allclose(np.diff(q.representatives), np.diff(q.representatives)[0])

    def test_ideal_and_dispatch(self):
        ideal = ideal_quantizer()
        self.assertTrue(ideal.is_ideal)
        self.assertEqual((ideal.distortion, ideal.gain, ideal.output_power), (0.0, 1.0, 1.0))
        self.assertIs(quantizer_for("lloyd-max", 3), design_quantizer(3))
        self.assertEqual(quantizer_for("uniform", 2).family, "uniform")
        with self.assertRaises(ParameterError):
            quantizer_for("mu-law", 3)

    def test_bussgang_gain_matrix(self):
        specs = [design_quantizer(1), ideal_quantizer()]
        np.testing.assert_allclose(bussgang_gains(specs), np.diag([2 / math.pi, 1.0]), atol=1e-12)


class TestQuantizeSamples(unittest.TestCase):
    def test_zero_goes_to_positive_level_and_agc_scales(self):
        q = design_quantizer(2)
        out = quantize_samples(q, np.array([0.0, -0.1, 2.0]), 1.0)
        np.testing.assert_allclose(out, [q.representatives[2], q.representatives[1], q.representatives[3]])
        scaled = quantize_samples(q, np.array([0.0, -0.1, 2.0]) * 3.0, 3.0)
        np.testing.assert_allclose(scaled, 3.0 * out)

    def test_complex_is_componentwise(self):
        q = design_quantizer(1)
        out = quantize_samples(q, np.array([1.0 - 2.0j]), 1.0)
        a = math.sqrt(2 / math.pi)
        np.testing.assert_allclose(out, [a - 1j * a])

    def test_nonpositive_agc(self):
        with self.assertRaises(ParameterError):
            quantize_samples(design_quantizer(1), np.ones(3), 0.0)


class TestCorrelationMap(unittest.TestCase):
    def test_one_bit_map_is_arcsine_law(self):
        q = design_quantizer(1)
        cmap = build_correlation_map(q, q, 1e-3)
        rho = np.linspace(0.0, 1.0, 501)
        expected = (4 / math.pi**2) * np.arcsin(rho)
        self.assertLess(np.max(np.abs(cmap(rho) - expected)), 1e-3)
        np.testing.assert_allclose(cmap(-rho), -cmap(rho))
        self.assertEqual(float(cmap(0.0)), 0.0)

    def test_grid_and_end_point(self):
        a, b = design_quantizer(2), design_quantizer(3)
        cmap = build_correlation_map(a, b, 1e-3)
        self.assertTrue(np.all(np.diff(cmap.rho_out) > 0))
        self.assertTrue(np.all(np.diff(cmap.rho_out[:-1]) <= 1e-3 + 1e-9))
        self.assertAlmostEqual(cmap.rho_out[-1], direct_output_corr(a, b), delta=1e-15)
        self.assertAlmostEqual(float(cmap(1.5)), cmap.rho_out[-1], delta=1e-15)

    def test_end_point_of_same_quantizer_is_output_power(self):
        for b in (1, 3, 5):
            q = design_quantizer(b)
            self.assertAlmostEqual(direct_output_corr(q, q), q.output_power, delta=1e-12)

    def test_ideal_pair_is_linear(self):
        q = design_quantizer(2)
        cmap = build_correlation_map(q, ideal_quantizer(), 1e-3)
        self.assertAlmostEqual(float(cmap(0.4)), 0.4 * q.gain, delta=1e-14)

    def test_invalid_threshold(self):
        q = design_quantizer(1)
        with self.assertRaises(ParameterError):
            build_correlation_map(q, q, 0.0)


class TestCorrelationMapCache(unittest.TestCase):
    def test_pair_order_and_disk_reload(self):
        a, b = design_quantizer(1), design_quantizer(2)
        with tempfile.TemporaryDirectory() as tmp:
            cache = CorrelationMapCache(1e-2, Path(tmp))
            first = cache.get(b, a)
            self.assertIs(cache.get(a, b), first)
            self.assertEqual(len(list(Path(tmp).glob("*.csv"))), 1)

            reloaded = CorrelationMapCache(1e-2, Path(tmp)).get(a, b)
            np.testing.assert_allclose(reloaded.rho_out, first.rho_out, rtol=1e-15)
            np.testing.assert_allclose(reloaded(0.37), first(0.37), rtol=1e-12)


class TestCovarianceTransform(unittest.TestCase):
    def setUp(self):
        self.maps = CorrelationMapCache(1e-3)

    def test_all_ideal_is_identity(self):
        r = np.array([[2.0, 0.5 + 0.5j], [0.5 - 0.5j, 1.0]])
        out = transform_cov(r, [ideal_quantizer()] * 2, self.maps)
        np.testing.assert_array_equal(out, r)

    def test_one_bit_pair(self):
        q = design_quantizer(1)
        r = np.array([[4.0, 1.0], [1.0, 1.0]], dtype=complex)  # correlation 0.5
        out = transform_cov(r, [q, q], self.maps)
        np.testing.assert_allclose(np.diag(out).real, (2 / math.pi) * np.array([4.0, 1.0]), rtol=1e-12)
        expected = 2.0 * (4 / math.pi**2) * math.asin(0.5)
        self.assertAlmostEqual(out[0, 1].real, expected, delta=2e-3)
        self.assertAlmostEqual(out[0, 1].imag, 0.0, delta=1e-12)
        np.testing.assert_allclose(out, out.conj().T)

    def test_complex_correlation_uses_both_parts(self):
        q = design_quantizer(2)
        r = np.array([[1.0, 0.3 + 0.4j], [0.3 - 0.4j, 1.0]])
        out = transform_cov(r, [q, q], self.maps)
        cmap = self.maps.get(q, q)
        self.assertAlmostEqual(out[0, 1], complex(cmap(0.3), cmap(0.4)), delta=1e-12)

    def test_random_inputs_give_hermitian_psd_outputs(self):
        rng = np.random.default_rng(23)
        for trial in range(100):
            n = int(rng.integers(2, 6))
            rank = int(rng.integers(1, n + 1))
            x = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
            r_yy = x @ x.conj().T + rng.uniform(0.1, 0.5) * np.eye(n)
            specs = [design_quantizer(int(b)) for b in rng.integers(1, 5, size=n)]
            with self.subTest(trial=trial):
                r_rr = transform_cov(r_yy, specs, self.maps)
                np.testing.assert_array_equal(r_rr, r_rr.conj().T)
                self.assertGreaterEqual(np.linalg.eigvalsh(r_rr).min(), -1e-9)
                r_ee = quant_error_cov(r_rr, bussgang_gains(specs), r_yy)
                np.testing.assert_allclose(r_ee, r_ee.conj().T, atol=1e-12)

    def test_errors(self):
        q = design_quantizer(1)
        with self.assertRaises(DimensionError):
            transform_cov(np.eye(3, dtype=complex), [q, q], self.maps)
        with self.assertRaises(NumericalError):
            transform_cov(np.array([[1.0, 1.0], [0.0, 1.0]], dtype=complex), [q, q], self.maps)

    def test_scalar_error_covariance(self):
        q = design_quantizer(1)
        r = np.array([[1.0 + 0j]])
        r_rr = transform_cov(r, [q], self.maps)
        r_ee = quant_error_cov(r_rr, np.array([q.gain]), r)
        g = 2 / math.pi
        self.assertAlmostEqual(r_ee[0, 0].real, g * (1 - g), delta=1e-12)


if __name__ == "__main__":
    unittest.main()
