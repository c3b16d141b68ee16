import unittest
from fractions import Fraction

from src.errors import ParameterError
from src.models import MixedAdc, PowerComponents, SystemConfig
from src.power import adc_power, energy_efficiency, frontend_power


class TestAdcPower(unittest.TestCase):
    def test_figure_of_merit(self):
        self.assertAlmostEqual(adc_power(2.0, 4), 0.48, delta=1e-12)
        self.assertAlmostEqual(adc_power(1.0, 4.5), 0.015 * 2**4.5, delta=1e-12)
        self.assertEqual(adc_power(0.0, 8), 0.0)

    def test_negative_rate(self):
        with self.assertRaises(ParameterError):
            adc_power(-1.0, 4)


class TestFrontendPower(unittest.TestCase):
    def test_one_bit_dbf_receiver(self):
        cfg = SystemConfig(rx_antennas=64, rf_chains=64, adc_bits=1)
        p = frontend_power(cfg)
        self.assertAlmostEqual(p.total_mw, 700.9, delta=1e-9)
        self.assertEqual(p.total_uw, Fraction(700_900))
        self.assertEqual(p.adcs, 0)
        self.assertEqual(p.vgas, 0)
        self.assertEqual(p.one_bit_chains, 64)
        self.assertFalse(p.combining)

    def test_four_bit_hybrid_receiver(self):
        cfg = SystemConfig(rx_antennas=64, antennas_per_chain=4, rf_chains=16, adc_bits=4, mode="HBF")
        p = frontend_power(cfg)
        self.assertAlmostEqual(p.total_mw, 805.86, delta=1e-9)
        self.assertEqual(p.phase_shifters, Fraction(128_000))
        self.assertEqual(p.adcs, Fraction(15_360))
        breakdown = p.as_mw()
        self.assertAlmostEqual(breakdown["total"], sum(v for k, v in breakdown.items() if k != "total"))

    def test_mixed_without_high_chains_is_all_one_bit(self):
        mixed = SystemConfig(
            rx_antennas=8, rf_chains=8, mode="DBF-mixed", mixed=MixedAdc(high_count=0, high_bits=5, low_bits=1)
        )
        uniform = SystemConfig(rx_antennas=8, rf_chains=8, adc_bits=1)
        self.assertEqual(frontend_power(mixed).total_uw, frontend_power(uniform).total_uw)

    def test_mixed_counts_each_bank(self):
        cfg = SystemConfig(
            rx_antennas=8, rf_chains=8, mode="DBF-mixed", mixed=MixedAdc(high_count=2, high_bits=5, low_bits=1)
        )
        p = frontend_power(cfg)
        self.assertEqual(p.one_bit_chains, 6)
        self.assertEqual(p.vgas, Fraction(2 * 2 * 2_000))
        self.assertEqual(p.adcs, Fraction(2 * 2 * 15 * 2 * 32))

    def test_power_grows_with_resolution(self):
        totals = [frontend_power(SystemConfig(rx_antennas=16, rf_chains=16, adc_bits=b)).total_uw for b in range(2, 9)]
        self.assertEqual(totals, sorted(totals))
        self.assertEqual(len(set(totals)), len(totals))

    def test_single_chain_hybrid(self):
        cfg = SystemConfig(rx_antennas=4, antennas_per_chain=4, rf_chains=1, adc_bits=3, mode="HBF")
        p = frontend_power(cfg)
        self.assertTrue(p.combining)
        self.assertEqual(p.vgas, Fraction(4_000))

    def test_custom_component_table_and_enob(self):
        cfg = SystemConfig(
            rx_antennas=2,
            rf_chains=2,
            adc_bits=3,
            enob_offset=-1.0,
            power=PowerComponents(lo_uw=0, lna_uw=0, mixer_uw=0, hybrid_uw=0, vga_uw=0),
        )
        self.assertEqual(frontend_power(cfg).total_uw, Fraction(2 * 2 * 15 * 2 * 4))


class TestEnergyEfficiency(unittest.TestCase):
    def test_rate_per_watt(self):
        self.assertAlmostEqual(energy_efficiency(20.0, 700.9), 20.0 / 0.7009, delta=1e-9)
        self.assertAlmostEqual(energy_efficiency(20.0, 700.9), 28.5347, delta=1e-4)

    def test_nonpositive_power(self):
        with self.assertRaises(ParameterError):
            energy_efficiency(1.0, 0.0)
        with self.assertRaises(ParameterError):
            energy_efficiency(1.0, -5.0)


if __name__ == "__main__":
    unittest.main()
