"""Qualitative findings at full array scale (64 antennas, 4 users, 30 channels).

These take tens of minutes, so they only run with MMW_SLOW_TESTS=1.
"""

import os
import tempfile
import unittest
from pathlib import Path

import pandas as pd

from src.config import SLOW_TESTS_ENV_VAR
from src.models import SweepPlan
from src.sweep import run_sweep

SNRS = [-15.0, 0.0, 15.0]
HBF_CHAINS = [4, 8, 16, 32]
MIXED_COUNTS = [8, 16, 32]
SLACK = 0.10


def full_scale_plan() -> SweepPlan:
    return SweepPlan.model_validate(
        {
            "base": {
                "rx_antennas": 64,
                "rf_chains": 64,
                "users": 4,
                "max_delay": 128,
                "taps": 32,
                "n_bins": 128,
                "realizations": 30,
                "seed": 2024,
            },
            "snr_db": SNRS,
            "modes": ["DBF", "HBF", "DBF-mixed"],
            "bits": list(range(1, 9)),
            "rf_chains": HBF_CHAINS,
            "mixed_high_counts": MIXED_COUNTS,
            "mixed_high_bits": [5],
            "mixed_low_bits": [1, 2, 3, 4],
        }
    )


@unittest.skipUnless(os.environ.get(SLOW_TESTS_ENV_VAR), f"set {SLOW_TESTS_ENV_VAR}=1 to run full-scale checks")
class TestFullScaleFindings(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls._tmp = tempfile.TemporaryDirectory()
        cls.out = Path(cls._tmp.name)
        run_sweep(full_scale_plan(), cls.out, show_progress=False)

    @classmethod
    def tearDownClass(cls):
        cls._tmp.cleanup()

    def read(self, name: str) -> pd.DataFrame:
        return pd.read_csv(self.out / f"{name}.csv")

    def rate_at(self, curve: str, snr: float) -> float:
        df = self.read(curve)
        return float(df.loc[df["x"] == snr, "y"].iloc[0])

    def test_rate_saturates_above_five_bits(self):
        r5 = self.rate_at("rate_snr_DBF_rfe64_b5", 15.0)
        r8 = self.rate_at("rate_snr_DBF_rfe64_b8", 15.0)
        self.assertLess(r8 - r5, 0.05 * r5)

    def test_digital_beats_hybrid_on_efficiency(self):
        for snr in SNRS:
            dbf = self.read(f"ee_rate_DBF_rfe64_snr{snr:g}")["y"].max()
            for m_rfe in HBF_CHAINS:
                with self.subTest(snr=snr, m_rfe=m_rfe):
                    hbf = self.read(f"ee_rate_HBF_rfe{m_rfe}_snr{snr:g}")["y"].max()
                    self.assertGreater(dbf, hbf)

    def test_efficiency_peaks_at_or_below_five_bits(self):
        ee = self.read("ee_rate_DBF_rfe64_snr15")["y"].tolist()  # rows are b = 1..8
        self.assertLessEqual(ee.index(max(ee)) + 1, 5)
        for b in range(5, 8):
            self.assertLess(ee[b], ee[b - 1], f"EE does not drop from {b} to {b + 1} bits")

    def test_mixed_banks_sit_between_uniform_banks(self):
        for snr in SNRS:
            uniform = self.read(f"ee_rate_DBF_rfe64_snr{snr:g}")  # rows are b = 1..8
            high = uniform.iloc[4]
            for m_h in MIXED_COUNTS:
                mixed = self.read(f"ee_rate_DBF-mixed_mh{m_h}_bh5_snr{snr:g}")  # rows are b_l = 1..4
                for b_l, row in zip(range(1, 5), mixed.itertuples()):
                    low = uniform.iloc[b_l - 1]
                    for col, value in (("x", row.x), ("y", row.y)):
                        lo, hi = sorted((low[col], high[col]))
                        with self.subTest(snr=snr, m_h=m_h, b_l=b_l, axis=col):
                            self.assertGreaterEqual(value, lo * (1 - SLACK))
                            self.assertLessEqual(value, hi * (1 + SLACK))


if __name__ == "__main__":
    unittest.main()
