import json
import os
import tempfile
import unittest
from pathlib import Path
from unittest import mock

import numpy as np
import pandas as pd

from src.chanest import MseTable
from src.cli import main
from src.config import MANIFEST_NAME
from src.errors import ConfigError
from src.models import SweepManifest, SweepPlan, SystemConfig
from src.power import frontend_power
from src.sweep import derive_rng, expand_plan, read_json, resolve_threads, run_sweep, validate_plan

TINY_BASE = {
    "rx_antennas": 4,
    "rf_chains": 4,
    "users": 1,
    "max_delay": 2,
    "taps": 1,
    "n_bins": 2,
    "realizations": 2,
    "seed": 3,
}


def tiny_plan(**overrides) -> SweepPlan:
    doc = {
        "base": TINY_BASE,
        "snr_db": [0.0, 10.0],
        "modes": ["DBF", "HBF"],
        "bits": [1, 2],
        "rf_chains": [2],
    }
    doc.update(overrides)
    return SweepPlan.model_validate(doc)


def flat_table() -> MseTable:
    return MseTable(snr_db=np.array([-30.0, 30.0]), mse=np.array([0.05, 0.05]))


class TestSeedsAndThreads(unittest.TestCase):
    def test_derived_streams(self):
        a = derive_rng(7, 0, 1).standard_normal(4)
        b = derive_rng(7, 0, 1).standard_normal(4)
        c = derive_rng(7, 0, 2).standard_normal(4)
        np.testing.assert_array_equal(a, b)
        self.assertFalse(np.allclose(a, c))

    def test_thread_resolution(self):
        self.assertEqual(resolve_threads(0), 1)
        with mock.patch.dict(os.environ, {"MMW_THREADS": "3"}):
            self.assertEqual(resolve_threads(), 3)
            self.assertEqual(resolve_threads(5), 5)
        with mock.patch.dict(os.environ, {"MMW_THREADS": "many"}):
            self.assertGreaterEqual(resolve_threads(), 1)


class TestPlanExpansion(unittest.TestCase):
    def test_point_count_and_curves(self):
        points = expand_plan(tiny_plan())
        self.assertEqual(len(points), 8)
        self.assertEqual([p.index for p in points], list(range(8)))
        names = sorted({p.curve.name for p in points})
        self.assertEqual(
            names, ["rate_snr_DBF_rfe4_b1", "rate_snr_DBF_rfe4_b2", "rate_snr_HBF_rfe2_b1", "rate_snr_HBF_rfe2_b2"]
        )
        hbf = next(p for p in points if p.curve.mode == "HBF")
        self.assertEqual(hbf.config.antennas_per_chain, 2)
        self.assertEqual(hbf.ee_file, "ee_rate_HBF_rfe2_snr0.csv")

    def test_mixed_curves(self):
        plan = tiny_plan(modes=["DBF-mixed"], mixed_high_counts=[1], mixed_high_bits=[5], mixed_low_bits=[1, 2])
        points = expand_plan(plan)
        self.assertEqual(len(points), 4)
        self.assertEqual(points[0].curve.name, "rate_snr_DBF-mixed_mh1_bh5_bl1")
        self.assertEqual(points[0].config.bits_per_chain, [5, 1, 1, 1])
        self.assertEqual(points[0].ee_file, "ee_rate_DBF-mixed_mh1_bh5_snr0.csv")

    def test_all_problems_collected(self):
        plan = tiny_plan(modes=["HBF", "DBF-mixed"], rf_chains=[3])
        with self.assertRaises(ConfigError) as ctx:
            expand_plan(plan)
        diagnostics = ctx.exception.diagnostics
        self.assertIn("modes: DBF-mixed needs at least one mixed_high_counts entry", diagnostics)
        self.assertIn("rf_chains: 3 does not divide rx_antennas (4)", diagnostics)
        self.assertEqual(len(diagnostics), len(set(diagnostics)))


class TestDocuments(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def write(self, name: str, text: str) -> Path:
        path = self.tmp / name
        path.write_text(text, encoding="utf-8")
        return path

    def test_bad_json_and_missing_file(self):
        with self.assertRaises(ConfigError) as ctx:
            read_json(self.write("bad.json", "{"))
        self.assertTrue(ctx.exception.diagnostics[0].startswith("line 1"))
        with self.assertRaises(ConfigError):
            read_json(self.tmp / "absent.json")

    def test_config_is_not_a_plan(self):
        path = self.write("cfg.json", json.dumps({"rx_antennas": 4, "rf_chains": 4}))
        with self.assertRaises(ConfigError):
            validate_plan(path)

    def test_plan_diagnostics_name_the_field(self):
        path = self.write("plan.json", json.dumps({"base": {"rx_antenna": 4}, "snr_db": [0]}))
        with self.assertRaises(ConfigError) as ctx:
            validate_plan(path)
        self.assertTrue(any(line.startswith("base.rx_antenna") for line in ctx.exception.diagnostics))

    def test_cli_validate_exit_codes(self):
        good = self.write("good.json", json.dumps({"rx_antennas": 4, "rf_chains": 4}))
        bad = self.write("bad.json", json.dumps({"rx_antennas": 5, "rf_chains": 4}))
        plan = self.write("plan.json", tiny_plan().model_dump_json())
        self.assertEqual(main(["validate", "--config", str(good)]), 0)
        self.assertEqual(main(["validate", "--config", str(plan)]), 0)
        self.assertEqual(main(["validate", "--config", str(bad)]), 2)


class TestRunSweep(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()

    def run_tiny(self, name: str, threads: int) -> tuple[Path, SweepManifest]:
        out = self.tmp / name
        manifest = run_sweep(
            tiny_plan(), out, threads=threads, mse_table=flat_table(), map_cache_dir=None, show_progress=False
        )
        return out, manifest

    def test_outputs_do_not_depend_on_thread_count(self):
        one, m1 = self.run_tiny("one", 1)
        three, m3 = self.run_tiny("three", 3)
        self.assertEqual(m1.files, m3.files)
        self.assertEqual(m3.threads, 3)
        for name in m1.files:
            self.assertEqual((one / name).read_bytes(), (three / name).read_bytes(), name)

    def test_files_rows_and_manifest(self):
        out, manifest = self.run_tiny("run", 2)
        expected = {
            "rate_snr_DBF_rfe4_b1.csv",
            "rate_snr_DBF_rfe4_b2.csv",
            "rate_snr_HBF_rfe2_b1.csv",
            "rate_snr_HBF_rfe2_b2.csv",
            "ee_rate_DBF_rfe4_snr0.csv",
            "ee_rate_DBF_rfe4_snr10.csv",
            "ee_rate_HBF_rfe2_snr0.csv",
            "ee_rate_HBF_rfe2_snr10.csv",
        }
        self.assertEqual(set(manifest.files), expected)
        self.assertEqual(manifest.points, 8)
        self.assertEqual(manifest.seed, 3)

        saved = SweepManifest.model_validate_json((out / MANIFEST_NAME).read_text(encoding="utf-8"))
        self.assertEqual(saved.config_hash, tiny_plan().config_hash())

        rate = pd.read_csv(out / "rate_snr_DBF_rfe4_b2.csv")
        self.assertEqual(list(rate.columns), ["x", "y", "yerr"])
        self.assertEqual(rate["x"].tolist(), [0.0, 10.0])
        self.assertLess(rate["y"][0], rate["y"][1])

        ee = pd.read_csv(out / "ee_rate_DBF_rfe4_snr10.csv")
        self.assertEqual(len(ee), 2)
        p_w = [
            frontend_power(SystemConfig(**{**TINY_BASE, "adc_bits": b})).total_w for b in (1, 2)
        ]
        np.testing.assert_allclose(ee["y"], ee["x"] / np.array(p_w), rtol=1e-7)
        # rows follow resolution, so the 2-bit point comes second
        self.assertAlmostEqual(ee["x"][1], rate["y"][1], delta=1e-6 * rate["y"][1])


if __name__ == "__main__":
    unittest.main()
