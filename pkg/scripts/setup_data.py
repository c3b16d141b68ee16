from __future__ import annotations

import json
from pathlib import Path
import sys

# Make sure we can import src.* when running as `python scripts/setup_data.py`
ROOT_DIR = Path(__file__).resolve().parents[1]
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from src.config import DATA_DIR  # type: ignore  # noqa: E402
from src.models import SweepPlan, SystemConfig  # type: ignore  # noqa: E402


FULL_BASE = {
    "rx_antennas": 64,
    "antennas_per_chain": 1,
    "rf_chains": 64,
    "users": 4,
    "max_delay": 128,
    "taps": 32,
    "n_bins": 128,
    "realizations": 30,
    "seed": 2024,
}

SNR_AXIS_DB = [-30.0 + 2.5 * i for i in range(25)]


def full_plan() -> dict:
    """Rate-vs-SNR and EE-vs-rate families for DBF and sub-array HBF."""

    return {
        "base": FULL_BASE,
        "snr_db": SNR_AXIS_DB,
        "modes": ["DBF", "HBF"],
        "bits": list(range(1, 9)),
        "rf_chains": [4, 8, 16, 32],
        "output_dir": "results/full",
    }


def mixed_plan() -> dict:
    """DBF with a few 5-bit chains and the rest at low resolution, next to the uniform curves."""

    return {
        "base": FULL_BASE,
        "snr_db": [-15.0, 0.0, 15.0],
        "modes": ["DBF", "DBF-mixed"],
        "bits": list(range(1, 9)),
        "mixed_high_counts": [8, 16, 32],
        "mixed_high_bits": [5],
        "mixed_low_bits": [1, 2, 3, 4],
        "output_dir": "results/mixed",
    }


def quick_plan() -> dict:
    """Small grid that finishes in well under a minute."""

    return {
        "base": {
            "rx_antennas": 8,
            "antennas_per_chain": 1,
            "rf_chains": 8,
            "users": 2,
            "max_delay": 16,
            "taps": 4,
            "n_bins": 16,
            "realizations": 3,
            "seed": 7,
        },
        "snr_db": [-10.0, 0.0, 10.0],
        "modes": ["DBF", "HBF"],
        "bits": [1, 2, 4],
        "rf_chains": [2, 4],
        "output_dir": "results/quick",
    }


def siso_config() -> dict:
    """Single antenna, flat channel, no impairments: the rate is log2(1 + SNR)."""

    return {
        "rx_antennas": 1,
        "rf_chains": 1,
        "users": 1,
        "max_delay": 1,
        "taps": 1,
        "n_bins": 1,
        "snr_db": 10.0,
        "evm_db": None,
        "quantize": False,
        "estimation_error": False,
        "realizations": 1,
    }


def write_json(path: Path, document: dict) -> None:
    path.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")


def main() -> None:
    DATA_DIR.mkdir(parents=True, exist_ok=True)

    for name, plan in (("full_plan", full_plan()), ("mixed_plan", mixed_plan()), ("quick_plan", quick_plan())):
        SweepPlan.model_validate(plan)
        path = DATA_DIR / f"{name}.json"
        print(f"Writing {name} to {path}")
        write_json(path, plan)

    SystemConfig.model_validate(siso_config())
    path = DATA_DIR / "siso_config.json"
    print(f"Writing single-antenna reference config to {path}")
    write_json(path, siso_config())

    print("Done.")


if __name__ == "__main__":  # pragma: no cover
    main()
