from __future__ import annotations

from pathlib import Path
import sys

# Ensure we can import src.* when running as `python scripts/build_tables.py`
ROOT_DIR = Path(__file__).resolve().parents[1]
if str(ROOT_DIR) not in sys.path:
    sys.path.insert(0, str(ROOT_DIR))

from src.chanest import build_mse_table  # type: ignore  # noqa: E402
from src.config import DATA_DIR, DEFAULT_GRID_THRESHOLD, MAP_CACHE_DIR  # type: ignore  # noqa: E402
from src.console import setup_logging  # type: ignore  # noqa: E402
from src.models import SystemConfig  # type: ignore  # noqa: E402
from src.quantization import CorrelationMapCache, design_quantizer  # type: ignore  # noqa: E402
from src.sweep import resolve_threads  # type: ignore  # noqa: E402


def main() -> None:
    setup_logging()

    print("Building same-resolution correlation maps for 1..8 bits...")
    maps = CorrelationMapCache(DEFAULT_GRID_THRESHOLD, MAP_CACHE_DIR)
    maps.prepare((design_quantizer(b), design_quantizer(b)) for b in range(1, 9))
    print(f"Done; {len(maps)} maps cached under {MAP_CACHE_DIR}.")

    print("Building the default channel-estimation MSE table...")
    table = build_mse_table(SystemConfig(), threads=resolve_threads())
    path = DATA_DIR / "mse_table.csv"
    table.to_csv(path)
    print(f"Done; wrote {path}.")


if __name__ == "__main__":  # pragma: no cover
    main()
