from __future__ import annotations

import sys
from pathlib import Path

from src.config import RESULTS_DIR
from src.results_display import run_display


if __name__ == "__main__":  # pragma: no cover
    run_display(Path(sys.argv[1]) if len(sys.argv) > 1 else RESULTS_DIR)
