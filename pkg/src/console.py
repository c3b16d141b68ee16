from __future__ import annotations

import logging

from rich.console import Console
from rich.logging import RichHandler

console = Console()

_HANDLER_NAME = "mmw-rich"


def setup_logging(level: int = logging.INFO) -> None:
    """Route stdlib logging through a RichHandler on the shared console.

    Safe to call more than once; only the level changes on repeat calls.
    """

    root = logging.getLogger()
    root.setLevel(level)
    for handler in root.handlers:
        if handler.get_name() == _HANDLER_NAME:
            handler.setLevel(level)
            return

    handler = RichHandler(console=console, show_path=False, rich_tracebacks=True)
    handler.set_name(_HANDLER_NAME)
    handler.setLevel(level)
    handler.setFormatter(logging.Formatter("%(message)s"))
    root.addHandler(handler)
