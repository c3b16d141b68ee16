from __future__ import annotations

import threading
import time
from pathlib import Path
from typing import Callable

import pandas as pd
from rich.layout import Layout
from rich.live import Live
from rich.table import Table

from .config import DISPLAY_REFRESH_SECONDS, MANIFEST_NAME, RESULTS_DIR
from .console import console


def _with_row_count_suffix(title: str, shown: int, total: int) -> str:
    if total <= shown:
        return title
    return f"{title} (showing last {shown} / {total})"


def _read_curves(out_dir: Path, prefix: str) -> pd.DataFrame:
    """One row per CSV with the given prefix: name, rows written and the last row."""

    rows = []
    for path in sorted(out_dir.glob(f"{prefix}*.csv"), key=lambda p: p.stat().st_mtime):
        try:
            df = pd.read_csv(path)
        except (pd.errors.EmptyDataError, pd.errors.ParserError):
            # caught mid-rewrite; the next refresh picks it up
            continue
        last = df.iloc[-1] if len(df) else None
        rows.append(
            {
                "curve": path.stem,
                "points": len(df),
                "x": None if last is None else float(last["x"]),
                "y": None if last is None else float(last["y"]),
                "yerr": None if last is None else float(last["yerr"]),
                "best_y": None if last is None else float(df["y"].max()),
            }
        )
    return pd.DataFrame(rows, columns=["curve", "points", "x", "y", "yerr", "best_y"])


def _fmt(value: object, spec: str = ".4g") -> str:
    return "" if value is None or pd.isna(value) else format(value, spec)


def _make_rate_table(df: pd.DataFrame, *, shown_rows: int | None = None, total_rows: int | None = None) -> Table:
    title = "Rate vs SNR curves"
    if shown_rows is not None and total_rows is not None:
        title = _with_row_count_suffix(title, shown_rows, total_rows)

    table = Table(title=title, expand=True)
    table.add_column("curve", style="cyan", overflow="fold", ratio=3)
    table.add_column("points", justify="right", ratio=1)
    table.add_column("last SNR [dB]", justify="right", ratio=1)
    table.add_column("mean rate [bit/s/Hz]", style="green", justify="right", ratio=2)

    for row in df.itertuples(index=False):
        table.add_row(str(row.curve), str(row.points), _fmt(row.x, "g"), f"{_fmt(row.y)} ± {_fmt(row.yerr, '.2g')}")
    return table


def _make_ee_table(df: pd.DataFrame, *, shown_rows: int | None = None, total_rows: int | None = None) -> Table:
    title = "Energy efficiency vs rate"
    if shown_rows is not None and total_rows is not None:
        title = _with_row_count_suffix(title, shown_rows, total_rows)

    table = Table(title=title, expand=True)
    table.add_column("group", style="cyan", overflow="fold", ratio=3)
    table.add_column("resolutions", justify="right", ratio=1)
    table.add_column("last rate", justify="right", ratio=1)
    table.add_column("best EE [(bit/s/Hz)/W]", style="magenta", justify="right", ratio=2)

    for row in df.itertuples(index=False):
        table.add_row(str(row.curve), str(row.points), _fmt(row.x), _fmt(row.best_y))
    return table


def _fit_df_to_height(
    *,
    df: pd.DataFrame,
    make_table: Callable[[pd.DataFrame, int, int], Table],
    target_height: int,
    target_width: int,
) -> tuple[pd.DataFrame, int, int]:
    """Largest tail of `df` whose table renders within target_height.

    Full-screen Live cannot scroll, so the newest rows stay visible under a
    fixed header.
    """

    total = len(df)
    if total == 0:
        return df, 0, 0

    options = console.options.update(width=target_width)
    if len(console.render_lines(make_table(df, total, total), options=options)) <= target_height:
        return df, total, total

    low, high, best = 0, total, 0
    while low <= high:
        mid = (low + high) // 2
        rendered_height = len(console.render_lines(make_table(df.tail(mid), mid, total), options=options))
        if rendered_height <= target_height:
            best = mid
            low = mid + 1
        else:
            high = mid - 1

    return df.tail(best), best, total


def _build_layout(*, out_dir: Path, console_width: int, console_height: int) -> Layout:
    top_height = max(1, console_height // 2)
    bottom_height = max(1, console_height - top_height)
    slack = 1

    rate_df = _read_curves(out_dir, "rate_snr_")
    ee_df = _read_curves(out_dir, "ee_rate_")

    fitted_rate, shown_r, total_r = _fit_df_to_height(
        df=rate_df,
        make_table=lambda d, shown, total: _make_rate_table(d, shown_rows=shown, total_rows=total),
        target_height=max(1, top_height - slack),
        target_width=console_width,
    )
    fitted_ee, shown_e, total_e = _fit_df_to_height(
        df=ee_df,
        make_table=lambda d, shown, total: _make_ee_table(d, shown_rows=shown, total_rows=total),
        target_height=max(1, bottom_height - slack),
        target_width=console_width,
    )

    layout = Layout()
    layout.split_column(Layout(name="top", ratio=1), Layout(name="bottom", ratio=1))
    layout["top"].update(_make_rate_table(fitted_rate, shown_rows=shown_r, total_rows=total_r))
    layout["bottom"].update(_make_ee_table(fitted_ee, shown_rows=shown_e, total_rows=total_e))
    return layout


def _display_loop(out_dir: Path, stop_event: threading.Event) -> None:
    with Live(console=console, screen=True, auto_refresh=False) as live:
        while not stop_event.is_set():
            size = live.console.size
            live.update(_build_layout(out_dir=out_dir, console_width=size.width, console_height=size.height), refresh=True)
            if (out_dir / MANIFEST_NAME).exists():
                # sweep finished; show the final state once more and keep it up
                time.sleep(DISPLAY_REFRESH_SECONDS * 4)
            time.sleep(DISPLAY_REFRESH_SECONDS)


def run_display(out_dir: Path = RESULTS_DIR) -> None:
    """Keep a live view of a sweep output directory until Ctrl+C."""

    out_dir.mkdir(parents=True, exist_ok=True)
    stop_event = threading.Event()
    display_thread = threading.Thread(target=_display_loop, args=(out_dir, stop_event), daemon=True)
    display_thread.start()

    try:
        while True:
            time.sleep(0.2)
    except KeyboardInterrupt:
        console.print("\n[yellow]Stopping live display...[/yellow]")
        stop_event.set()
        display_thread.join(timeout=1.0)
