from __future__ import annotations

import json
import logging
import os
import time
from collections import defaultdict
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from pydantic import ValidationError
from rich.progress import BarColumn, MofNCompleteColumn, Progress, TextColumn, TimeElapsedColumn
from rich.table import Table

from .channel import ChannelRealization, sample_channel
from .chanest import MseTable, build_mse_table, estimation_grid
from .config import CSV_FLOAT_FORMAT, MANIFEST_NAME, MAP_CACHE_DIR, PACKAGE_VERSION, RESULTS_DIR, THREADS_ENV_VAR
from .console import console
from .errors import ConfigError
from .models import RateResult, SweepManifest, SweepPlan, SystemConfig
from .power import energy_efficiency, frontend_power
from .quantization import CorrelationMapCache
from .rate import quantizer_pairs, sum_rate

logger = logging.getLogger(__name__)

CHANNEL_STREAM = 0


def derive_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent generator for (stream, index) under a master seed."""

    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(stream, index)))


def resolve_threads(requested: int | None = None) -> int:
    if requested is not None:
        return max(1, requested)
    env = os.environ.get(THREADS_ENV_VAR)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            logger.warning("ignoring non-integer %s=%r", THREADS_ENV_VAR, env)
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# Parsing and validation
# ---------------------------------------------------------------------------


def _diagnostics(error: ValidationError) -> list[str]:
    lines: list[str] = []
    for item in error.errors():
        loc = ".".join(str(p) for p in item.get("loc", ()))
        msg = str(item.get("msg", "")).removeprefix("Value error, ")
        for part in msg.split("; "):
            lines.append(f"{loc}: {part}" if loc else part)
    return lines


def read_json(path: Path) -> Any:
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON", [f"line {e.lineno} column {e.colno}: {e.msg}"]) from e


def validate_config(path: Path) -> SystemConfig:
    """Parse one SystemConfig document; unknown keys are errors."""

    data = read_json(path)
    try:
        return SystemConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"{path} is not a valid system config", _diagnostics(e)) from e


def is_plan_document(data: Any) -> bool:
    return isinstance(data, dict) and "base" in data


def validate_plan(path: Path) -> tuple[SweepPlan, list["SweepPoint"]]:
    """Parse a SweepPlan and validate every expanded point before anything runs."""

    data = read_json(path)
    if not is_plan_document(data):
        raise ConfigError(f"{path} is a system config, not a sweep plan", ["a sweep plan needs a 'base' block"])
    try:
        plan = SweepPlan.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"{path} is not a valid sweep plan", _diagnostics(e)) from e
    return plan, expand_plan(plan)


# ---------------------------------------------------------------------------
# Plan expansion
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Curve:
    """One rate-vs-SNR curve; `ee_group` names the EE-vs-rate file it feeds, ordered by `order`."""

    name: str
    mode: str
    overrides: dict[str, Any]
    ee_group: str
    order: int


@dataclass(frozen=True)
class SweepPoint:
    index: int
    curve: Curve
    snr_db: float
    config: SystemConfig

    @property
    def ee_file(self) -> str:
        return f"{self.curve.ee_group}_snr{self.snr_db:g}.csv"


def plan_curves(plan: SweepPlan) -> list[Curve]:
    m_r = plan.base.rx_antennas
    curves: list[Curve] = []
    for mode in plan.modes:
        if mode == "DBF":
            for b in plan.bits:
                curves.append(
                    Curve(
                        name=f"rate_snr_DBF_rfe{m_r}_b{b}",
                        mode=mode,
                        overrides={"antennas_per_chain": 1, "rf_chains": m_r, "adc_bits": b, "mixed": None},
                        ee_group=f"ee_rate_DBF_rfe{m_r}",
                        order=b,
                    )
                )
        elif mode == "HBF":
            for m_rfe in plan.rf_chains:
                m_c = m_r // m_rfe if m_rfe > 0 else 0
                for b in plan.bits:
                    curves.append(
                        Curve(
                            name=f"rate_snr_HBF_rfe{m_rfe}_b{b}",
                            mode=mode,
                            overrides={"antennas_per_chain": m_c, "rf_chains": m_rfe, "adc_bits": b, "mixed": None},
                            ee_group=f"ee_rate_HBF_rfe{m_rfe}",
                            order=b,
                        )
                    )
        else:
            for m_h in plan.mixed_high_counts:
                for b_h in plan.mixed_high_bits:
                    for b_l in plan.mixed_low_bits:
                        curves.append(
                            Curve(
                                name=f"rate_snr_DBF-mixed_mh{m_h}_bh{b_h}_bl{b_l}",
                                mode=mode,
                                overrides={
                                    "antennas_per_chain": 1,
                                    "rf_chains": m_r,
                                    "mixed": {"high_count": m_h, "high_bits": b_h, "low_bits": b_l},
                                },
                                ee_group=f"ee_rate_DBF-mixed_mh{m_h}_bh{b_h}",
                                order=b_l,
                            )
                        )
    return curves


def expand_plan(plan: SweepPlan) -> list[SweepPoint]:
    """Every (curve, SNR) point as a validated SystemConfig; all problems are reported together."""

    base = plan.base.model_dump()
    problems: list[str] = []
    points: list[SweepPoint] = []

    if "DBF-mixed" in plan.modes and not plan.mixed_high_counts:
        problems.append("modes: DBF-mixed needs at least one mixed_high_counts entry")
    if "HBF" in plan.modes:
        for m_rfe in plan.rf_chains:
            if m_rfe < 1 or plan.base.rx_antennas % m_rfe:
                problems.append(f"rf_chains: {m_rfe} does not divide rx_antennas ({plan.base.rx_antennas})")

    for curve in plan_curves(plan):
        for snr in plan.snr_db:
            doc = {**base, **curve.overrides, "mode": curve.mode, "snr_db": snr}
            try:
                cfg = SystemConfig.model_validate(doc)
            except ValidationError as e:
                problems.extend(f"{curve.name} @ {snr:g} dB: {line}" for line in _diagnostics(e))
                continue
            points.append(SweepPoint(index=len(points), curve=curve, snr_db=snr, config=cfg))

    if problems:
        # one line per distinct problem; the same issue usually repeats across SNR points
        raise ConfigError("sweep plan has invalid points", list(dict.fromkeys(problems)))
    logger.info("sweep plan expands to %d point(s) on %d curve(s)", len(points), len({p.curve.name for p in points}))
    return points


# ---------------------------------------------------------------------------
# Running
# ---------------------------------------------------------------------------


@dataclass
class _Outputs:
    out_dir: Path
    rate_rows: dict[str, list[dict[str, float]]] = field(default_factory=lambda: defaultdict(list))
    ee_rows: dict[str, list[tuple[int, dict[str, float]]]] = field(default_factory=lambda: defaultdict(list))
    files: set[str] = field(default_factory=set)

    def record(self, point: SweepPoint, result: RateResult) -> None:
        self.rate_rows[point.curve.name].append({"x": point.snr_db, "y": result.mean, "yerr": result.stderr})
        self._write(f"{point.curve.name}.csv", self.rate_rows[point.curve.name])

        p_r = frontend_power(point.config)
        ee_row = {
            "x": result.mean,
            "y": energy_efficiency(result.mean, p_r.total_mw),
            "yerr": result.stderr / p_r.total_w,
        }
        rows = self.ee_rows[point.ee_file]
        rows.append((point.curve.order, ee_row))
        rows.sort(key=lambda item: item[0])
        self._write(point.ee_file, [row for _, row in rows])

    def _write(self, name: str, rows: list[dict[str, float]]) -> None:
        path = self.out_dir / name
        pd.DataFrame(rows, columns=["x", "y", "yerr"]).to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        self.files.add(name)


def _mse_tables(points: list[SweepPoint], fixed: MseTable | None, threads: int) -> dict[tuple, MseTable]:
    tables: dict[tuple, MseTable] = {}
    for p in points:
        cfg = p.config
        if not cfg.estimation_error:
            continue
        key = (estimation_grid(cfg), cfg.mode == "HBF")
        if key in tables:
            continue
        tables[key] = fixed if fixed is not None else build_mse_table(cfg, threads=threads)
    return tables


def run_sweep(
    plan: SweepPlan,
    out_dir: Path | None = None,
    *,
    threads: int | None = None,
    mse_table: MseTable | None = None,
    map_cache_dir: Path | None = MAP_CACHE_DIR,
    show_progress: bool = True,
) -> SweepManifest:
    """Run every point of `plan`, rewriting each curve CSV as its points complete.

    Channel realization r is drawn once from (seed, r) and shared by every
    point, so curves are compared on common channels and the output does not
    depend on the thread count.
    """

    started = time.perf_counter()
    points = expand_plan(plan)
    out = Path(out_dir or plan.output_dir or RESULTS_DIR)
    out.mkdir(parents=True, exist_ok=True)
    workers = resolve_threads(threads)

    base = plan.base
    channels: list[ChannelRealization] = [
        sample_channel(base, derive_rng(base.seed, CHANNEL_STREAM, r)) for r in range(base.realizations)
    ]

    maps = CorrelationMapCache(base.grid_threshold, map_cache_dir)
    pairs = quantizer_pairs(p.config for p in points)
    logger.info("preparing %d correlation map(s)", len(pairs))
    maps.prepare(pairs)
    tables = _mse_tables(points, mse_table, workers)

    outputs = _Outputs(out_dir=out)
    logger.info("running %d point(s) x %d realization(s) on %d thread(s)", len(points), len(channels), workers)

    progress = Progress(
        TextColumn("[bold blue]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        console=console,
        disable=not show_progress,
    )
    with progress, ThreadPoolExecutor(max_workers=workers) as pool:
        task = progress.add_task("sweep", total=len(points))
        futures: list[list[Future[RateResult]]] = []
        for p in points:
            table = tables.get((estimation_grid(p.config), p.config.mode == "HBF"))
            futures.append([pool.submit(sum_rate, p.config, ch, table, maps) for ch in channels])

        for p, pending in zip(points, futures):
            result = RateResult.from_realizations([f.result() for f in pending])
            outputs.record(p, result)
            progress.update(task, advance=1, description=f"{p.curve.name} @ {p.snr_db:g} dB")

    manifest = SweepManifest(
        seed=base.seed,
        config_hash=plan.config_hash(),
        plan=plan,
        version=PACKAGE_VERSION,
        threads=workers,
        points=len(points),
        files=sorted(outputs.files),
        wall_time_s=time.perf_counter() - started,
    )
    (out / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2), encoding="utf-8")
    logger.info("wrote %d file(s) and %s to %s", len(outputs.files), MANIFEST_NAME, out)
    return manifest


def summary_table(out_dir: Path, manifest: SweepManifest) -> Table:
    table = Table(title=f"Sweep results in {out_dir}")
    table.add_column("file", style="cyan")
    table.add_column("rows", justify="right")
    table.add_column("last x", justify="right")
    table.add_column("last y", justify="right", style="green")
    for name in manifest.files:
        df = pd.read_csv(out_dir / name)
        last = df.iloc[-1] if len(df) else None
        table.add_row(
            name,
            str(len(df)),
            "" if last is None else f"{last['x']:.4g}",
            "" if last is None else f"{last['y']:.4g}",
        )
    return table
