from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from rich.syntax import Syntax

from .chanest import MseTable, build_mse_table
from .config import MSE_SNR_GRID_DB, THREADS_ENV_VAR
from .console import console, setup_logging
from .errors import ConfigError, SimulationError
from .sweep import (
    is_plan_document,
    read_json,
    resolve_threads,
    run_sweep,
    summary_table,
    validate_config,
    validate_plan,
)
from .verify import oracle_table, run_oracles

logger = logging.getLogger(__name__)


def _print_header(title: str) -> None:
    console.rule(f"[bold]{title}")


def _cmd_simulate(args: argparse.Namespace) -> int:
    plan, points = validate_plan(args.config)
    if args.seed is not None:
        plan = plan.model_copy(update={"base": plan.base.model_copy(update={"seed": args.seed})})
    table = MseTable.from_csv(args.mse_table) if args.mse_table else None

    out_dir = Path(args.out)
    _print_header(f"Sweep: {len(points)} point(s), {plan.base.realizations} realization(s) each")
    manifest = run_sweep(plan, out_dir, threads=args.threads, mse_table=table)
    console.print(summary_table(out_dir, manifest))
    console.print(f"[green]Done in {manifest.wall_time_s:.1f} s; manifest written to {out_dir}.[/green]")
    return 0


def _cmd_mse_table(args: argparse.Namespace) -> int:
    data = read_json(args.config)
    cfg = validate_plan(args.config)[0].base if is_plan_document(data) else validate_config(args.config)
    table = build_mse_table(cfg, MSE_SNR_GRID_DB, threads=resolve_threads(args.threads))
    out = Path(args.out)
    table.to_csv(out)
    console.print(f"[green]Wrote {len(table.snr_db)} MSE points to {out}.[/green]")
    return 0


def _cmd_verify(args: argparse.Namespace) -> int:
    _print_header("Oracle suite")
    checks = run_oracles(seed=args.seed, samples=args.samples, draws=args.draws)
    console.print(oracle_table(checks))
    failed = [c.name for c in checks if not c.passed]
    if failed:
        console.print(f"[red]{len(failed)} check(s) failed: {', '.join(failed)}[/red]")
        return 1
    console.print(f"[green]All {len(checks)} checks passed.[/green]")
    return 0


def _cmd_validate(args: argparse.Namespace) -> int:
    data = read_json(args.config)
    if is_plan_document(data):
        plan, points = validate_plan(args.config)
        console.print(f"[green]Valid sweep plan with {len(points)} point(s).[/green]")
        console.print(Syntax(plan.model_dump_json(indent=2), "json"))
    else:
        cfg = validate_config(args.config)
        console.print("[green]Valid system config.[/green]")
        console.print(Syntax(cfg.model_dump_json(indent=2), "json"))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmw-rate",
        description="Achievable rate and energy efficiency of mmWave receivers with low-resolution ADCs.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="run a sweep plan and write CSV curves")
    simulate.add_argument("--config", type=Path, required=True, help="sweep plan JSON")
    simulate.add_argument("--out", type=Path, required=True, help="output directory")
    simulate.add_argument("--seed", type=int, default=None, help="override the plan's master seed")
    simulate.add_argument("--threads", type=int, default=None, help=f"worker threads (else ${THREADS_ENV_VAR}, else CPU count)")
    simulate.add_argument("--mse-table", type=Path, default=None, help="precomputed MSE table CSV")
    simulate.set_defaults(func=_cmd_simulate)

    mse = sub.add_parser("mse-table", help="tabulate channel-estimation MSE against SNR")
    mse.add_argument("--config", type=Path, required=True, help="system config or sweep plan JSON")
    mse.add_argument("--out", type=Path, required=True, help="output CSV")
    mse.add_argument("--threads", type=int, default=None)
    mse.set_defaults(func=_cmd_mse_table)

    verify = sub.add_parser("verify", help="run the analytic-vs-sampled oracle suite")
    verify.add_argument("--seed", type=int, default=0)
    verify.add_argument("--samples", type=int, default=1_000_000, help="samples per quantizer oracle")
    verify.add_argument("--draws", type=int, default=10_000, help="channel draws per estimation oracle")
    verify.set_defaults(func=_cmd_verify)

    validate = sub.add_parser("validate", help="check a config or plan and echo it normalized")
    validate.add_argument("--config", type=Path, required=True)
    validate.set_defaults(func=_cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(logging.DEBUG if args.verbose else logging.INFO)
    try:
        return args.func(args)
    except ConfigError as e:
        console.print(str(e), style="red", markup=False)
        return 2
    except SimulationError as e:
        console.print(f"{type(e).__name__}: {e}", style="red", markup=False)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
