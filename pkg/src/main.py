#!/usr/bin/env python3
"""
Similarity-constraint GAN toolkit command line
Commands: train, eval, grid, timing

Exit codes: 0 success, 2 invalid configuration/arguments/checkpoint/dataset,
3 training aborted, an auxiliary training job failed or a metric broke down
numerically.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Callable, List, Optional, Tuple

from .checkpoint import load_checkpoint
from .config import ExperimentManifest, load_eval_config, load_train_config
from .errors import (
    ConfigurationError,
    IngestionError,
    InvalidArgumentError,
    NumericalError,
    TrainingAborted,
    TrainingFailure,
)
from .grid import emit_run_grids, emit_sample_grid
from .guardrails import RunLock, ensure_within
from .models import GridMode, MetricName, TrainConfig
from .settings import VERSION, get_data_root, get_device, logger

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_ABORTED = 3


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def resolve_train_config(args: argparse.Namespace) -> Tuple[TrainConfig, ExperimentManifest, Path]:
    """Config, manifest and output directory for a train invocation.

    Without ``--config`` the run is rebuilt from the manifest next to the
    ``--resume`` checkpoint (``<run>/checkpoints/<file>.pt``), with any
    overrides applied on top of its snapshot.
    """
    if args.config:
        config_path = Path(args.config)
        cfg = load_train_config(config_path, args.overrides)
        out_dir = Path(args.out or Path("runs") / config_path.stem)
        return cfg, ExperimentManifest.build(cfg, config_path, out_dir, args.overrides), out_dir
    if not args.resume:
        raise ConfigurationError("train needs --config, or --resume with a checkpoint of an earlier run", key="config")
    run_dir = Path(args.resume).resolve().parent.parent
    previous = ExperimentManifest.read(run_dir / "manifest.json")
    cfg = previous.train_config(args.overrides)
    out_dir = Path(args.out) if args.out else run_dir
    logger.info("Rebuilt config from %s (hash %s)", run_dir / "manifest.json", previous.content_hash[:12])
    manifest = ExperimentManifest.build(cfg, Path(previous.config_path), out_dir,
                                        previous.overrides + list(args.overrides))
    return cfg, manifest, out_dir


def cmd_train(args: argparse.Namespace) -> int:
    from .train import train_model

    cfg, manifest, out_dir = resolve_train_config(args)
    with RunLock(out_dir):
        manifest.write(ensure_within(out_dir, out_dir / "manifest.json"))
        resume = Path(args.resume) if args.resume else None
        result = train_model(cfg, out_dir=out_dir, resume_from=resume)
        emit_run_grids(result.bundle, cfg.model, cfg.run.grid_rows, cfg.run.grid_cols, cfg.run.seed,
                       ensure_within(out_dir, out_dir))
    logger.info("Run finished after %d steps; final checkpoint %s", result.steps, result.last_checkpoint)
    print(out_dir)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    from .metrics.evaluate import evaluate_checkpoint
    from .metrics.report import MetricReport, compare_reports

    device = get_device(args.device or "")
    checkpoint = load_checkpoint(args.checkpoint, device=device, with_optimizers=False)
    eval_cfg = load_eval_config(args.config, args.overrides)
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).resolve().parent.parent
    metric = MetricName(args.metric)
    with RunLock(out_dir):
        report = evaluate_checkpoint(checkpoint, metric, eval_cfg, seed=args.seed,
                                     cache_dir=get_data_root() / "extractors", device=device)
        if args.baseline:
            compare_reports(report, MetricReport.read(Path(args.baseline)))
        report.write(ensure_within(out_dir, out_dir / f"report_{metric.value}_s{args.seed}.json"))
    print(report.format_line())
    return EXIT_OK


def cmd_grid(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint, device=get_device(args.device or ""), with_optimizers=False)
    mode = GridMode(args.mode)
    if args.out:
        path = Path(args.out)
    else:
        path = Path(args.checkpoint).resolve().parent.parent / f"grid_{mode.value}_s{args.seed}.png"
    out_dir = path.parent
    with RunLock(out_dir):
        written = emit_sample_grid(checkpoint.bundle, checkpoint.config.model, mode, args.rows, args.cols,
                                   args.seed, ensure_within(out_dir, path), slot=args.slot)
    print(written)
    return EXIT_OK


def cmd_timing(args: argparse.Namespace) -> int:
    from .train import measure_step_time

    cfg = load_train_config(args.config, args.overrides)
    timing = measure_step_time(cfg, warmup=args.warmup, measured=args.measured,
                               device=get_device(args.device or cfg.run.device))
    print(f"objective: {cfg.objective.kind.value}")
    for name in ("total", "forward", "sc", "backward", "optimizer"):
        print(f"{name}: {getattr(timing, name):.6f}s")
    print(f"sc_pair_evaluations: {timing.pair_evaluations}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scgan-toolkit",
        description="Train and evaluate similarity-constraint GANs and their baselines",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {VERSION}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log per-step debug detail")
    sub = parser.add_subparsers(dest="command", required=True)

    train = sub.add_parser("train", help="Train a model from a JSON config")
    train.add_argument("--config", help="Experiment config (JSON); optional with --resume")
    train.add_argument("--out", help="Run directory (default: runs/<config name>)")
    train.add_argument("--resume", help="Checkpoint of this run to continue from")
    train.add_argument("overrides", nargs="*", metavar="section.key=value",
                       help="Config overrides, value parsed as JSON")
    train.set_defaults(handler=cmd_train)

    evaluate = sub.add_parser("eval", help="Evaluate a checkpoint with one metric")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--metric", required=True, choices=[m.value for m in MetricName])
    evaluate.add_argument("--config", help="Evaluation config (JSON with parzen/fid/factor sections)")
    evaluate.add_argument("--seed", type=int, default=0)
    evaluate.add_argument("--out", help="Report directory (default: the checkpoint's run directory)")
    evaluate.add_argument("--baseline", help="Earlier report to check comparability against")
    evaluate.add_argument("--device", help="cpu, cuda or auto (default: SCGAN_DEVICE)")
    evaluate.add_argument("overrides", nargs="*", metavar="section.key=value")
    evaluate.set_defaults(handler=cmd_eval)

    grid = sub.add_parser("grid", help="Render a sample grid from a checkpoint")
    grid.add_argument("--checkpoint", required=True)
    grid.add_argument("--mode", choices=[m.value for m in GridMode], default=GridMode.FIX_C_PER_COLUMN.value)
    grid.add_argument("--rows", type=int, default=10)
    grid.add_argument("--cols", type=int, default=10)
    grid.add_argument("--seed", type=int, default=0)
    grid.add_argument("--slot", type=int, default=0, help="Continuous code slot swept in sweep mode")
    grid.add_argument("--out", help="PNG path (default: inside the checkpoint's run directory)")
    grid.add_argument("--device", help="cpu, cuda or auto (default: SCGAN_DEVICE)")
    grid.set_defaults(handler=cmd_grid)

    timing = sub.add_parser("timing", help="Mean training step time and its decomposition")
    timing.add_argument("--config", required=True)
    timing.add_argument("--warmup", type=int, default=3)
    timing.add_argument("--measured", type=int, default=10)
    timing.add_argument("--device", help="cpu, cuda or auto (default: run.device or SCGAN_DEVICE)")
    timing.add_argument("overrides", nargs="*", metavar="section.key=value")
    timing.set_defaults(handler=cmd_timing)
    return parser


def run_command(handler: Callable[[argparse.Namespace], int], args: argparse.Namespace) -> int:
    """Run a command handler and map toolkit errors onto exit codes."""
    try:
        return handler(args)
    except (TrainingAborted, TrainingFailure, NumericalError) as e:
        logger.error("%s", e)
        checkpoint = getattr(e, "last_checkpoint", None)
        if checkpoint:
            logger.error("Resume with --resume %s", checkpoint)
        return EXIT_ABORTED
    except ConfigurationError as e:
        logger.error("%s%s", e, f" (key: {e.key})" if e.key else "")
        return EXIT_INVALID
    except (InvalidArgumentError, IngestionError) as e:
        logger.error("%s", e)
        return EXIT_INVALID


# Main execution
def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the scgan-toolkit CLI"""
    args = build_parser().parse_args(argv)
    if args.verbose:
        logging.getLogger().setLevel(logging.DEBUG)
    logger.info(f"scgan-toolkit v{VERSION}: {args.command}")
    return run_command(args.handler, args)


if __name__ == "__main__":
    sys.exit(main())
