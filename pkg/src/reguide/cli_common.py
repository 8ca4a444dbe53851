"""Options and plumbing shared by the CLI command modules."""

import json
from pathlib import Path
from typing import Any

import typer
from loguru import logger

from reguide.artifacts.checkpoint import Checkpoint, load_checkpoint
from reguide.artifacts.manifest import write_manifest
from reguide.config import RunConfig, ScheduleConfig
from reguide.diffusion.denoiser import Denoiser
from reguide.diffusion.schedule import NoiseSchedule, make_schedule
from reguide.reward.model import RewardModel
from reguide.synthdata.generator import SEED_BITS
from reguide.utils import current_log_level

DATASET_FILE = "dataset.rgds"
DENOISER_FILE = "denoiser.ckpt"
REWARD_FILE = "reward.ckpt"
INDEX_FILE = "index.rgix"
SAMPLES_FILE = "samples.rgds"
TRACE_FILE = "trace.jsonl"

SEED_OPTION = typer.Option(
    0,
    "--seed",
    envvar="REGUIDE_SEED",
    min=0,
    max=(1 << SEED_BITS) - 1,
    help="Global seed; falls back to $REGUIDE_SEED.",
)
OUT_DIR_OPTION = typer.Option(Path("run"), "--out-dir", help="Directory receiving the artifacts.")
CONFIG_OPTION = typer.Option(None, "--config", help="YAML file with one block per stage.")
WORKERS_OPTION = typer.Option(1, "--workers", min=1, help="Parallel worker processes.")


def make_schedule_from(config: ScheduleConfig) -> NoiseSchedule:
    return make_schedule(config.T, config.beta_start, config.beta_end, config.kind)


def load_denoiser(path: Path) -> tuple[Denoiser, NoiseSchedule, Checkpoint]:
    """Denoiser plus the schedule it was trained with."""
    checkpoint = load_checkpoint(path, "denoiser")
    sched_config = ScheduleConfig(**checkpoint.extra.get("schedule", {}))
    return Denoiser.from_checkpoint(checkpoint), make_schedule_from(sched_config), checkpoint


def load_reward(path: Path) -> tuple[RewardModel, Checkpoint]:
    checkpoint = load_checkpoint(path, "reward")
    return RewardModel.from_checkpoint(checkpoint), checkpoint


def write_report(out_dir: Path, name: str, text: str, payload: dict[str, Any]) -> list[Path]:
    """Write `name.txt` and `name.json`; returns both paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    text_path, json_path = out_dir / f"{name}.txt", out_dir / f"{name}.json"
    text_path.write_text(text)
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return [text_path, json_path]


def finish_run(
    command: str,
    seed: int,
    out_dir: Path,
    options: dict[str, Any],
    checkpoints: dict[str, str] | None = None,
    artifacts: list[Path] | None = None,
) -> None:
    run = RunConfig(
        command=command,
        seed=seed,
        out_dir=out_dir,
        log_level=current_log_level(),
        options=options,
    )
    path = write_manifest(out_dir, run, checkpoints, artifacts)
    logger.success(f"{command} finished; manifest at {path}")
