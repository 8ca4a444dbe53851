"""Module containing the CLI commands training the denoiser and the reward model."""

from pathlib import Path

import typer
from loguru import logger

from reguide.artifacts.checkpoint import save_checkpoint
from reguide.cli_common import (
    CONFIG_OPTION,
    DENOISER_FILE,
    INDEX_FILE,
    OUT_DIR_OPTION,
    REWARD_FILE,
    SEED_OPTION,
    finish_run,
    load_reward,
    make_schedule_from,
)
from reguide.config import (
    DenoiserConfig,
    DenoiserTrainConfig,
    RewardModelConfig,
    RewardTrainConfig,
    ScheduleConfig,
    resolve_config,
)
from reguide.diffusion.denoiser import train_denoiser
from reguide.retrieval.index import build_index, save_index
from reguide.reward.training import train_reward_model
from reguide.synthdata.storage import load_dataset
from reguide.utils import handle_domain_errors

app = typer.Typer()

DATASET_OPTION = typer.Option(..., "--dataset", help="Dataset file written by gen-data.")
DIFFUSION_STEPS_OPTION = typer.Option(
    None, "--diffusion-steps", min=1, help="Number of diffusion timesteps T."
)
SCHEDULE_OPTION = typer.Option(None, "--schedule", help="Beta schedule: linear or quadratic.")


@app.command(name="train-denoiser", help="Train the noise-prediction network on the train split.")
@handle_domain_errors
def train_denoiser_command(
    dataset_path: Path = DATASET_OPTION,
    out_dir: Path = OUT_DIR_OPTION,
    seed: int = SEED_OPTION,
    config_file: Path | None = CONFIG_OPTION,
    steps: int | None = typer.Option(None, "--steps", min=1, help="Optimisation steps."),
    batch_size: int | None = typer.Option(None, "--batch-size", min=1, help="Batch size."),
    lr: float | None = typer.Option(None, "--lr", help="Learning rate."),
    hidden: int | None = typer.Option(None, "--hidden", min=1, help="Residual block width."),
    diffusion_steps: int | None = DIFFUSION_STEPS_OPTION,
    schedule: str | None = SCHEDULE_OPTION,
    progress: bool = typer.Option(False, "--progress", help="Show a progress bar."),
):
    """Train eps_theta and write `out_dir/denoiser.ckpt`.

    Args:
        dataset_path: Dataset file.
        out_dir: Output directory.
        seed: Seed of initialisation and batches.
        config_file: Optional YAML with `schedule`, `denoiser` and `denoiser_train` blocks.
        steps: Optimisation steps.
        batch_size: Batch size.
        lr: Learning rate.
        hidden: Residual block width.
        diffusion_steps: T.
        schedule: Beta schedule kind.
        progress: Show a tqdm bar.
    """
    dataset = load_dataset(dataset_path)
    train = dataset.split("train")
    sched_config = resolve_config(
        ScheduleConfig, config_file, "schedule", T=diffusion_steps, kind=schedule
    )
    config = resolve_config(
        DenoiserConfig,
        config_file,
        "denoiser",
        n_frames=dataset.n_frames,
        dim=dataset.dim,
        hidden=hidden,
    )
    train_config = resolve_config(
        DenoiserTrainConfig,
        config_file,
        "denoiser_train",
        steps=steps,
        batch_size=batch_size,
        lr=lr,
    )
    sched = make_schedule_from(sched_config)
    denoiser = train_denoiser(train, sched, config, train_config, seed, show_progress=progress)

    checkpoint = denoiser.to_checkpoint()
    checkpoint.extra["schedule"] = sched_config.model_dump()
    path = out_dir / DENOISER_FILE
    digest = save_checkpoint(path, checkpoint)
    logger.info(f"Denoiser with {denoiser.n_params} parameters saved to {path}")
    finish_run(
        "train-denoiser",
        seed,
        out_dir,
        {
            "dataset": dataset_path,
            "schedule": sched_config.model_dump(),
            "denoiser": config.model_dump(),
            "train": train_config.model_dump(),
        },
        checkpoints={"denoiser": digest},
        artifacts=[path],
    )


@app.command(
    name="train-reward",
    help="Train the step-aware reward model with noise augmentation on the train split.",
)
@handle_domain_errors
def train_reward_command(
    dataset_path: Path = DATASET_OPTION,
    out_dir: Path = OUT_DIR_OPTION,
    seed: int = SEED_OPTION,
    config_file: Path | None = CONFIG_OPTION,
    output_name: str = typer.Option(
        REWARD_FILE, "--output-name", help="Checkpoint file name inside the output directory."
    ),
    epochs: int | None = typer.Option(None, "--epochs", min=1, help="Passes over the data."),
    batch_size: int | None = typer.Option(None, "--batch-size", min=2, help="Batch size."),
    lr: float | None = typer.Option(None, "--lr", help="Learning rate."),
    omega: float | None = typer.Option(
        None, "--omega", min=0.0, max=1.0, help="Probability of keeping a sample clean."
    ),
    t_min: int | None = typer.Option(None, "--t-min", min=0, help="Smallest noise timestep."),
    t_max: int | None = typer.Option(None, "--t-max", min=0, help="Largest noise timestep."),
    tau: float | None = typer.Option(None, "--tau", help="InfoNCE temperature."),
    neg_threshold: float | None = typer.Option(
        None, "--neg-threshold", help="Condition similarity above which negatives are masked."
    ),
    diffusion_steps: int | None = DIFFUSION_STEPS_OPTION,
    schedule: str | None = SCHEDULE_OPTION,
    progress: bool = typer.Option(False, "--progress", help="Show a progress bar."),
):
    """Train R_phi and write `out_dir/<output-name>`.

    The validation split, when present, is scored with the clean contrastive
    loss after every epoch.
    """
    dataset = load_dataset(dataset_path)
    sched_config = resolve_config(
        ScheduleConfig, config_file, "schedule", T=diffusion_steps, kind=schedule
    )
    config = resolve_config(
        RewardModelConfig,
        config_file,
        "reward",
        n_frames=dataset.n_frames,
        dim=dataset.dim,
        T=sched_config.T,
    )
    train_config = resolve_config(
        RewardTrainConfig,
        config_file,
        "reward_train",
        epochs=epochs,
        batch_size=batch_size,
        lr=lr,
        omega=omega,
        t_min=t_min,
        t_max=t_max,
        tau=tau,
        neg_threshold=neg_threshold,
    )
    model = train_reward_model(
        dataset.split("train"),
        make_schedule_from(sched_config),
        config,
        train_config,
        seed,
        val_dataset=dataset.split("val"),
        show_progress=progress,
    )
    path = out_dir / output_name
    digest = save_checkpoint(path, model.to_checkpoint())
    logger.info(f"Reward model with {model.n_params} parameters saved to {path}")
    finish_run(
        f"train-reward:{output_name}" if output_name != REWARD_FILE else "train-reward",
        seed,
        out_dir,
        {
            "dataset": dataset_path,
            "schedule": sched_config.model_dump(),
            "reward": config.model_dump(),
            "train": train_config.model_dump(),
        },
        checkpoints={"reward": digest},
        artifacts=[path],
    )


@app.command(name="build-index", help="Embed the train split for anchor retrieval.")
@handle_domain_errors
def build_index_command(
    dataset_path: Path = DATASET_OPTION,
    reward_ckpt: Path = typer.Option(..., "--reward-ckpt", help="Reward model checkpoint."),
    out_dir: Path = OUT_DIR_OPTION,
    seed: int = SEED_OPTION,
):
    """Write `out_dir/index.rgix`, bound to the reward checkpoint's hash."""
    dataset = load_dataset(dataset_path)
    model, checkpoint = load_reward(reward_ckpt)
    index = build_index(model, dataset.split("train"))
    path = out_dir / INDEX_FILE
    save_index(index, path)
    finish_run(
        "build-index",
        seed,
        out_dir,
        {"dataset": dataset_path, "reward_ckpt": reward_ckpt},
        checkpoints={"reward": checkpoint.sha256 or ""},
        artifacts=[path],
    )
