"""Module containing the CLI commands for retrieval evaluation, generation metrics and ablations."""

from pathlib import Path

import typer
from loguru import logger

from reguide.cli_common import (
    CONFIG_OPTION,
    OUT_DIR_OPTION,
    SAMPLES_FILE,
    SEED_OPTION,
    WORKERS_OPTION,
    finish_run,
    load_denoiser,
    load_reward,
    make_schedule_from,
    write_report,
)
from reguide.config import GuidanceConfig, ScheduleConfig, resolve_config
from reguide.metrics.ablation import AblationSetup, run_ablations, with_clean_model
from reguide.metrics.evaluation import evaluate
from reguide.retrieval.evaluation import retrieval_eval
from reguide.retrieval.index import load_index
from reguide.synthdata.storage import load_dataset
from reguide.utils import handle_domain_errors

app = typer.Typer()

REWARD_OPTION = typer.Option(..., "--reward-ckpt", help="Reward model checkpoint.")


@app.command(
    name="eval-retrieval",
    help="Batch-of-32 retrieval recall in both directions on clean or noised motions.",
)
@handle_domain_errors
def eval_retrieval_command(
    dataset_path: Path = typer.Option(..., "--dataset", help="Dataset file."),
    reward_ckpt: Path = REWARD_OPTION,
    split: str = typer.Option("test", "--split", help="Split to evaluate."),
    noise_t: int = typer.Option(0, "--noise-t", min=0, help="Forward-noise motions to this t."),
    batch_size: int = typer.Option(32, "--batch-size", min=2, help="Retrieval batch size."),
    report_name: str = typer.Option("retrieval", "--report-name", help="Report file stem."),
    out_dir: Path = OUT_DIR_OPTION,
    seed: int = SEED_OPTION,
    config_file: Path | None = CONFIG_OPTION,
    workers: int = WORKERS_OPTION,
):
    """Write `out_dir/<report-name>.txt` and `.json` with recall at 1, 2, 3, 5 and 10."""
    model, checkpoint = load_reward(reward_ckpt)
    sched = None
    if noise_t > 0:
        sched = make_schedule_from(
            resolve_config(ScheduleConfig, config_file, "schedule", T=model.config.T)
        )
    report = retrieval_eval(
        model,
        load_dataset(dataset_path).split(split),
        batch_size=batch_size,
        seed=seed,
        noise_t=noise_t,
        sched=sched,
        n_workers=workers,
    )
    text = report.to_frame().to_string(float_format=lambda v: f"{v:.4f}") + "\n"
    typer.echo(text)
    artifacts = write_report(out_dir, report_name, text, report.to_dict())
    finish_run(
        f"eval-retrieval:{report_name}",
        seed,
        out_dir,
        {
            "dataset": dataset_path,
            "split": split,
            "noise_t": noise_t,
            "batch_size": batch_size,
        },
        checkpoints={"reward": checkpoint.sha256 or ""},
        artifacts=artifacts,
    )


def resolve_generated(path: Path) -> Path:
    """Accept either a samples file or the directory a sample run wrote to."""
    return path / SAMPLES_FILE if path.is_dir() else path


@app.command(name="eval", help="R-precision, FID, MM Dist and diversity of generated motions.")
@handle_domain_errors
def eval_command(
    real: Path = typer.Option(..., "--real", help="Dataset with the real motions."),
    generated: Path = typer.Option(
        ..., "--generated", help="Samples file or the output directory of a sample run."
    ),
    reward_ckpt: Path = REWARD_OPTION,
    split: str = typer.Option("test", "--split", help="Real split to compare against."),
    batch_size: int = typer.Option(32, "--batch-size", min=2, help="R-precision batch size."),
    n_pairs: int = typer.Option(300, "--diversity-pairs", min=1, help="Diversity pairs."),
    out_dir: Path = OUT_DIR_OPTION,
    seed: int = SEED_OPTION,
):
    """Write `out_dir/metrics.txt` and `out_dir/metrics.json`."""
    model, checkpoint = load_reward(reward_ckpt)
    generated_path = resolve_generated(generated)
    report = evaluate(
        model,
        load_dataset(real).split(split),
        load_dataset(generated_path),
        seed=seed,
        batch_size=batch_size,
        n_pairs=n_pairs,
    )
    text = report.to_text()
    typer.echo(text)
    artifacts = write_report(out_dir, "metrics", text, report.to_dict())
    finish_run(
        "eval",
        seed,
        out_dir,
        {
            "real": real,
            "generated": generated_path,
            "split": split,
            "batch_size": batch_size,
            "diversity_pairs": n_pairs,
        },
        checkpoints={"reward": checkpoint.sha256 or ""},
        artifacts=artifacts,
    )


@app.command(
    name="ablate",
    help="Reward-component, guidance-strategy and step-count ablations on one set of conditions.",
)
@handle_domain_errors
def ablate_command(
    dataset_path: Path = typer.Option(..., "--dataset", help="Dataset file."),
    denoiser_ckpt: Path = typer.Option(..., "--denoiser-ckpt", help="Denoiser checkpoint."),
    reward_ckpt: Path = REWARD_OPTION,
    index_path: Path = typer.Option(..., "--index", help="Retrieval index of the reward model."),
    clean_reward_ckpt: Path | None = typer.Option(
        None, "--clean-reward-ckpt", help="Reward model trained without noise (omega=1)."
    ),
    split: str = typer.Option("test", "--split", help="Split providing conditions and real data."),
    n_conditions: int | None = typer.Option(
        None, "--conditions", min=1, help="Use the first N conditions of the split."
    ),
    sweep: list[int] | None = typer.Option(
        None, "--sweep-steps", help="Sampling step counts for the step sweep; repeatable."
    ),
    mu: float | None = typer.Option(None, "--mu", help="Weight of the text-aligned reward."),
    eta: float | None = typer.Option(None, "--eta", help="Weight of the motion-aligned reward."),
    cfg: float | None = typer.Option(None, "--cfg", help="Classifier-free guidance scale."),
    mode: str | None = typer.Option(None, "--mode", help="theorem3 or unweighted."),
    steps: int | None = typer.Option(None, "--steps", min=1, help="Sampling steps."),
    out_dir: Path = OUT_DIR_OPTION,
    seed: int = SEED_OPTION,
    config_file: Path | None = CONFIG_OPTION,
    workers: int = WORKERS_OPTION,
):
    """Write `out_dir/ablation.txt` and `out_dir/ablation.json`."""
    gcfg = resolve_config(
        GuidanceConfig,
        config_file,
        "guidance",
        mu=mu,
        eta=eta,
        cfg_scale=cfg,
        mode=mode,
        steps=steps,
    )
    dataset = load_dataset(dataset_path)
    real = dataset.split(split)
    conditions = real.conditions[:n_conditions] if n_conditions else real.conditions
    denoiser, sched, denoiser_checkpoint = load_denoiser(denoiser_ckpt)
    model, reward_checkpoint = load_reward(reward_ckpt)
    checkpoints = {
        "denoiser": denoiser_checkpoint.sha256 or "",
        "reward": reward_checkpoint.sha256 or "",
    }

    setup = AblationSetup(
        denoiser=denoiser,
        reward_model=model,
        index=load_index(index_path),
        sched=sched,
        guidance=gcfg,
        conditions=conditions,
        real=real,
        seed=seed,
        n_workers=workers,
    )
    if clean_reward_ckpt is not None:
        clean_model, clean_checkpoint = load_reward(clean_reward_ckpt)
        checkpoints["reward_clean"] = clean_checkpoint.sha256 or ""
        setup = with_clean_model(setup, clean_model, dataset.split("train"))

    logger.info(f"Running ablations over {len(conditions)} conditions")
    report = run_ablations(setup, sweep)
    text = report.to_text()
    typer.echo(text)
    artifacts = write_report(out_dir, "ablation", text, report.to_dict())
    finish_run(
        "ablate",
        seed,
        out_dir,
        {
            "dataset": dataset_path,
            "split": split,
            "conditions": len(conditions),
            "sweep_steps": sweep or [],
            "guidance": gcfg.model_dump(),
        },
        checkpoints=checkpoints,
        artifacts=artifacts,
    )
