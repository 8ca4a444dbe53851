"""Module containing the CLI commands for guided sampling and the analytic check."""

from pathlib import Path

import typer
from loguru import logger

from reguide.cli_common import (
    CONFIG_OPTION,
    OUT_DIR_OPTION,
    SAMPLES_FILE,
    SEED_OPTION,
    TRACE_FILE,
    WORKERS_OPTION,
    finish_run,
    load_denoiser,
    load_reward,
    make_schedule_from,
    write_report,
)
from reguide.config import GuidanceConfig, ScheduleConfig, resolve_config
from reguide.diffusion.schedule import sampling_timesteps
from reguide.errors import ToleranceExceededError
from reguide.retrieval.index import load_index
from reguide.sampling.sampler import batch_sample
from reguide.sampling.trace import samples_to_dataset, write_trace
from reguide.synthdata.generator import Condition, parse_condition
from reguide.synthdata.storage import load_dataset, save_dataset
from reguide.utils import handle_domain_errors
from reguide.verify.analytic import GaussianSpec, QuadraticReward, run_analytic_check

app = typer.Typer()


def collect_conditions(
    cond: list[str] | None, dataset_path: Path | None, split: str, limit: int | None
) -> list[Condition]:
    """Conditions from `--cond` flags, else from a dataset split."""
    if cond:
        return [parse_condition(c) for c in cond]
    if dataset_path is None:
        raise typer.BadParameter("give at least one --cond or a --dataset to draw conditions from")
    conditions = load_dataset(dataset_path).split(split).conditions
    return conditions[:limit] if limit is not None else conditions


@app.command(name="sample", help="Generate motions with reward-guided denoising.")
@handle_domain_errors
def sample_command(
    denoiser_ckpt: Path = typer.Option(..., "--denoiser-ckpt", help="Denoiser checkpoint."),
    reward_ckpt: Path | None = typer.Option(
        None, "--reward-ckpt", help="Reward model checkpoint; needed unless guidance is off."
    ),
    index_path: Path | None = typer.Option(
        None, "--index", help="Retrieval index; needed when --eta is non-zero."
    ),
    cond: list[str] | None = typer.Option(
        None, "--cond", help='Condition such as "arc-left:curvature=0.1"; repeatable.'
    ),
    dataset_path: Path | None = typer.Option(
        None, "--dataset", help="Take conditions from this dataset instead of --cond."
    ),
    split: str = typer.Option("test", "--split", help="Dataset split providing conditions."),
    limit: int | None = typer.Option(None, "--limit", min=1, help="Use the first N conditions."),
    mu: float | None = typer.Option(None, "--mu", help="Weight of the text-aligned reward."),
    eta: float | None = typer.Option(None, "--eta", help="Weight of the motion-aligned reward."),
    cfg: float | None = typer.Option(None, "--cfg", help="Classifier-free guidance scale."),
    mode: str | None = typer.Option(None, "--mode", help="theorem3, unweighted or off."),
    steps: int | None = typer.Option(None, "--steps", min=1, help="Sampling steps."),
    clip: float | None = typer.Option(None, "--clip", help="L2 clip of the reward gradient."),
    no_clip: bool = typer.Option(False, "--no-clip", help="Disable gradient clipping."),
    reward_timestep: str | None = typer.Option(
        None, "--reward-timestep", help="Timestep token of the reward: current or clean."
    ),
    trace: Path | None = typer.Option(None, "--trace", help="JSONL trace file."),
    out_dir: Path = OUT_DIR_OPTION,
    seed: int = SEED_OPTION,
    config_file: Path | None = CONFIG_OPTION,
    workers: int = WORKERS_OPTION,
):
    """Sample one motion per condition.

    Writes the motions with their conditions to `out_dir/samples.rgds` and the
    per-step trace to `--trace` (default `out_dir/trace.jsonl`).
    """
    gcfg = resolve_config(
        GuidanceConfig,
        config_file,
        "guidance",
        mu=mu,
        eta=eta,
        cfg_scale=cfg,
        mode=mode,
        steps=steps,
        clip=clip,
        reward_timestep=reward_timestep,
    )
    if no_clip:
        gcfg = gcfg.model_copy(update={"clip": None})
    conditions = collect_conditions(cond, dataset_path, split, limit)

    denoiser, sched, denoiser_checkpoint = load_denoiser(denoiser_ckpt)
    checkpoints = {"denoiser": denoiser_checkpoint.sha256 or ""}
    reward_model = index = None
    if gcfg.active:
        if reward_ckpt is None:
            raise typer.BadParameter("guided sampling needs --reward-ckpt")
        reward_model, reward_checkpoint = load_reward(reward_ckpt)
        checkpoints["reward"] = reward_checkpoint.sha256 or ""
        if gcfg.eta != 0.0:
            if index_path is None:
                raise typer.BadParameter("--eta other than 0 needs --index")
            index = load_index(index_path)

    results = batch_sample(
        conditions, denoiser, reward_model, index, sched, gcfg, seed, n_workers=workers
    )
    samples_path = out_dir / SAMPLES_FILE
    save_dataset(samples_to_dataset(results, seed), samples_path)
    trace_path = trace if trace is not None else out_dir / TRACE_FILE
    write_trace([t for _, t in results], trace_path)
    logger.info(f"Wrote {len(results)} samples to {samples_path} and the trace to {trace_path}")

    finish_run(
        "sample",
        seed,
        out_dir,
        {
            "guidance": gcfg.model_dump(),
            "conditions": [c.describe() for c in conditions],
            "index": index_path,
            "workers": workers,
        },
        checkpoints=checkpoints,
        artifacts=[samples_path, trace_path],
    )


@app.command(
    name="verify",
    help="Check the guided sampler against Gaussian oracles with a quadratic reward.",
)
@handle_domain_errors
def verify_command(
    lam: float = typer.Option(0.5, "--lambda", min=0.0, help="Reward strength lambda."),
    target: float = typer.Option(2.0, "--target", help="Reward target a (every coordinate)."),
    mean: float = typer.Option(0.0, "--mean", help="Data mean m (every coordinate)."),
    var: float = typer.Option(1.0, "--var", min=1e-12, help="Data variance v (every coordinate)."),
    dim: int = typer.Option(1, "--dim", min=1, help="Number of coordinates."),
    mode: str = typer.Option("theorem3", "--mode", help="theorem3, unweighted or off."),
    samples: int = typer.Option(10_000, "--samples", min=1000, help="Number of samples."),
    diffusion_steps: int = typer.Option(1000, "--diffusion-steps", min=1, help="Timesteps T."),
    steps: int | None = typer.Option(None, "--steps", min=1, help="Strided sampling steps."),
    out_dir: Path = OUT_DIR_OPTION,
    seed: int = SEED_OPTION,
    workers: int = WORKERS_OPTION,
):
    """Write `out_dir/verify.txt` and `out_dir/verify.json`; exit 1 when the check fails."""
    gcfg = GuidanceConfig(mode=mode, steps=steps)  # validates the mode
    sched = make_schedule_from(ScheduleConfig(T=diffusion_steps))
    timesteps = sampling_timesteps(diffusion_steps, steps) if steps is not None else None
    report = run_analytic_check(
        GaussianSpec([mean] * dim, var),
        QuadraticReward([target] * dim, lam),
        sched,
        samples,
        gcfg.mode,
        seed,
        timesteps=timesteps,
        n_workers=workers,
    )
    text = report.to_text()
    typer.echo(text)
    artifacts = write_report(out_dir, "verify", text, report.to_dict())
    finish_run(
        "verify",
        seed,
        out_dir,
        {
            "lambda": lam,
            "target": target,
            "mean": mean,
            "var": var,
            "dim": dim,
            "mode": mode,
            "samples": samples,
            "diffusion_steps": diffusion_steps,
            "steps": steps,
        },
        artifacts=artifacts,
    )
    if not report.passed:
        raise ToleranceExceededError("sample moments fall outside the tolerance of the exact chain")
