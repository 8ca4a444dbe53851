"""Module containing the CLI command generating synthetic datasets."""

from pathlib import Path

import typer
from loguru import logger

from reguide.cli_common import (
    CONFIG_OPTION,
    DATASET_FILE,
    OUT_DIR_OPTION,
    SEED_OPTION,
    WORKERS_OPTION,
    finish_run,
)
from reguide.config import DatasetSpec, load_yml_config
from reguide.synthdata.generator import build_dataset
from reguide.synthdata.storage import save_dataset
from reguide.utils import handle_domain_errors

app = typer.Typer()


def resolve_dataset_spec(
    config_file: Path | None,
    train: int | None,
    val: int | None,
    test: int | None,
    **overrides: object,
) -> DatasetSpec:
    """Dataset spec from the YAML `dataset` block, or balanced split totals from flags."""
    values: dict = {}
    if config_file is not None:
        values.update(load_yml_config(config_file).get("dataset") or {})
    values.update({k: v for k, v in overrides.items() if v is not None})
    totals = {"train": train, "val": val, "test": test}
    if any(v is not None for v in totals.values()) or not any(values.get(s) for s in totals):
        for split in totals:
            values.pop(split, None)
        return DatasetSpec.balanced(
            train=800 if train is None else train,
            val=100 if val is None else val,
            test=100 if test is None else test,
            **values,
        )
    return DatasetSpec(**values)


@app.command(
    name="gen-data",
    help="Generate a synthetic motion/condition dataset with train, val and test splits.",
)
@handle_domain_errors
def gen_data(
    out_dir: Path = OUT_DIR_OPTION,
    seed: int = SEED_OPTION,
    config_file: Path | None = CONFIG_OPTION,
    train: int | None = typer.Option(
        None, "--train", min=0, help="Training pairs, spread over classes."
    ),
    val: int | None = typer.Option(None, "--val", min=0, help="Validation pairs."),
    test: int | None = typer.Option(None, "--test", min=0, help="Test pairs."),
    n_frames: int | None = typer.Option(None, "--n-frames", help="Frames per motion."),
    dim: int | None = typer.Option(None, "--dim", help="2 for positions, 4 adds velocities."),
    jitter: float | None = typer.Option(None, "--jitter", help="Std of the frame jitter."),
    workers: int = WORKERS_OPTION,
):
    """Build a dataset and write it to `out_dir/dataset.rgds`.

    Args:
        out_dir: Output directory.
        seed: Generator seed.
        config_file: Optional YAML file with a `dataset` block.
        train: Total training pairs; defaults to 800 when no config is given.
        val: Total validation pairs; defaults to 100.
        test: Total test pairs; defaults to 100.
        n_frames: Frames per motion.
        dim: Frame dimension.
        jitter: Frame jitter.
        workers: Parallel generator processes.
    """
    spec = resolve_dataset_spec(
        config_file, train, val, test, n_frames=n_frames, dim=dim, jitter=jitter
    )
    dataset = build_dataset(spec, seed, n_workers=workers)
    path = out_dir / DATASET_FILE
    save_dataset(dataset, path)
    sizes = {split: len(dataset.split(split)) for split in ("train", "val", "test")}
    logger.info(f"Wrote {len(dataset)} pairs {sizes} to {path}")
    finish_run(
        "gen-data",
        seed,
        out_dir,
        {"spec": spec.model_dump(), "workers": workers},
        artifacts=[path],
    )
