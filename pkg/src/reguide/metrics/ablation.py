"""Ablation experiments: reward components, guidance strategy and step count.

Every variant samples the same conditions with the same seed and is scored
with the same (step-aware) reward model, so rows of a table differ only in
how the samples were produced.
"""

from dataclasses import dataclass, field

import pandas as pd
from loguru import logger

from reguide.config import GuidanceConfig
from reguide.diffusion.denoiser import Denoiser
from reguide.diffusion.schedule import NoiseSchedule
from reguide.metrics.evaluation import evaluate
from reguide.retrieval.index import RetrievalIndex, build_index
from reguide.reward.model import RewardModel
from reguide.sampling.sampler import batch_sample
from reguide.sampling.trace import samples_to_dataset
from reguide.synthdata.generator import Condition, Dataset


@dataclass
class AblationSetup:
    """Everything shared by the variants of one ablation run."""

    denoiser: Denoiser
    reward_model: RewardModel
    index: RetrievalIndex
    sched: NoiseSchedule
    guidance: GuidanceConfig
    conditions: list[Condition]
    real: Dataset
    seed: int = 0
    n_workers: int = 1
    clean_model: RewardModel | None = None
    clean_index: RetrievalIndex | None = None


@dataclass
class AblationReport:
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)

    def to_text(self) -> str:
        blocks = []
        for name, table in self.tables.items():
            blocks.append(f"== {name} ==\n" + table.to_string(float_format=lambda v: f"{v:.4f}"))
        return "\n\n".join(blocks) + "\n"

    def to_dict(self) -> dict:
        return {
            name: table.reset_index().to_dict(orient="records")
            for name, table in self.tables.items()
        }


def with_clean_model(setup: AblationSetup, clean_model: RewardModel, train: Dataset) -> AblationSetup:
    """Attach a reward model trained without noise augmentation, with its own anchor index."""
    setup.clean_model = clean_model
    setup.clean_index = build_index(clean_model, train)
    return setup


def run_variant(
    setup: AblationSetup,
    gcfg: GuidanceConfig,
    reward_model: RewardModel | None = None,
    index: RetrievalIndex | None = None,
) -> dict[str, float]:
    """Sample all conditions with `gcfg` and score them with the setup's reward model."""
    results = batch_sample(
        setup.conditions,
        setup.denoiser,
        setup.reward_model if reward_model is None else reward_model,
        setup.index if index is None else index,
        setup.sched,
        gcfg,
        setup.seed,
        n_workers=setup.n_workers,
    )
    generated = samples_to_dataset(results, setup.seed)
    report = evaluate(setup.reward_model, setup.real, generated, setup.seed)
    row = {f"R@{k}": v for k, v in report.r_precision.items()}
    row.update(
        {
            "FID": report.fid,
            "MM Dist": report.mm_dist,
            "Diversity": report.diversity,
            "Mean reward": report.mean_reward,
        }
    )
    return row


def _table(rows: dict[str, dict[str, float]], index_name: str) -> pd.DataFrame:
    table = pd.DataFrame.from_dict(rows, orient="index")
    table.index.name = index_name
    return table


def reward_component_ablation(setup: AblationSetup) -> pd.DataFrame:
    """Baseline, text reward only, motion reward only and both; plus a clean-only reward model if given."""
    base = setup.guidance
    eta = base.eta if base.eta != 0.0 else 0.1
    variants = {
        "baseline": base.model_copy(update={"mode": "off"}),
        "text": base.model_copy(update={"eta": 0.0}),
        "motion": base.model_copy(update={"mu": 0.0, "eta": eta}),
        "text+motion": base.model_copy(update={"eta": eta}),
    }
    rows = {}
    for name, gcfg in variants.items():
        logger.info(f"Reward-component variant: {name}")
        rows[name] = run_variant(setup, gcfg)
    if setup.clean_model is not None:
        logger.info("Reward-component variant: text+motion, clean-only reward model")
        rows["text+motion (clean-only)"] = run_variant(
            setup, variants["text+motion"], setup.clean_model, setup.clean_index
        )
    return _table(rows, "rewards")


def guidance_strategy_ablation(setup: AblationSetup) -> pd.DataFrame:
    """Conditional model alone, with CFG, and with CFG plus reward guidance."""
    base = setup.guidance
    variants = {
        "conditional": base.model_copy(update={"mode": "off", "cfg_scale": 1.0}),
        "CFG": base.model_copy(update={"mode": "off"}),
        "CFG+reward": base,
    }
    rows = {}
    for name, gcfg in variants.items():
        logger.info(f"Guidance-strategy variant: {name}")
        rows[name] = run_variant(setup, gcfg)
    return _table(rows, "strategy")


def step_sweep(setup: AblationSetup, steps: list[int]) -> pd.DataFrame:
    """Unguided and guided sampling at each step count, with the clean-only model when given."""
    rows = {}
    for n in steps:
        gcfg = setup.guidance.model_copy(update={"steps": n, "timesteps": None})
        rows[f"{n} unguided"] = run_variant(setup, gcfg.model_copy(update={"mode": "off"}))
        if setup.clean_model is not None:
            rows[f"{n} clean-only"] = run_variant(setup, gcfg, setup.clean_model, setup.clean_index)
        rows[f"{n} step-aware"] = run_variant(setup, gcfg)
        logger.info(f"Step sweep finished {n} steps")
    return _table(rows, "steps")


def run_ablations(setup: AblationSetup, steps: list[int] | None = None) -> AblationReport:
    report = AblationReport()
    report.tables["reward components"] = reward_component_ablation(setup)
    report.tables["guidance strategy"] = guidance_strategy_ablation(setup)
    if steps:
        report.tables["sampling steps"] = step_sweep(setup, steps)
    return report
