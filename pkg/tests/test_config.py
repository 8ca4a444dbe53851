from pathlib import Path

import pytest
import yaml
from pydantic import ValidationError

from reguide.config import (
    CLASS_NAMES,
    DatasetSpec,
    GuidanceConfig,
    PipelineConfig,
    RewardModelConfig,
    ScheduleConfig,
    load_yml_config,
    resolve_config,
)

EXAMPLE_CONFIG = Path(__file__).parents[1] / "config" / "example.yaml"


def test_example_config_is_valid():
    config = PipelineConfig(**load_yml_config(EXAMPLE_CONFIG))
    assert sum(config.dataset.train.values()) == 800
    assert sum(config.dataset.test.values()) == 100
    assert config.guidance.mode == "unweighted"
    assert config.schedule.T == 1000


def test_missing_yaml_file(tmp_path: Path):
    with pytest.raises(FileNotFoundError):
        load_yml_config(tmp_path / "nope.yaml")


def test_empty_yaml_file_gives_empty_config(tmp_path: Path):
    path = tmp_path / "empty.yaml"
    path.write_text("")
    assert load_yml_config(path) == {}


def test_flags_override_the_config_file(tmp_path: Path):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.dump({"guidance": {"mu": 2.0, "eta": 0.5, "steps": 20}}))

    gcfg = resolve_config(GuidanceConfig, path, "guidance", eta=0.0, steps=None)
    assert gcfg.mu == 2.0
    assert gcfg.eta == 0.0
    assert gcfg.steps == 20


def test_missing_section_uses_defaults(tmp_path: Path):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.dump({"guidance": {"mu": 2.0}}))
    assert resolve_config(ScheduleConfig, path, "schedule") == ScheduleConfig()


def test_balanced_spec_spreads_counts():
    spec = DatasetSpec.balanced(10, 0, 3)
    assert list(spec.train) == list(CLASS_NAMES)
    assert sum(spec.train.values()) == 10
    assert spec.val == {}
    assert spec.test == {"line": 1, "arc-left": 1, "arc-right": 1}


@pytest.mark.parametrize(
    "values",
    [
        {"train": {"circle": 3}},
        {"train": {"line": 0}},
        {"dim": 3},
        {"n_frames": 1},
    ],
)
def test_invalid_dataset_specs(values: dict):
    with pytest.raises(ValidationError):
        DatasetSpec(**values)


def test_guidance_activity():
    assert GuidanceConfig().active
    assert not GuidanceConfig(mode="off").active
    assert not GuidanceConfig(mu=0.0, eta=0.0).active
    assert GuidanceConfig(mu=0.0, eta=0.1, mode="theorem3").active


@pytest.mark.parametrize(
    "values",
    [{"mode": "sideways"}, {"timesteps": [5, 5, 1]}, {"timesteps": []}, {"clip": 0.0}],
)
def test_invalid_guidance(values: dict):
    with pytest.raises(ValidationError):
        GuidanceConfig(**values)


def test_heads_must_divide_the_model_width():
    with pytest.raises(ValidationError):
        RewardModelConfig(d_model=10, n_heads=3)
