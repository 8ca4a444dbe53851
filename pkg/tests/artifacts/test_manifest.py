import json
from pathlib import Path

from reguide.artifacts.manifest import MANIFEST_NAME, write_manifest
from reguide.config import RunConfig
from reguide.utils import file_sha256


def test_manifest_records_options_and_hashes(tmp_path: Path):
    artifact = tmp_path / "dataset.rgds"
    artifact.write_bytes(b"abc")
    run = RunConfig(command="gen-data", seed=3, options={"dataset": artifact, "n": 5})

    path = write_manifest(tmp_path, run, {"reward": "f00"}, [artifact])
    entry = json.loads(path.read_text())["runs"]["gen-data"]

    assert path.name == MANIFEST_NAME
    assert entry["seed"] == 3
    assert entry["options"]["n"] == 5
    assert entry["options"]["dataset"] == {"name": "dataset.rgds", "sha256": file_sha256(artifact)}
    assert entry["checkpoints"] == {"reward": "f00"}
    assert entry["artifacts"] == {"dataset.rgds": file_sha256(artifact)}
    assert str(tmp_path) not in path.read_text()


def test_commands_share_one_manifest(tmp_path: Path):
    write_manifest(tmp_path, RunConfig(command="sample"))
    write_manifest(tmp_path, RunConfig(command="gen-data"))
    runs = json.loads((tmp_path / MANIFEST_NAME).read_text())["runs"]
    assert list(runs) == ["gen-data", "sample"]


def test_identical_runs_give_identical_manifests(tmp_path: Path):
    run = RunConfig(command="verify", seed=7, options={"lambda": 0.5})
    a = write_manifest(tmp_path / "a", run).read_bytes()
    b = write_manifest(tmp_path / "b", run).read_bytes()
    assert a == b
