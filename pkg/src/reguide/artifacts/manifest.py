"""Per-run manifest: resolved configuration plus checkpoint and artifact hashes."""

import json
from pathlib import Path
from typing import Any

from loguru import logger

from reguide.config import RunConfig
from reguide.utils import file_sha256

MANIFEST_NAME = "manifest.json"


def _describe(value: Any) -> Any:
    """JSON view of an option value. Paths are reduced to name and content hash."""
    if isinstance(value, Path):
        entry: dict[str, Any] = {"name": value.name}
        if value.is_file():
            entry["sha256"] = file_sha256(value)
        return entry
    if isinstance(value, dict):
        return {str(k): _describe(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_describe(v) for v in value]
    return value


def write_manifest(
    out_dir: Path,
    run: RunConfig,
    checkpoints: dict[str, str] | None = None,
    artifacts: list[Path] | None = None,
) -> Path:
    """Record one command's run in `out_dir/manifest.json`.

    Several commands may share an output directory; each one owns the entry
    under its own name. No timestamps or absolute paths are stored, so two
    seeded runs of the same pipeline give identical manifests.

    Args:
        out_dir: The run's output directory.
        run: The resolved run configuration.
        checkpoints: Checkpoint hashes used or produced by the run, by role.
        artifacts: Files produced by the run.

    Returns:
        Path: The manifest path.
    """
    path = out_dir / MANIFEST_NAME
    manifest: dict[str, Any] = {"runs": {}}
    if path.is_file():
        manifest = json.loads(path.read_text())

    manifest["runs"][run.command] = {
        "seed": run.seed,
        "log_level": run.log_level,
        "options": _describe(run.options),
        "checkpoints": dict(sorted((checkpoints or {}).items())),
        "artifacts": {p.name: file_sha256(p) for p in sorted(artifacts or [])},
    }
    manifest["runs"] = dict(sorted(manifest["runs"].items()))
    out_dir.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    logger.debug(f"Manifest updated for `{run.command}`")
    return path
