"""Module containing shared helpers: logging setup, CLI error handling and parallel maps."""

import contextlib
import functools
import hashlib
import sys
import time
from collections.abc import Callable
from pathlib import Path
from typing import Any, TypeVar

import pydantic
import typer
from joblib import Parallel, delayed
from joblib.externals.loky.process_executor import TerminatedWorkerError
from loguru import logger

from reguide.errors import ReguideError

F = TypeVar("F", bound=Callable[..., Any])

_log_level = "INFO"
_sink_id: int | None = 0  # loguru's default stderr sink


def configure_logging(level: str = "INFO") -> None:
    """Replace the stderr sink with one at `level`. Other sinks are left alone."""
    global _log_level, _sink_id
    _log_level = level.upper()
    if _sink_id is not None:
        with contextlib.suppress(ValueError):
            logger.remove(_sink_id)
    _sink_id = logger.add(
        sys.stderr,
        level=_log_level,
        format="<green>{time:HH:mm:ss}</green> | <level>{level: <8}</level> | {message}",
    )


def current_log_level() -> str:
    return _log_level


def handle_domain_errors(command: F) -> F:
    """Decorator for CLI commands: log domain errors and exit with code 1."""

    @functools.wraps(command)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        try:
            return command(*args, **kwargs)
        except ReguideError as error:
            logger.error(f"[{error.code}] {error}")
            raise typer.Exit(code=1) from error
        except FileNotFoundError as error:
            logger.error(f"File not found: {error}")
            raise typer.Exit(code=1) from error
        except pydantic.ValidationError as error:
            logger.error(f"Invalid configuration: {error}")
            raise typer.Exit(code=2) from error

    return wrapper  # type: ignore[return-value]


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def parallel_process_with_retries(
    task_function: Callable,
    data: list,
    retries: int = 3,
    n_workers: int = 1,
) -> list:
    """
    Runs joblib Parallel processing with a retry mechanism. Results keep the input order.

    Args:
        task_function: Function to run in parallel
        data: The input data to process.
        retries: Number of retries if TerminatedWorkerError occurs.
        n_workers: Number of parallel processes. 1 runs in the current process.

    Returns:
        List of results from the parallel computation.
    """
    if n_workers == 1:
        return [task_function(x) for x in data]

    attempt = 0
    while attempt <= retries:
        try:
            logger.debug(f"Attempt {attempt + 1} with {n_workers} workers")
            return Parallel(n_jobs=n_workers)(delayed(task_function)(x) for x in data)
        except TerminatedWorkerError as e:
            attempt += 1
            logger.error(
                f"Error occurred: {e}. Retrying {retries - attempt + 1} more times.",
            )
            time.sleep(1)
    raise RuntimeError(f"Failed after {retries} retries due to TerminatedWorkerError.")
