"""Unit tests for the shared helpers."""

from pathlib import Path

import pytest
import typer
from joblib.externals.loky.process_executor import TerminatedWorkerError
from pydantic import BaseModel, PositiveInt

from reguide.errors import ChecksumError
from reguide.utils import (
    configure_logging,
    current_log_level,
    file_sha256,
    handle_domain_errors,
    parallel_process_with_retries,
)


def square(x: int) -> int:
    return x * x


class Positive(BaseModel):
    n: PositiveInt


def test_serial_map_keeps_order():
    assert parallel_process_with_retries(square, [3, 1, 2]) == [9, 1, 4]


def test_parallel_map_keeps_order():
    assert parallel_process_with_retries(square, list(range(10)), n_workers=2) == [
        x * x for x in range(10)
    ]


def test_terminated_workers_are_retried(mocker):
    mocker.patch("reguide.utils.time.sleep")
    runner = mocker.Mock(side_effect=[TerminatedWorkerError("boom"), [1, 4]])
    mocker.patch("reguide.utils.Parallel", return_value=runner)

    assert parallel_process_with_retries(square, [1, 2], n_workers=2) == [1, 4]
    assert runner.call_count == 2


def test_retries_run_out(mocker):
    mocker.patch("reguide.utils.time.sleep")
    runner = mocker.Mock(side_effect=TerminatedWorkerError("boom"))
    mocker.patch("reguide.utils.Parallel", return_value=runner)

    with pytest.raises(RuntimeError):
        parallel_process_with_retries(square, [1], retries=2, n_workers=2)
    assert runner.call_count == 3


def test_domain_errors_exit_with_one(caplog):
    @handle_domain_errors
    def command():
        raise ChecksumError("CRC32 mismatch")

    with pytest.raises(typer.Exit) as info:
        command()
    assert info.value.exit_code == 1
    assert "[checksum] CRC32 mismatch" in caplog.text


def test_missing_files_exit_with_one():
    @handle_domain_errors
    def command():
        raise FileNotFoundError("nope.rgds")

    with pytest.raises(typer.Exit) as info:
        command()
    assert info.value.exit_code == 1


def test_invalid_config_exits_with_two():
    @handle_domain_errors
    def command():
        Positive(n=0)

    with pytest.raises(typer.Exit) as info:
        command()
    assert info.value.exit_code == 2


def test_other_errors_pass_through():
    @handle_domain_errors
    def command():
        raise KeyError("bug")

    with pytest.raises(KeyError):
        command()


def test_configure_logging_sets_the_level():
    configure_logging("debug")
    assert current_log_level() == "DEBUG"
    configure_logging("INFO")
    assert current_log_level() == "INFO"


def test_file_sha256(tmp_path: Path):
    path = tmp_path / "empty"
    path.write_bytes(b"")
    assert file_sha256(path) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
