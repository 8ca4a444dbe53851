"""Main entry point for the reguide CLI"""

import typer

from reguide.utils import configure_logging

from .data_cli import app as data_app
from .eval_cli import app as eval_app
from .sample_cli import app as sample_app
from .train_cli import app as train_app

app = typer.Typer(name="Reguide CLI", no_args_is_help=True)

for _sub_app in (data_app, train_app, sample_app, eval_app):
    app.registered_commands.extend(_sub_app.registered_commands)


@app.callback()
def main(
    log_level: str = typer.Option("INFO", "--log-level", help="Log verbosity of the stderr sink."),
):
    """Reward-guided diffusion sampling over synthetic motion trajectories."""
    configure_logging(log_level)


def dispatch(argv: list[str] | None = None) -> int:
    """Run the CLI on `argv` and return its exit code instead of exiting."""
    try:
        app(args=argv, prog_name="reguide")
    except SystemExit as exit_:
        if exit_.code is None:
            return 0
        return exit_.code if isinstance(exit_.code, int) else 1
    return 0
