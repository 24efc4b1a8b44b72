"""Operator CLI: serve the gateway, record fixtures, run the selfcheck."""

from __future__ import annotations

import dataclasses
import sys
from pathlib import Path

import click

from .config import load_service_config
from .errors import ConfigError, MedChatError
from .llm import LlmMode
from .orchestration import run_pipeline
from .selfcheck import run_selfcheck
from .vision import FundusImage


@click.group()
def main() -> None:
    """Fundus-image diagnostic report service."""


@main.command()
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    default=None,
    help="TOML config file; defaults to offline stub/replay settings.",
)
def serve(config_path: Path | None) -> None:
    """Run the HTTP service (blocks)."""
    import uvicorn

    from .service import create_app

    try:
        config = load_service_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(f"config error: {exc}")
    app = create_app(config)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port)


@main.command("record-fixtures")
@click.option(
    "--config",
    "config_path",
    type=click.Path(path_type=Path),
    required=True,
    help="TOML config; llm section must carry base_url, api_key, fixture_dir.",
)
@click.option(
    "--case",
    "case_path",
    type=click.Path(path_type=Path, exists=True),
    required=True,
    help="Fundus image (PNG/JPEG) to run.",
)
@click.option(
    "--note",
    "note_path",
    type=click.Path(path_type=Path, exists=True),
    default=None,
    help="Optional clinical note text file.",
)
def record_fixtures(config_path: Path, case_path: Path, note_path: Path | None) -> None:
    """Run the pipeline in RECORD mode and print the golden result."""
    try:
        config = load_service_config(config_path)
    except ConfigError as exc:
        raise click.ClickException(f"config error: {exc}")
    try:
        llm = dataclasses.replace(config.llm, mode=LlmMode.RECORD)
    except ConfigError as exc:
        raise click.ClickException(f"config error: {exc}")
    try:
        image = FundusImage.from_bytes(case_path.read_bytes())
    except ValueError as exc:
        raise click.ClickException(f"cannot read case image: {exc}")
    note = note_path.read_text(encoding="utf-8").strip() if note_path else None
    try:
        result = run_pipeline(image, note, config.vision, llm)
    except MedChatError as exc:
        raise click.ClickException(str(exc))
    click.echo(result.canonical_json())
    click.echo(f"fixtures written to {llm.fixture_dir}", err=True)


@main.command()
@click.option(
    "--fixtures",
    "fixture_dir",
    type=click.Path(path_type=Path),
    default=None,
    help="Replay fixture directory; defaults to the packaged set.",
)
def selfcheck(fixture_dir: Path | None) -> None:
    """Offline end-to-end determinism check; exits nonzero on mismatch."""
    try:
        ok, lines, _ = run_selfcheck(fixture_dir)
    except MedChatError as exc:
        raise click.ClickException(f"selfcheck could not run: {exc}")
    for line in lines:
        click.echo(line)
    if not ok:
        sys.exit(1)
    click.echo("selfcheck passed")


if __name__ == "__main__":
    main()
