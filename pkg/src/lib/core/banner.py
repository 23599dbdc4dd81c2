"""
This module prints the run configuration banner shown before training.
"""

from __future__ import annotations

from pathlib import Path

from rich.console import Console
from rich.panel import Panel
from rich.table import Table
from rich.text import Text

from ...schemas.config import TrainConfig
from .config import Settings


def print_banner(
    console: Console, settings: Settings, config: TrainConfig, data: Path
):
    """
    Prints a banner to the console.
    """

    title_art = r"""
██████╗ ██████╗ ██████╗
██╔══██╗██╔══██╗██╔══██╗
██████╔╝██████╔╝██████╔╝
██╔══██╗██╔═══╝ ██╔══██╗
██║  ██║██║     ██║  ██║
╚═╝  ╚═╝╚═╝     ╚═╝  ╚═╝
    """

    console.print(Text(title_art, style="bold blue"), justify="center")

    grid = Table.grid(expand=True, padding=(0, 2))
    grid.add_column(justify="right", style="bold cyan")
    grid.add_column(justify="left", style="white")

    grid.add_row("Corpus :", f"[italic]{data}[/italic]")
    grid.add_row("Cache Root :", f"[italic]{settings.cache_dir}[/italic]")
    grid.add_row("Variant :", f"[green]{config.variant.value}[/green]")
    grid.add_row(
        "Factors / Aspects :",
        f"[yellow]{config.n_factors}[/yellow] / "
        f"[yellow]{config.n_preferred}+{config.n_rejected}[/yellow]",
    )
    grid.add_row(
        "Learning Rate :", f"[magenta]{config.learning_rate:g}[/magenta]"
    )
    grid.add_row("Batch Size :", f"[magenta]{config.batch_size}[/magenta]")
    grid.add_row(
        "Epochs / Patience :", f"{config.max_epochs} / {config.patience}"
    )
    grid.add_row("Seed :", str(config.seed))

    panel = Panel(
        grid,
        title="[bold]Training Configuration[/bold]",
        border_style="blue",
        expand=False,
        padding=(1, 2),
    )

    console.print(panel)
