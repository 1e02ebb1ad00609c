"""
Result formatting utilities.
"""
import logging
from typing import Any, Mapping

import polars as pl
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table


def configure_logging(verbose: bool = False, console: Console = None) -> None:
    """Route library logging through rich; INFO by default, DEBUG when verbose."""
    handler = RichHandler(console=console or Console(stderr=True), show_path=verbose,
                          rich_tracebacks=verbose, markup=False)
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format="%(message)s",
                        datefmt="[%X]", handlers=[handler], force=True)


class ResultFormatter:
    """Formats covert channel results for CLI output."""

    def __init__(self, console: Console = None):
        self.console = console or Console()

    def print_step(self, step_name: str, description: str = "") -> None:
        """Print a workflow step."""
        self.console.print(f"\n[bold blue]→ {step_name}[/bold blue]")
        if description:
            self.console.print(f"  {description}")

    def print_error(self, error_msg: str) -> None:
        """Print an error message."""
        self.console.print(Panel(
            f"[bold red]Error:[/bold red] {error_msg}",
            border_style="red"
        ))

    def print_warning(self, message: str) -> None:
        self.console.print(f"[yellow]![/yellow] {message}")

    def print_success(self, message: str) -> None:
        """Print a success message."""
        self.console.print(f"[green]✓[/green] {message}")

    def print_mapping(self, title: str, values: Mapping[str, Any]) -> None:
        """Two-column key/value table, used for capacity plans and transfer summaries."""
        table = Table(title=title, show_header=False, title_justify="left")
        table.add_column("key", style="cyan")
        table.add_column("value", justify="right")
        for key, value in values.items():
            table.add_row(str(key), str(value))
        self.console.print(table)

    def print_frame(self, title: str, frame: pl.DataFrame) -> None:
        """Print a polars table (metrics reports, capacity comparisons)."""
        table = Table(title=title, title_justify="left")
        for column in frame.columns:
            table.add_column(column)
        for row in frame.iter_rows():
            table.add_row(*("" if value is None else str(value) for value in row))
        self.console.print(table)

