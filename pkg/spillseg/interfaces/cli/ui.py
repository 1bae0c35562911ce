"""Console helpers for the spillseg CLI: badges, progress, metric and gradcheck tables."""

from __future__ import annotations

import importlib.metadata
from typing import Optional

from rich import box
from rich.console import Console
from rich.panel import Panel
from rich.progress import (
    BarColumn,
    Progress,
    SpinnerColumn,
    TaskProgressColumn,
    TextColumn,
)
from rich.table import Table
from rich.text import Text

from spillseg import __version__

try:
    VERSION = importlib.metadata.version("spillseg")
except importlib.metadata.PackageNotFoundError:
    VERSION = __version__

console = Console()
err_console = Console(stderr=True)

ICONS = {
    "synth": "🛰️",
    "train": "🏋️",
    "evaluate": "📊",
    "predict": "🔍",
    "gradcheck": "🧮",
    "success": "✅",
    "error": "❌",
    "warning": "⚠️",
    "info": "ℹ️",
    "check": "✓",
    "star": "★",
}


def pass_badge(passed: bool) -> Text:
    if passed:
        return Text(" ✓ PASS ", style="bold white on green")
    return Text(" ✗ FAIL ", style="bold white on red")


def create_progress_context() -> Progress:
    """Spinner, bar and a free-form ``status`` field; cleared when done."""
    return Progress(
        SpinnerColumn(),
        TextColumn("[bold cyan]{task.description}"),
        BarColumn(bar_width=32),
        TaskProgressColumn(),
        TextColumn("[dim]{task.fields[status]}[/dim]"),
        console=console,
        transient=True,
    )


def _fmt_metric(value: Optional[float]) -> str:
    return "[dim]n/a[/dim]" if value is None else f"{value:.4f}"


def create_metrics_table(title: str, rows: dict) -> Table:
    """One row per evaluated subject (model, baseline) with the metric columns."""
    table = Table(
        title=f"[bold]{title}[/bold]",
        box=box.ROUNDED,
        border_style="cyan",
        header_style="bold cyan",
        show_header=True,
        padding=(0, 1),
    )
    table.add_column("Subject", style="bold", min_width=10)
    for name in ("Accuracy", "Precision", "Recall", "F1", "IoU", "ROC-AUC"):
        table.add_column(name, justify="right")

    for subject, report in rows.items():
        table.add_row(
            subject,
            _fmt_metric(report.accuracy),
            _fmt_metric(report.precision),
            _fmt_metric(report.recall),
            _fmt_metric(report.f1),
            _fmt_metric(report.iou),
            _fmt_metric(report.roc_auc),
        )
    return table


def create_gradcheck_table(rows) -> Table:
    table = Table(
        title="[bold]Gradient check[/bold]",
        box=box.ROUNDED,
        border_style="cyan",
        header_style="bold cyan",
        padding=(0, 1),
    )
    table.add_column("Check", style="bold", min_width=18)
    table.add_column("Max rel. error", justify="right")
    table.add_column("Tolerance", justify="right")
    table.add_column("Seeds", justify="right")
    table.add_column("Status", justify="center")
    for row in rows:
        table.add_row(
            row.name,
            f"{row.max_rel_error:.2e}",
            f"{row.tol:.0e}",
            str(row.seeds),
            pass_badge(row.passed),
        )
    return table


def print_command_header(command: str, details: dict):
    """Print a header panel for a command run."""
    icon = ICONS.get(command, ICONS["info"])
    content = Text()
    content.append(f"{icon} ", style="bold")
    content.append(command.upper(), style="bold cyan")
    width = max((len(k) for k in details), default=0) + 2
    for key, value in details.items():
        content.append("\n")
        content.append(key.ljust(width), style="dim")
        content.append(str(value), style="bold white")
    console.print(
        Panel(content, border_style="cyan", box=box.ROUNDED, title_align="left", padding=(0, 2))
    )


def print_success(message: str):
    console.print(f"[green]{ICONS['success']} {message}[/green]")


def print_error(message: str):
    """Written to stderr."""
    err_console.print(f"[red]{ICONS['error']} {message}[/red]")


def print_warning(message: str):
    console.print(f"[yellow]{ICONS['warning']} {message}[/yellow]")


def print_info(message: str):
    console.print(f"[cyan]{ICONS['info']} {message}[/cyan]")
