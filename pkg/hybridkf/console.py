from __future__ import annotations

__all__ = ["CONSOLE", "create_table"]

import logging
from collections.abc import Iterable, Sequence

from rich import box
from rich.console import Console
from rich.table import Table
from rich.theme import Theme

LOGGER = logging.getLogger(__name__)

CONSOLE = Console(
    theme=Theme(
        {
            "title": "magenta",
            "title.border": "dim magenta",
            "subtitle": "blue",
            "subtitle.border": "dim blue",
            "syntax.border": "dim cyan",
            "claim.holds": "green",
            "claim.fails": "bold red",
            "logging.level.debug": "dim white",
            "logging.level.info": "white",
            "logging.level.warning": "yellow",
            "logging.level.error": "bold red",
            "logging.level.critical": "bold magenta",
        }
    )
)


def create_table(
    columns: Sequence[str],
    rows: Iterable[Sequence[object]],
    title: str | None = None,
    caption: str | None = None,
) -> Table:
    table = Table(
        title=title,
        caption=caption,
        box=box.ASCII2,
        border_style="title.border",
        title_style="title",
        caption_style="subtitle",
    )
    for index, column in enumerate(columns):
        table.add_column(column, justify="left" if index == 0 else "right")
    for row in rows:
        table.add_row(*(x if isinstance(x, str) else f"{x}" for x in row))
    return table
