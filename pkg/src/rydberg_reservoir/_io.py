"""Shared text-file helpers."""

from __future__ import annotations

import contextlib
import os
from typing import IO, Union

PathOrFile = Union[str, os.PathLike, IO[str]]


def open_text(target: PathOrFile, mode: str):
    """Open a path as UTF-8 text, or pass an open handle through unclosed."""
    if hasattr(target, "read") or hasattr(target, "write"):
        return contextlib.nullcontext(target)
    return open(target, mode, encoding="utf-8", newline="")


def format_float(value: float) -> str:
    """17 significant digits in scientific notation; round-trips exactly."""
    return f"{float(value):.16e}"
