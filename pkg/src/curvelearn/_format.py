"""Shared float formatting for the text file formats (round-trip exact)."""

from __future__ import annotations


def fmt_g17(x: float) -> str:
    """17 significant digits; parses back to the identical float64."""
    return format(float(x), ".17g")
