"""CSV-to-figure rendering for hqrl experiment outputs."""

from .render import BarInput, FigureSpec, MissingColumnsError, render

__all__ = ["BarInput", "FigureSpec", "MissingColumnsError", "render"]
