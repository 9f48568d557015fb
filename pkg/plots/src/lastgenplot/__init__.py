"""Figure rendering for tie-breaking sweep results."""
from .figures import (IMAGE_FORMATS, REQUIRED_COLUMNS, STDERR_COLUMN,
                      EmptyFilterError, FigureSpec, RuleSeries, SchemaError,
                      delta_o_groups, gamma_upper_bound, load_rows, render,
                      render_all, series_for)

__version__ = "0.1.0"

__all__ = [
    "IMAGE_FORMATS",
    "REQUIRED_COLUMNS",
    "STDERR_COLUMN",
    "EmptyFilterError",
    "FigureSpec",
    "RuleSeries",
    "SchemaError",
    "delta_o_groups",
    "gamma_upper_bound",
    "load_rows",
    "render",
    "render_all",
    "series_for",
]
