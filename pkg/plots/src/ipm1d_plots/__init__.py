"""Report figures for the ipm1d batch outputs."""

__version__ = "0.1.0"

from .render import SCHEMAS, FigureSpec, SchemaError, render

__all__ = ["FigureSpec", "SCHEMAS", "SchemaError", "render", "__version__"]
