"""stepgl-plots: static figures from stepgl CSV / JSON-lines / grid outputs."""

from .readers import EmptyInputError, SchemaError, read_csv, read_grid, read_records
from .figures import FigureSpec, count_bright_regions, render

__version__ = "0.1.0"
__all__ = ["FigureSpec", "render", "count_bright_regions", "read_csv", "read_grid",
           "read_records", "SchemaError", "EmptyInputError"]
