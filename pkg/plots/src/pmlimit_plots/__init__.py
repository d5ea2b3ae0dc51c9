"""Batch figure rendering for pmlimit sweep output directories."""

from .bundle import MissingSeries, ReportBundle, SchemaMismatch
from .render import RenderResult, render_sweep

__version__ = "0.1.0"
