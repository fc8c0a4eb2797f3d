"""Rendering for curvstab experiment outputs."""

from .figures import PlotSpec, RenderResult, SchemaError, render
