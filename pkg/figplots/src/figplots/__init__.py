"""Figure rendering for cycle-simulation CSV outputs."""

from .plots import DPI, KINDS, PlotSpec, render

__version__ = "0.1.0"
__all__ = ["DPI", "KINDS", "PlotSpec", "render", "__version__"]
