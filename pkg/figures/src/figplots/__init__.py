"""Figure renderers for the spatial-confounding benchmark outputs.

Four batch plot kinds, each consuming one documented CSV schema:
contour (ratio maps), boxplot (per-cell estimates), biascurve
(d_x against basis count), and forest (application report).
"""

from .render import PlotJob, render, render_figure

__version__ = "0.1.0"
