"""SVG plots of solved fields, cone profiles and decay reports.

Figures are built on the Agg canvas without touching pyplot state, and SVG
output is made byte-reproducible by fixing the hash salt and dropping the
date stamp.
"""

from __future__ import annotations

import io

import matplotlib
import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure
from matplotlib.tri import Triangulation

from .cone import ConeSolutionTable, eval_profile
from .verification import AsymptoticsReport

SVG_SALT = "hypgraph"


def _new_figure(size=(5.0, 4.0)):
    fig = Figure(figsize=size)
    FigureCanvasAgg(fig)
    return fig, fig.add_subplot(1, 1, 1)


def svg_bytes(fig: Figure) -> bytes:
    buf = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "none"}):
        fig.savefig(buf, format="svg", metadata={"Date": None})
    return buf.getvalue()


def field_figure(x, f, title: str = "") -> Figure:
    """Filled contours of f over scattered nodes."""
    x = np.asarray(x, float)
    fig, ax = _new_figure()
    tri = Triangulation(x[:, 0], x[:, 1])
    cs = ax.tricontourf(tri, np.asarray(f, float), levels=20)
    fig.colorbar(cs, ax=ax, label="f")
    ax.set_aspect("equal")
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    if title:
        ax.set_title(title)
    return fig


def profile_figure(table: ConeSolutionTable, n: int = 400) -> Figure:
    """The cone profile h over its opening."""
    th = np.linspace(0, table.width, n + 2)[1:-1]
    fig, ax = _new_figure()
    ax.plot(th, eval_profile(table, th), color="k")
    ax.set_xlabel("theta")
    ax.set_ylabel("h")
    ax.set_title(f"cone profile, mu = {table.mu:g}")
    return fig


def report_figure(report: AsymptoticsReport) -> Figure:
    """Band sups against band radius in log-log axes, with floor and fit."""
    fig, ax = _new_figure()
    r, s = report.radii, report.sups
    pos = s > 0
    ax.loglog(r[pos], s[pos], "o-", color="k", label="sup deviation")
    if report.floor is not None and np.any(np.isfinite(report.floor)):
        ax.loglog(r, report.floor, "s--", color="0.5", label="floor")
    if report.reference is not None:
        ax.loglog(r, report.reference, "x:", color="tab:blue", label="reference")
    used = report.used & pos
    if np.isfinite(report.exponent) and np.sum(used) >= 2:
        c = np.mean(np.log(s[used]) - report.exponent * np.log(r[used]))
        ax.loglog(r[used], np.exp(c) * r[used] ** report.exponent, color="tab:red",
                  label=f"slope {report.exponent:.3f}")
    ax.set_xlabel("band radius")
    ax.set_ylabel("sup deviation")
    ax.set_title(f"{report.case}: {'pass' if report.passed else 'fail'}")
    ax.legend()
    return fig


__all__ = ["field_figure", "profile_figure", "report_figure", "svg_bytes"]
