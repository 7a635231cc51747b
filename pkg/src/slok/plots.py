"""Figure rendering for CLI reports.

Every CLI report path that writes delimited output also renders a figure
next to it; these helpers keep all matplotlib usage in one place and use
the Agg backend so runs work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .body import SMOOTH, SupportFn, build_body


def margin_histogram(margins, path: str, title: str) -> None:
    margins = np.asarray(list(margins), dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(margins, bins=min(40, max(5, len(margins) // 10)), color="#43658b")
    ax.axvline(0.0, color="crimson", linewidth=1)
    ax.set_xlabel("margin")
    ax.set_ylabel("count")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def body_outline(sf: SupportFn, path: str, title: str) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    if sf.regime == SMOOTH:
        from .body import d2h, support_gradient

        th = sf.grid.angles
        h = sf.values
        hp = support_gradient(sf)
        # boundary point of the support line at angle theta
        x = h * np.cos(th) - hp * np.sin(th)
        y = h * np.sin(th) + hp * np.cos(th)
        order = np.argsort(th)
        ax.plot(np.append(x[order], x[order][0]),
                np.append(y[order], y[order][0]), color="#43658b")
    else:
        body = build_body(sf)
        if sf.dim == 2:
            v = body.vertices
            ang = np.arctan2(v[:, 1], v[:, 0])
            order = np.argsort(ang)
            ax.plot(np.append(v[order, 0], v[order][0, 0]),
                    np.append(v[order, 1], v[order][0, 1]), color="#43658b")
        else:
            v = body.vertices
            ax.plot(v[:, 0], v[:, 1], ".", color="#43658b")
            ax.set_title(title + " (xy projection)")
    ax.set_aspect("equal")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def trace_plot(trace, path: str, title: str, ylabel: str = "objective") -> None:
    trace = np.asarray(list(trace), dtype=float)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(np.arange(len(trace)), trace, marker=".", color="#43658b")
    ax.set_xlabel("iteration")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
