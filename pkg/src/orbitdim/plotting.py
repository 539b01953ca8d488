"""PNG figures for the spectrum and report commands (matplotlib, Agg backend)."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import numpy as np

from .dimension_lab import predict
from .thermo import SpectrumCurve

_STYLE = {
    "figure.figsize": (6.0, 3.6),
    "figure.dpi": 120,
    "font.size": 9,
    "axes.linewidth": 0.6,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.4,
    "legend.frameon": False,
    "savefig.bbox": "tight",
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> Path:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    # Without a timestamp in the metadata reruns give identical bytes.
    fig.savefig(tmp, format="png", metadata={"Software": None})
    tmp.replace(path)
    return path


def spectrum_figure(curve: SpectrumCurve, path: Path) -> Path:
    """Left: ``eta(q)``. Right: ``D(alpha)`` with the bisector and thresholds."""
    plt = _pyplot()
    with plt.rc_context(_STYLE):
        fig, (ax1, ax2) = plt.subplots(1, 2)
        ax1.plot(curve.q, curve.eta, color="C0")
        ax1.axhline(0, color="0.7", lw=0.5)
        ax1.set_xlabel("q")
        ax1.set_ylabel("eta(q)")
        ax2.plot(curve.alpha, curve.D, color="C1", marker="." if curve.degenerate else None)
        lim = max(1.0, float(np.nanmax(curve.alpha)))
        ax2.plot([0, lim], [0, lim], color="0.7", lw=0.5, ls="--")
        for x, name in ((curve.dim, "dim"), (curve.alpha_max, "alpha_max")):
            ax2.axvline(x, color="0.6", lw=0.5, ls=":")
            ax2.text(x, 0.02, name, rotation=90, fontsize=7, va="bottom")
        ax2.set_ylim(0, 1.05)
        ax2.set_xlabel("alpha")
        ax2.set_ylabel("D(alpha)")
        fig.tight_layout()
        out = _save(fig, path)
        plt.close(fig)
    return out


def report_figure(curve: SpectrumCurve, rows: Sequence[Sequence[str]], path: Path) -> Path:
    """Predicted ``dim L`` and ``dim F`` against ``1/delta``; growth slopes overlaid."""
    plt = _pyplot()
    top = max(2.0, curve.alpha_plus * 1.15, *(float(r[1]) for r in rows)) if rows else max(2.0, curve.alpha_plus * 1.15)
    grid = np.linspace(0.05, top, 400)
    preds = [predict(curve, 1.0 / x) for x in grid]
    dim_l = [p.dim_L for p in preds]
    dim_f = [math.nan if p.dim_F is None else p.dim_F for p in preds]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots()
        ax.plot(grid, dim_l, color="C0", label="dim L (predicted)")
        ax.plot(grid, dim_f, color="C1", label="dim F (predicted)")
        for x in (curve.dim, curve.alpha_max, curve.alpha_plus):
            ax.axvline(x, color="0.7", lw=0.5, ls=":")
        for proxy, marker, color in (("unhit_growth", "o", "C1"), ("early_hit_growth", "s", "C0")):
            pts = [(float(r[1]), float(r[8])) for r in rows if r[6] == proxy and r[8] not in ("nan", "-inf", "inf")]
            if pts:
                xs, ys = zip(*pts)
                ax.scatter(xs, ys, s=12, marker=marker, color=color, alpha=0.7, label=proxy.replace("_", " "))
        ax.set_xlabel("1/delta")
        ax.set_ylabel("dimension")
        ax.set_ylim(0, 1.1)
        ax.legend(fontsize=7, loc="lower right")
        fig.tight_layout()
        out = _save(fig, path)
        plt.close(fig)
    return out
