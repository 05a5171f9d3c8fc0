"""Figures for power studies: matplotlib PNGs and a small gnuplot script writer."""

from __future__ import annotations

import os

import numpy as np

golden_mean = (np.sqrt(5.0) - 1.0) / 2.0
fig_width = 5.0

params = {
    "axes.labelsize": 10,
    "font.family": "serif",
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 150,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def _curve_label(study, others) -> str:
    """Name a curve by whichever of epsilon, hbar, n varies across the set."""
    getters = {"eps": lambda s: s.epsilon, "hbar": lambda s: s.hbar, "n": lambda s: s.scenario.n}
    parts = []
    for key, get in getters.items():
        if len({get(s) for s in others}) > 1:
            val = get(study)
            parts.append(f"{key}={val:.4g}" if isinstance(val, float) else f"{key}={val}")
    return ", ".join(parts) or study.label.upper()


def plot_power(studies, path, title: str | None = None) -> str:
    """Power curves of one or more studies with the envelope as a solid black line."""
    plt = _pyplot()
    if not isinstance(studies, (list, tuple)):
        studies = [studies]
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        first = studies[0]
        ax.plot(first.h, first.envelope, color="black", lw=1.6, label="envelope")
        for st in studies:
            ax.plot(st.h, st.reject_rate, marker="o", ls="--", label=_curve_label(st, studies))
        ax.set_xlabel("h")
        ax.set_ylabel("rejection rate")
        ax.set_ylim(-0.02, 1.02)
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return str(path)


def plot_comparison(nlr, wald, path, title: str | None = None) -> str:
    plt = _pyplot()
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.plot(nlr.h, nlr.envelope, color="black", lw=1.6, label="envelope")
        ax.plot(nlr.h, nlr.reject_rate, marker="o", ls="--", label="NLR")
        ax.plot(wald.h, wald.reject_rate, marker="s", ls=":", label="Wald")
        ax.set_xlabel("h")
        ax.set_ylabel("rejection rate")
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return str(path)


def plot_envelope(hs, env, lower, path, side: str) -> str:
    plt = _pyplot()
    with plt.rc_context(params):
        fig, ax = plt.subplots()
        ax.plot(hs, env, color="black", lw=1.6, label="envelope")
        if lower is not None:
            ax.plot(hs, lower, ls="--", label="lower bound")
        ax.set_xlabel("h")
        ax.set_ylabel("power")
        ax.set_title(f"power envelope ({side})")
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        fig.savefig(path)
        plt.close(fig)
    return str(path)


def gnuplot_script(csv_path, columns=("reject_rate",), out_png: str | None = None) -> str:
    """Script plotting the named CSV columns (and the envelope if present) against ``h``."""
    csv_name = os.path.basename(str(csv_path))
    png = out_png or os.path.splitext(csv_name)[0] + ".png"
    with open(csv_path, encoding="utf-8") as fh:
        header = next(line for line in fh if not line.startswith("#")).strip().split(",")
    idx = {name: k + 1 for k, name in enumerate(header)}
    series = [f"'{csv_name}' using {idx['h']}:{idx[c]} with linespoints title '{c}'" for c in columns if c in idx]
    if "envelope" in idx:
        series.append(f"'{csv_name}' using {idx['h']}:{idx['envelope']} with lines lw 2 lc 'black' title 'envelope'")
    lines = [
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        "set terminal pngcairo size 800,500",
        f"set output '{png}'",
        "set xlabel 'h'",
        "set ylabel 'rejection rate'",
        "plot " + ", \\\n     ".join(series),
    ]
    return "\n".join(lines) + "\n"
