"""Render report figures from the batch CSV outputs.

Each figure kind reads one documented CSV schema and draws reference lines
where meaningful (pi/2 on shooting sweeps, the value 4 on blow-up laws).
Rendering is deterministic: fixed style, fixed metadata, no timestamps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

HALF_PI = float(np.pi / 2)

#: required CSV columns per figure kind
SCHEMAS = {
    "profile": ("theta", "M", "G"),
    "sweep": ("A", "L"),
    "blowup": ("t", "sup_P", "sup_P_times_1mt", "accum_grad"),
    "decay": ("s", "sup_perturbation", "weighted_norm"),
    "spectrum": ("re", "im"),
}

_STYLE = {
    "figure.figsize": (6.0, 4.0),
    "figure.dpi": 110,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "savefig.dpi": 110,
}


class SchemaError(ValueError):
    """The input CSV is missing a required column."""

    def __init__(self, kind: str, column: str, path: str):
        super().__init__(f"{kind} figure: input {path!r} is missing column {column!r}")
        self.column = column


@dataclass
class FigureSpec:
    kind: str
    inputs: list
    output: str
    title: str | None = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SCHEMAS:
            raise ValueError(f"unknown figure kind {self.kind!r}; choose from {sorted(SCHEMAS)}")
        if not self.inputs:
            raise ValueError("need at least one input CSV")


def load_table(path: str, kind: str) -> np.ndarray:
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.dtype.names is None:
        raise SchemaError(kind, SCHEMAS[kind][0], path)
    for col in SCHEMAS[kind]:
        if col not in data.dtype.names:
            raise SchemaError(kind, col, path)
    return np.atleast_1d(data)


def render(spec: FigureSpec):
    """Draw the figure and write it; returns the matplotlib Figure."""
    tables = [load_table(p, spec.kind) for p in spec.inputs]
    with plt.rc_context(_STYLE):
        fig, draw = plt.figure(), _DRAWERS[spec.kind]
        draw(fig, tables, spec)
        if spec.title:
            fig.suptitle(spec.title)
        fig.tight_layout()
        fig.savefig(spec.output, metadata={"Software": "ipm1d-plots"})
    return fig


def _draw_profile(fig, tables, spec):
    ax1 = fig.add_subplot(2, 1, 1)
    ax2 = fig.add_subplot(2, 1, 2, sharex=ax1)
    for tab in tables:
        ax1.plot(tab["theta"], tab["M"], lw=1.2)
        ax2.plot(tab["theta"], tab["G"], lw=1.2, color="tab:orange")
    ax1.set_ylabel("M")
    ax2.set_ylabel("G")
    ax2.set_xlabel(r"$\theta$")
    ax1.axhline(0.0, color="k", lw=0.6)
    ax2.axhline(0.0, color="k", lw=0.6)


def _draw_sweep(fig, tables, spec):
    ax = fig.add_subplot(1, 1, 1)
    for tab in tables:
        order = np.argsort(tab["A"])
        ax.semilogx(tab["A"][order], tab["L"][order], "o-", ms=3, lw=1.0)
    ax.axhline(HALF_PI, color="tab:red", ls="--", lw=1.0, label=r"$\pi/2$")
    ax.set_xlabel("A")
    ax.set_ylabel("root angle L(A)")
    ax.legend(loc="lower left")


def _draw_blowup(fig, tables, spec):
    ax = fig.add_subplot(1, 1, 1)
    for tab in tables:
        ax.plot(tab["t"], tab["sup_P_times_1mt"], lw=1.2, label=r"$(1-t)\,\sup|P|$")
    ax.axhline(4.0, color="tab:red", ls="--", lw=1.0, label="self-similar value 4")
    ax.set_xlabel("t")
    ax.set_ylabel(r"$(1-t)\,\sup|P|$")
    twin = ax.twinx()
    for tab in tables:
        twin.plot(tab["t"], tab["accum_grad"], lw=1.0, color="tab:green", alpha=0.7)
    twin.set_ylabel("accumulated gradient", color="tab:green")
    ax.legend(loc="center left")


def _draw_decay(fig, tables, spec):
    ax = fig.add_subplot(1, 1, 1)
    for tab in tables:
        ax.semilogy(tab["s"], np.maximum(tab["sup_perturbation"], 1e-300), lw=1.2, label="sup norm")
        ax.semilogy(
            tab["s"], np.maximum(tab["weighted_norm"], 1e-300), lw=1.0, ls="--", label="weighted norm"
        )
    ax.set_xlabel("s")
    ax.set_ylabel("perturbation size")
    ax.legend(loc="best")


def _draw_spectrum(fig, tables, spec):
    ax = fig.add_subplot(1, 1, 1)
    for tab in tables:
        if "resolved" in tab.dtype.names:
            mask = tab["resolved"] > 0.5
            ax.plot(tab["re"][~mask], tab["im"][~mask], ".", ms=2, color="0.7", label="unresolved")
            ax.plot(tab["re"][mask], tab["im"][mask], "o", ms=4, color="tab:blue", label="resolved")
            ax.legend(loc="best")
        else:
            ax.plot(tab["re"], tab["im"], "o", ms=3)
    ax.axvline(0.0, color="tab:red", ls="--", lw=1.0)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")


_DRAWERS = {
    "profile": _draw_profile,
    "sweep": _draw_sweep,
    "blowup": _draw_blowup,
    "decay": _draw_decay,
    "spectrum": _draw_spectrum,
}
