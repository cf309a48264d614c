"""Render experiment CSVs into paper-style figures.

Three figure kinds, all driven purely by the CSV columns the experiment
CLI emits; no statistics beyond mean/std aggregation happen here.

- variance: one log-y line per ansatz kind from the variance benchmark CSV
  (columns kind, n, variance, std_error).
- curves: per-step mean with a +-std band across seeds from one or more
  training metrics CSVs (columns step, seed and a chosen value column).
- bars: grouped bars per instance size comparing methods, from evaluation
  and QAOA CSVs (columns p_optimal / p_valid).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import pandas as pd

FIGURE_KINDS = ("variance", "curves", "bars")


class MissingColumnsError(ValueError):
    """A named input CSV lacks columns the figure kind requires."""

    def __init__(self, path, missing):
        super().__init__(f"{path}: missing columns {sorted(missing)}")
        self.path = path
        self.missing = sorted(missing)


@dataclass
class BarInput:
    series: str
    size: int
    path: Path


@dataclass
class FigureSpec:
    kind: str
    inputs: list[Path] = field(default_factory=list)
    bar_inputs: list[BarInput] = field(default_factory=list)
    output: Path = Path("figure.png")
    labels: list[str] | None = None
    value_column: str = "approx_ratio"
    metric: str = "p_optimal"
    title: str = ""
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in FIGURE_KINDS:
            raise ValueError(f"kind must be one of {FIGURE_KINDS}, got {self.kind!r}")


def _load_csv(path, required) -> pd.DataFrame:
    frame = pd.read_csv(path)
    missing = set(required) - set(frame.columns)
    if missing:
        raise MissingColumnsError(path, missing)
    return frame


def _finish(fig, spec: FigureSpec) -> Path:
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    # strip the library's software stamp so identical inputs hash identically
    fig.savefig(out, dpi=spec.dpi, metadata={"Software": None})
    plt.close(fig)
    return out


def render_variance(spec: FigureSpec) -> Path:
    frames = [_load_csv(p, ["kind", "n", "variance", "std_error"]) for p in spec.inputs]
    data = pd.concat(frames, ignore_index=True)
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for kind, group in data.groupby("kind", sort=False):
        group = group.sort_values("n")
        ax.errorbar(group["n"], group["variance"], yerr=group["std_error"],
                    marker="o", capsize=3, label=str(kind))
    ax.set_yscale("log")
    ax.set_xlabel("qubits")
    ax.set_ylabel("gradient variance")
    ax.set_title(spec.title or "Cost-gradient variance vs system size")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    return _finish(fig, spec)


def render_curves(spec: FigureSpec) -> Path:
    frames = [_load_csv(p, ["step", "seed", spec.value_column]) for p in spec.inputs]
    data = pd.concat(frames, ignore_index=True)
    grouped = data.groupby("step")[spec.value_column]
    mean = grouped.mean()
    std = grouped.std().fillna(0.0)  # a single seed renders a zero-width band
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(mean.index, mean.values, label=(spec.labels or ["mean over seeds"])[0])
    ax.fill_between(mean.index, (mean - std).values, (mean + std).values, alpha=0.25)
    ax.set_xlabel("training step")
    ax.set_ylabel(spec.value_column.replace("_", " "))
    ax.set_title(spec.title or f"Training {spec.value_column.replace('_', ' ')}")
    ax.legend()
    ax.grid(True, alpha=0.3)
    return _finish(fig, spec)


def render_bars(spec: FigureSpec) -> Path:
    if not spec.bar_inputs:
        raise ValueError("bars need series:size:path inputs")
    rows = []
    for item in spec.bar_inputs:
        frame = _load_csv(item.path, [spec.metric])
        rows.append({"series": item.series, "size": item.size,
                     "value": float(frame[spec.metric].mean())})
    data = pd.DataFrame(rows)
    sizes = sorted(data["size"].unique())
    series = list(dict.fromkeys(data["series"]))
    width = 0.8 / len(series)
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    for k, name in enumerate(series):
        sub = data[data["series"] == name].set_index("size")
        xs = [i + (k - (len(series) - 1) / 2) * width for i, s in enumerate(sizes)
              if s in sub.index]
        ys = [sub.loc[s, "value"] for s in sizes if s in sub.index]
        ax.bar(xs, ys, width=width, label=name)
    ax.set_xticks(range(len(sizes)))
    ax.set_xticklabels([str(s) for s in sizes])
    ax.set_xlabel("instance size")
    ax.set_ylabel(spec.metric.replace("_", " "))
    ax.set_ylim(0, 1.05)
    ax.set_title(spec.title or f"Mean {spec.metric.replace('_', ' ')} by method")
    ax.legend()
    ax.grid(True, axis="y", alpha=0.3)
    return _finish(fig, spec)


_RENDERERS = {"variance": render_variance, "curves": render_curves, "bars": render_bars}


def render(spec: FigureSpec) -> Path:
    """Write the figure described by spec; returns the output path."""
    return _RENDERERS[spec.kind](spec)
