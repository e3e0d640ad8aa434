"""Figures rendered next to the CSV outputs (the CSV files stay authoritative)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .experiments import Table  # noqa: E402

_STYLE = {
    ("sub6", "option8"): dict(color="tab:blue", marker="o", ls="-"),
    ("sub6", "option72"): dict(color="tab:blue", marker="s", ls="--"),
    ("mmwave", "option8"): dict(color="tab:red", marker="o", ls="-"),
    ("mmwave", "option72"): dict(color="tab:red", marker="s", ls="--"),
}
_SPLIT_LABEL = {"option8": "Option 8", "option72": "Option 7.2"}
_BAND_LABEL = {"sub6": "sub-6 GHz", "mmwave": "mmWave"}


def _label(band, split):
    return f"{_BAND_LABEL.get(band, band)}, {_SPLIT_LABEL.get(split, split)}"


def _series(table: Table, x: str, y: str, err: str | None = None):
    idx = {c: i for i, c in enumerate(table.columns)}
    out = {}
    for row in table.rows:
        key = (row[idx["band"]], row[idx["split"]])
        e = row[idx[err]] if err else math.nan
        out.setdefault(key, []).append((row[idx[x]], row[idx[y]], e))
    return {k: np.array(sorted(v), dtype=float) for k, v in out.items()}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    # fixed metadata keeps reruns byte-identical
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def _line_plot(table, x, y, err, xlabel, ylabel, path, logx=False, logy=False):
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for key, arr in _series(table, x, y, err).items():
        style = _STYLE.get(key, {})
        ax.errorbar(arr[:, 0], arr[:, 1], yerr=np.nan_to_num(arr[:, 2]), capsize=3,
                    label=_label(*key), **style)
    if logx:
        ax.set_xscale("log", base=2)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, path)


def plot_min_bandwidth(table: Table, path) -> Path:
    return _line_plot(table, "n_antennas", "mean_min_bandwidth_hz", "stderr_hz",
                      "fronthaul antennas $N_c$", "minimum fronthaul bandwidth [Hz]",
                      Path(path), logx=True, logy=True)


def plot_maxmin(table: Table, path) -> Path:
    return _line_plot(table, "n_antennas", "mean_t_star_db", "stderr_db",
                      "fronthaul antennas $N_c$", "max-min SINR [dB]", Path(path), logx=True)


def plot_powermin(table: Table, path) -> Path:
    """Mean total power against the SINR target; low-feasibility points are hollow."""
    idx = {c: i for i, c in enumerate(table.columns)}
    fig, ax = plt.subplots(figsize=(5.5, 4))
    for key, arr in _series(table, "gamma_db", "mean_total_power_w", "stderr_w").items():
        style = dict(_STYLE.get(key, {}))
        ax.errorbar(arr[:, 0], arr[:, 1], yerr=np.nan_to_num(arr[:, 2]), capsize=3,
                    label=_label(*key), **style)
        low = [r[idx["gamma_db"]] for r in table.rows
               if (r[idx["band"]], r[idx["split"]]) == key and r[idx["low_feasibility"]]]
        mask = np.isin(arr[:, 0], low)
        ax.plot(arr[mask, 0], arr[mask, 1], ls="none", marker="o", ms=11, mfc="none",
                color=style.get("color", "k"))
    ax.set_xlabel("SINR requirement [dB]")
    ax.set_ylabel("total UAV-AP power [W]")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    return _save(fig, Path(path))


def plot_fair_power(table: Table, path) -> Path:
    idx = {c: i for i, c in enumerate(table.columns)}
    labels = [_label(r[idx["band"]], r[idx["split"]]) for r in table.rows]
    before = [r[idx["mean_power_of_maxmin_w"]] for r in table.rows]
    after = [r[idx["mean_power_after_minimization_w"]] for r in table.rows]
    sinr = [r[idx["mean_t_star_db"]] for r in table.rows]
    x = np.arange(len(labels))
    fig, ax = plt.subplots(figsize=(6.5, 4))
    ax.bar(x - 0.2, before, 0.4, label="max-min allocation")
    bars = ax.bar(x + 0.2, after, 0.4, label="after power minimisation")
    for b, s in zip(bars, sinr):
        if math.isfinite(s):
            ax.annotate(f"{s:.1f} dB", (b.get_x() + b.get_width() / 2, b.get_height()),
                        ha="center", va="bottom", fontsize=7)
    ax.set_xticks(x, labels, rotation=15, fontsize=8)
    ax.set_ylabel("total UAV-AP power [W]")
    ax.legend(fontsize=8)
    return _save(fig, Path(path))


PLOTTERS = {
    "min-bandwidth": plot_min_bandwidth,
    "maxmin": plot_maxmin,
    "powermin": plot_powermin,
    "fair-power": plot_fair_power,
}
