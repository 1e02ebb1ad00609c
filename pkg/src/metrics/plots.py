"""
Quality plots: SNR and PSNR against the hidden-bit fraction, one line per
codec/algorithm pair.
"""
import logging
from pathlib import Path
from typing import Iterable

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import polars as pl  # noqa: E402
import seaborn as sns  # noqa: E402

from src.metrics.quality import IDENTICAL, MetricsReport  # noqa: E402

logger = logging.getLogger(__name__)


def plot_frame(reports: Iterable[MetricsReport]) -> pl.DataFrame:
    """Long-format table for plotting; identical (infinite) rows are left out."""
    rows = []
    for r in reports:
        if r.snr_db == IDENTICAL:
            continue
        series = f"{r.codec.name}/{r.alg.name}"
        rows.append({"series": series, "hidden_pct": 100 * r.hidden_fraction, "metric": "SNR", "db": r.snr_db})
        rows.append({"series": series, "hidden_pct": 100 * r.hidden_fraction, "metric": "PSNR", "db": r.psnr_db})
    return pl.DataFrame(rows, schema={"series": pl.Utf8, "hidden_pct": pl.Float64,
                                      "metric": pl.Utf8, "db": pl.Float64})


def plot_quality(reports: Iterable[MetricsReport], path: Path) -> Path:
    frame = plot_frame(reports).sort(["series", "hidden_pct"])
    if frame.is_empty():
        raise ValueError("no finite metrics to plot")
    sns.set_theme(style="whitegrid")
    fig, axes = plt.subplots(1, 2, figsize=(12, 5), sharex=True)
    for ax, metric in zip(axes, ("SNR", "PSNR")):
        part = frame.filter(pl.col("metric") == metric)
        sns.lineplot(x=part["hidden_pct"].to_numpy(), y=part["db"].to_numpy(),
                     hue=part["series"].to_list(), marker="o", ax=ax)
        ax.set_title(f"{metric} vs hidden bits")
        ax.set_xlabel("hidden bits (%)")
        ax.set_ylabel(f"{metric} (dB)")
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    logger.info("wrote quality plot to %s", path)
    return path
