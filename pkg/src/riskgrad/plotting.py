"""Learning-curve and gradient-norm charts with a CSV of the plotted data."""
from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

METRIC_ALIASES = {
    "return": "mean_return",
    "disc_return": "mean_disc_return",
    "gradnorm": "grad_norm",
    "saturations": "saturations",
}
Y_LABELS = {
    "mean_return": "Average return",
    "mean_disc_return": "Average discounted return",
    "grad_norm": "Gradient norm",
    "saturations": "Clamped exponents",
}
COLORS = ["#0072B2", "#E69F00", "#009E73", "#CC79A7", "#56B4E9", "#D55E00",
          "#F0E442", "#000000"]

RC = {
    "svg.hashsalt": "riskgrad",
    "svg.fonttype": "path",
    "font.size": 10,
    "axes.grid": True,
    "grid.linewidth": 0.25,
    "grid.alpha": 0.5,
    "lines.linewidth": 1.2,
    "legend.framealpha": 0.7,
}


def resolve_metric(metric) -> str:
    if not metric:
        raise ValueError("metric name must be non-empty")
    if metric in METRIC_ALIASES:
        return METRIC_ALIASES[metric]
    if metric in Y_LABELS:
        return metric
    raise ValueError(f"unknown metric {metric!r}; choose from {sorted(METRIC_ALIASES)}")


def chart_limits(tables, metric):
    """Y-range covering mean +/- std of every series, with 5% padding."""
    col = resolve_metric(metric)
    lo = min(float((t.mean[col] - t.std[col]).min()) for t in tables)
    hi = max(float((t.mean[col] + t.std[col]).max()) for t in tables)
    pad = 0.05 * (hi - lo) if hi > lo else max(abs(hi), 1.0) * 0.05
    return lo - pad, hi + pad


def write_series_csv(tables, metric, path):
    col = resolve_metric(metric)
    n = max(t.iterations for t in tables)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iter", *(f"{t.label}_{s}" for t in tables for s in ("mean", "std"))])
        for i in range(n):
            row = [i]
            for t in tables:
                if i < t.iterations:
                    row += [repr(float(t.mean[col][i])), repr(float(t.std[col][i]))]
                else:
                    row += ["", ""]
            w.writerow(row)


def emit_chart(tables, metric, path, title=None) -> Path:
    """Render mean lines with +/-1 std bands; writes ``path`` and ``path.csv``.

    ``tables`` is one :class:`~riskgrad.harness.AggregateTable` or a list of
    them (one line each). The format follows the suffix (``.svg`` default).
    No timestamps are embedded, so identical inputs give identical bytes.
    """
    if not isinstance(tables, (list, tuple)):
        tables = [tables]
    col = resolve_metric(metric)
    path = Path(path)
    if not path.suffix:
        path = path.with_suffix(".svg")
    path.parent.mkdir(parents=True, exist_ok=True)
    write_series_csv(tables, col, path.with_suffix(".csv"))

    with plt.rc_context(RC):
        fig, ax = plt.subplots(figsize=(6.4, 4.0))
        for k, t in enumerate(tables):
            x = range(t.iterations)
            m, s = t.mean[col], t.std[col]
            c = COLORS[k % len(COLORS)]
            ax.plot(x, m, color=c, label=f"{t.label} (n={t.n_runs})")
            ax.fill_between(x, m - s, m + s, color=c, alpha=0.2, linewidth=0)
        ax.set_ylim(*chart_limits(tables, col))
        ax.set_xlim(0, max(max(t.iterations for t in tables) - 1, 1))
        ax.set_xlabel("Iteration")
        ax.set_ylabel(Y_LABELS[col])
        if title:
            ax.set_title(title)
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
        plt.close(fig)
    return path
