"""Sweep result persistence and report rendering.

Two distinct surfaces:

* the sweep result file, a machine-readable CSV with full 6-decimal
  precision (`sweep_rows_to_csv` / `parse_sweep_csv`);
* display reports via `format_report`, which rounds to 2 decimals
  (3 for p-values below 0.01), prints "N/A (Shannon entropy)" on the
  baseline row, and marks rows that beat the baseline significantly
  with `*` in CSV or bold in markdown.

`render_sweep_figure` and `render_trace_figure` draw the matching
matplotlib figures next to the delimited output.
"""

from __future__ import annotations

import csv
import io

from .experiment import SweepRow

SWEEP_HEADER = [
    "alpha",
    "fold1",
    "fold2",
    "fold3",
    "fold4",
    "fold5",
    "average",
    "sd",
    "p_value",
    "highlight",
]

BASELINE_LABEL = "N/A (Shannon entropy)"


def _fold_columns(rows: list[SweepRow]) -> list[str]:
    k = len(rows[0].fold_accuracies)
    return [f"fold{i + 1}" for i in range(k)]


def sweep_rows_to_csv(rows: list[SweepRow]) -> str:
    """Full-precision result CSV; empty p_value on the baseline row."""
    out = io.StringIO()
    writer = csv.writer(out)
    writer.writerow(["alpha", *_fold_columns(rows), "average", "sd", "p_value", "highlight"])
    for row in rows:
        writer.writerow(
            [
                f"{row.alpha:.6f}",
                *[f"{a:.6f}" for a in row.fold_accuracies],
                f"{row.average:.6f}",
                f"{row.sd:.6f}",
                "" if row.p_value is None else f"{row.p_value:.6f}",
                int(row.better_and_significant),
            ]
        )
    return out.getvalue()


def parse_sweep_csv(text: str) -> list[SweepRow]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty sweep file") from None
    if len(header) < 6 or header[0] != "alpha" or header[-2:] != ["p_value", "highlight"]:
        raise ValueError(f"unexpected sweep columns: {header}")
    n_folds = len(header) - 5
    rows = []
    for line in reader:
        if len(line) != len(header):
            raise ValueError(f"malformed sweep row: {line}")
        alpha = float(line[0])
        folds = [float(v) for v in line[1 : 1 + n_folds]]
        avg = float(line[1 + n_folds])
        sd = float(line[2 + n_folds])
        p = None if line[3 + n_folds] == "" else float(line[3 + n_folds])
        rows.append(SweepRow(alpha, folds, avg, sd, p, bool(int(line[4 + n_folds]))))
    if not rows:
        raise ValueError("sweep file contains no rows")
    return rows


def _display_p(row: SweepRow) -> str:
    if row.p_value is None:
        return BASELINE_LABEL
    return f"{row.p_value:.3f}" if row.p_value < 0.01 else f"{row.p_value:.2f}"


def format_report(rows: list[SweepRow], format: str = "markdown") -> str:
    """Render the sweep as a display table, csv or markdown."""
    if not rows:
        raise ValueError("no rows to report")
    if format not in ("csv", "markdown"):
        raise ValueError(f"unknown report format {format!r}")
    fold_cols = _fold_columns(rows)

    if format == "csv":
        out = io.StringIO()
        writer = csv.writer(out)
        writer.writerow(["alpha", *fold_cols, "average", "sd", "p_value", "highlight"])
        for row in rows:
            writer.writerow(
                [
                    f"{row.alpha:.2f}",
                    *[f"{a:.2f}" for a in row.fold_accuracies],
                    f"{row.average:.2f}",
                    f"{row.sd:.2f}",
                    _display_p(row),
                    "*" if row.better_and_significant else "",
                ]
            )
        return out.getvalue()

    lines = [
        "| alpha | " + " | ".join(str(i + 1) for i in range(len(fold_cols)))
        + " | Average | SD | p-value |",
        "|" + "---|" * (len(fold_cols) + 4),
    ]
    for row in rows:
        cells = [
            f"{row.alpha:.2f}",
            *[f"{a:.2f}" for a in row.fold_accuracies],
            f"{row.average:.2f}",
            f"{row.sd:.2f}",
            _display_p(row),
        ]
        if row.better_and_significant:
            cells = [f"**{c}**" for c in cells]
        lines.append("| " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def render_sweep_figure(rows: list[SweepRow], path):
    """Accuracy vs alpha with SD error bars; flagged alphas as filled stars,
    the Shannon baseline as a dashed reference line."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    alphas = [r.alpha for r in rows]
    avgs = [r.average for r in rows]
    sds = [r.sd for r in rows]
    baseline = next((r for r in rows if r.is_baseline), None)

    fig, ax = plt.subplots(figsize=(7, 4))
    ax.errorbar(alphas, avgs, yerr=sds, fmt="o-", capsize=3, color="tab:blue",
                label="five-fold mean accuracy")
    flagged = [r for r in rows if r.better_and_significant]
    if flagged:
        ax.plot(
            [r.alpha for r in flagged],
            [r.average for r in flagged],
            "*",
            markersize=14,
            color="tab:orange",
            label="better and p < 0.05",
        )
    if baseline is not None:
        ax.axhline(baseline.average, linestyle="--", color="tab:gray",
                   label=f"Shannon baseline ({baseline.average:.2f})")
    ax.set_xlabel("alpha")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.0)
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def render_trace_figure(trace, path):
    """Per-epoch reconstruction, prediction, and total loss curves."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    epochs = [row.epoch for row in trace]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(epochs, [row.rec_loss for row in trace], label="reconstruction")
    ax.plot(epochs, [row.pred_loss for row in trace], label="prediction")
    ax.plot(epochs, [row.total_loss for row in trace], label="total")
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_yscale("log")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
