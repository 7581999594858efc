"""Render training and evaluation reports: CSV, plain text, and PNG figures.

Figures are drawn straight onto Agg canvases (no pyplot state) and written
with the Software metadata stripped, so rerunning a pipeline yields
byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

_PNG_META = {"metadata": {"Software": None}}


def write_depth_curve(curve: list[tuple[int, float]], best_depth: int,
                      csv_path: str | Path, png_path: str | Path) -> None:
    """Held-out accuracy per candidate depth, as CSV and a line plot."""
    lines = ["depth,accuracy"]
    lines.extend(f"{d},{a!r}" for d, a in curve)
    Path(csv_path).write_text("\n".join(lines) + "\n", encoding="ascii")

    depths = [d for d, _ in curve]
    accs = [a for _, a in curve]
    fig = Figure(figsize=(6.0, 4.0), dpi=100)
    ax = fig.add_subplot(111)
    ax.plot(depths, accs, marker="o", color="tab:blue")
    best_acc = dict(curve)[best_depth]
    ax.plot([best_depth], [best_acc], marker="*", markersize=14,
            color="tab:red", linestyle="none")
    ax.annotate(f"depth {best_depth}: {best_acc:.3f}",
                xy=(best_depth, best_acc), xytext=(5, 5),
                textcoords="offset points", fontsize=9)
    ax.set_xlabel("max depth")
    ax.set_ylabel("held-out accuracy")
    ax.set_title("Decision-tree depth tuning")
    ax.set_ylim(0.0, 1.05)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(png_path, format="png", **_PNG_META)


def write_confusion(confusion: np.ndarray, class_names: list[str], accuracy: float,
                    csv_path: str | Path, txt_path: str | Path,
                    png_path: str | Path) -> None:
    """Confusion matrix (rows true, columns predicted) in three renderings."""
    confusion = np.asarray(confusion, dtype=np.int64)
    c = confusion.shape[0]
    if len(class_names) != c:
        raise ValueError(f"{len(class_names)} names for a {c}x{c} matrix")

    lines = ["class," + ",".join(class_names)]
    lines.extend(f"{class_names[i]}," + ",".join(str(int(v)) for v in confusion[i])
                 for i in range(c))
    Path(csv_path).write_text("\n".join(lines) + "\n", encoding="ascii")

    name_w = max(len("true\\pred"), max(len(n) for n in class_names))
    col_w = max(max(len(n) for n in class_names),
                len(str(int(confusion.max(initial=0)))), 3)
    rows = [f"accuracy: {accuracy:.4f} "
            f"({int(np.trace(confusion))}/{int(confusion.sum())})",
            "",
            "true\\pred".ljust(name_w) + " "
            + " ".join(n.rjust(col_w) for n in class_names)]
    rows.extend(class_names[i].ljust(name_w) + " "
                + " ".join(str(int(v)).rjust(col_w) for v in confusion[i])
                for i in range(c))
    Path(txt_path).write_text("\n".join(rows) + "\n", encoding="ascii")

    fig = Figure(figsize=(max(5.0, 0.5 * c + 2.0), max(4.0, 0.5 * c + 1.5)), dpi=100)
    ax = fig.add_subplot(111)
    im = ax.imshow(confusion, cmap="Blues")
    ax.set_xticks(range(c), class_names, rotation=45, ha="right")
    ax.set_yticks(range(c), class_names)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    ax.set_title(f"Confusion matrix (accuracy {accuracy:.3f})")
    threshold = confusion.max(initial=0) / 2.0
    for i in range(c):
        for j in range(c):
            ax.text(j, i, str(int(confusion[i, j])), ha="center", va="center",
                    fontsize=8,
                    color="white" if confusion[i, j] > threshold else "black")
    fig.colorbar(im, ax=ax, shrink=0.8)
    fig.tight_layout()
    fig.savefig(png_path, format="png", **_PNG_META)
