"""PNG rendering of run tables for the report."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _column(cols, rows, name):
    j = list(cols).index(name)
    return np.array([float(r[j]) if not isinstance(r[j], str) or r[j] not in ("nan", "") else np.nan for r in rows])


def render(table, spec: dict, path: Path) -> Path | None:
    """Line plot of ``spec['y']`` columns against ``spec['x']``; None if the table lacks them."""
    if table is None or not spec:
        return None
    cols, rows = table
    if spec["x"] not in cols or not all(y in cols for y in spec["y"]):
        return None
    x = _column(cols, rows, spec["x"])
    fig, ax = plt.subplots(figsize=(5, 3.5), dpi=100)
    for y in spec["y"]:
        v = _column(cols, rows, y)
        if spec.get("logy"):
            v = np.abs(v)
        ax.plot(x, v, marker="o" if len(x) < 40 else None, label=y)
    if spec.get("logx"):
        ax.set_xscale("log")
    if spec.get("logy"):
        ax.set_yscale("log")
    ax.set_xlabel(spec.get("xlabel", spec["x"]))
    ax.set_ylabel(spec.get("ylabel", ", ".join(spec["y"])))
    ax.set_title(spec.get("title", ""))
    if len(spec["y"]) > 1:
        ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path
