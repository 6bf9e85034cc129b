"""
Report Output for spinboson-spectrum

This module provides the helpers that turn computation results into the
files and streams the command-line front end writes: JSON documents with a
schema version, CSV tables with 17 significant digits and optional PNG
figures of alpha sweeps.
"""
import io
import json
import math
from typing import Any, Dict, Optional

import numpy as np
import pandas as pd

from config import JSON_SCHEMA_VERSION

CSV_FLOAT_FORMAT = "%.17g"


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy scalars, DataFrames and non-finite floats into plain JSON values.

    Args:
        value: Any nested result structure

    Returns:
        Structure made of dict, list, str, int, float, bool and None
    """
    if isinstance(value, pd.DataFrame):
        return [to_jsonable(row) for row in value.to_dict(orient="records")]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def render_json(command: str, payload: Dict[str, Any]) -> str:
    """Render a report as a JSON document carrying the schema version."""
    document = {"schema_version": JSON_SCHEMA_VERSION, "command": command}
    document.update(to_jsonable(payload))
    return json.dumps(document, indent=2) + "\n"


def render_csv(table: pd.DataFrame) -> str:
    """Render a table as RFC-4180 CSV; missing values become empty fields."""
    buffer = io.StringIO()
    table.to_csv(buffer, index=False, float_format=CSV_FLOAT_FORMAT, na_rep="",
                 lineterminator="\r\n")
    return buffer.getvalue()


def write_text(text: str, path: Optional[str], stream) -> None:
    """Write to `path` when given, otherwise to `stream`."""
    if path is None:
        stream.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def plot_table(table: pd.DataFrame, x: str, columns, path: str, title: str,
               logx: bool = False) -> None:
    """
    Save a line plot of some table columns against another.

    Args:
        table: Source table
        x: Column on the horizontal axis
        columns: Columns drawn as lines
        path: PNG output path
        title: Figure title
        logx: Logarithmic horizontal axis
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    for column in columns:
        ax.plot(table[x], table[column], marker="o", markersize=3, label=column)
    if logx:
        ax.set_xscale("log")
    ax.set_xlabel(x)
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
