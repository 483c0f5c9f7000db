#  Copyright 2026 The phasesis authors
#
#  Licensed under the Apache License, Version 2.0 (the "License");
#  you may not use this file except in compliance with the License.
#  You may obtain a copy of the License at
#
#  http://www.apache.org/licenses/LICENSE-2.0
#
#  Unless required by applicable law or agreed to in writing, software
#  distributed under the License is distributed on an "AS IS" BASIS,
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#  See the License for the specific language governing permissions and
#  limitations under the License.
"""SVG heatmaps of sweep tables."""

import os
import re

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from phasesis.errors import RenderError  # noqa: E402
from phasesis.sweep import read_table  # noqa: E402

REQUIRED_COLUMNS = ("panel_trans", "panel_rec", "mu_t", "mu_r_norm", "bound_rate")


def _edges(centers):
    """Cell boundaries around sorted centers."""
    if centers.size == 1:
        half = max(abs(centers[0]) * 0.05, 0.025)
        return np.array([centers[0] - half, centers[0] + half])
    mids = (centers[1:] + centers[:-1]) / 2
    return np.concatenate(([centers[0] - (mids[0] - centers[0])], mids, [centers[-1] + (centers[-1] - mids[-1])]))


def panel_file_name(trans, rec):
    """:class:`str`: The SVG file name of a panel."""
    return re.sub(r"[^A-Za-z0-9_.-]", "-", f"{trans}__{rec}") + ".svg"


def panel_grid(rows, trans, rec):
    """The grid of one panel.

    Returns
    -------
    :class:`tuple`
        Sorted transmission means, sorted recovery axis values and the ``len(y) × len(x)`` matrix of certified decay
        rates, ``nan`` where a cell failed.

    Raises
    ------
    RenderError
        The panel has no rows.
    """
    selected = [r for r in rows if r["panel_trans"] == trans and r["panel_rec"] == rec]
    if not selected:
        raise RenderError(f"Panel {trans} / {rec} is empty")
    xs = np.array(sorted({float(r["mu_t"]) for r in selected}))
    ys = np.array(sorted({float(r["mu_r_norm"]) for r in selected}))
    values = np.full((ys.size, xs.size), np.nan)
    for r in selected:
        if r["bound_rate"] not in ("", None):
            values[np.searchsorted(ys, float(r["mu_r_norm"])), np.searchsorted(xs, float(r["mu_t"]))] = \
                float(r["bound_rate"])
    return xs, ys, values


def render_panel(rows, trans, rec, path):
    """Writes the heatmap of one panel with its zero contour, the stability boundary of the bound."""
    xs, ys, values = panel_grid(rows, trans, rec)
    axis = rows[0].get("recovery_axis", "normalized") if rows else "normalized"
    fig = Figure(figsize=(5, 4))
    ax = fig.add_subplot()
    mesh = ax.pcolormesh(_edges(xs), _edges(ys), np.ma.masked_invalid(values), cmap="RdBu", shading="flat")
    fig.colorbar(mesh, ax=ax, label="certified decay rate −η")
    finite = values[np.isfinite(values)]
    if xs.size >= 2 and ys.size >= 2 and finite.size and finite.min() < 0 < finite.max():
        ax.contour(xs, ys, values, levels=[0.0], colors="black", linewidths=1.5)
    ax.set_xlabel("μ (transmission mean)")
    ax.set_ylabel("μ / λmax(A) (recovery)" if axis == "normalized" else "μ (recovery mean)")
    ax.set_title(f"{trans} / {rec}")
    fig.tight_layout()
    with matplotlib.rc_context({"svg.hashsalt": "phasesis", "svg.fonttype": "path"}):
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path


def render_heatmap(csv_path, panel=None, output_dir="."):
    """Renders sweep panels to SVG files.

    Parameters
    ----------
    csv_path: :class:`str`
        A sweep CSV or SQLite database, see :func:`phasesis.sweep.read_table`.
    panel: :class:`tuple`, optional
        ``(transmission entry, recovery entry)`` of the panel to render. Every panel is rendered when omitted.
    output_dir: :class:`str`
        Directory where the files are written.

    Returns
    -------
    :class:`list` of :class:`str`
        The written paths.

    Raises
    ------
    RenderError
        Required columns are missing or the selected panel is empty.
    """
    rows = read_table(csv_path)
    if not rows:
        raise RenderError("The table has no rows")
    missing = [c for c in REQUIRED_COLUMNS if c not in rows[0]]
    if missing:
        raise RenderError(f"Missing columns: {', '.join(missing)}")
    if panel is None:
        panels = list(dict.fromkeys((r["panel_trans"], r["panel_rec"]) for r in rows))
    else:
        panels = [tuple(panel)]
    os.makedirs(output_dir, exist_ok=True)
    return [render_panel(rows, trans, rec, os.path.join(output_dir, panel_file_name(trans, rec)))
            for trans, rec in panels]
