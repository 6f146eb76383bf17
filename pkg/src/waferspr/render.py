"""Deterministic SVG rendering of wafer maps and cluster assignments."""

from __future__ import annotations

from .wafer import CellState, WaferMap

FUNCTIONAL_COLOR = "#2e8b57"
DEFECTIVE_COLOR = "#c62828"

# Fixed sub-cluster palette; cluster k uses PALETTE[(k - 1) % 10].
PALETTE = (
    "#e6194b", "#3c89d0", "#f58231", "#911eb4", "#46a9a9",
    "#d4b106", "#f032e6", "#7f8c1f", "#fabebe", "#008080",
)

CELL_SIZE = 10


def cluster_color(k: int) -> str:
    return PALETTE[(int(k) - 1) % len(PALETTE)]


def render_svg(wmap: WaferMap, assignments=None) -> str:
    """One rect per in-mask cell; outside-mask cells are blank.

    `assignments` maps (row, col) -> cluster id; assigned cells take the
    palette color for their cluster, other defective cells are red,
    functional cells green.  Output bytes depend only on the inputs.
    """
    assignments = assignments or {}
    width = wmap.cols * CELL_SIZE
    height = wmap.rows * CELL_SIZE
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    grid = wmap.grid()
    for r in range(wmap.rows):
        for c in range(wmap.cols):
            state = grid[r, c]
            if state == CellState.OUTSIDE:
                continue
            if (r, c) in assignments:
                fill = cluster_color(assignments[(r, c)])
            elif state == CellState.DEFECTIVE:
                fill = DEFECTIVE_COLOR
            else:
                fill = FUNCTIONAL_COLOR
            lines.append(
                f'<rect x="{c * CELL_SIZE}" y="{r * CELL_SIZE}" '
                f'width="{CELL_SIZE}" height="{CELL_SIZE}" fill="{fill}"/>'
            )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
