"""Dependency-free SVG heatmaps with a fixed layout.

Output is a pure function of the inputs: numbers are printed with fixed
precision and no timestamps or random ids are emitted.
"""
from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

# entity hues, red then blue first
_PALETTE = ((214, 39, 40), (31, 119, 180), (44, 160, 44), (148, 103, 189), (255, 127, 14), (140, 86, 75))


def _rgb(r: float, g: float, b: float) -> str:
    return f"#{int(round(r)):02x}{int(round(g)):02x}{int(round(b)):02x}"


def diverging(v: float) -> str:
    """Blue (-1) through white (0) to red (+1)."""
    v = max(-1.0, min(1.0, float(v)))
    if v >= 0:
        return _rgb(255, 255 * (1 - v), 255 * (1 - v))
    return _rgb(255 * (1 + v), 255 * (1 + v), 255)


def _tint(color: tuple[int, int, int], v: float) -> str:
    v = max(0.0, min(1.0, float(v)))
    return _rgb(*(255 + (c - 255) * v for c in color))


def correlation_heatmap(matrix, labels: Sequence[str], title: str = "", cell: int = 56) -> str:
    matrix = np.asarray(matrix, dtype=np.float64)
    k = len(labels)
    margin = 80
    size = margin + k * cell + 10
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 24}" '
        f'viewBox="0 0 {size} {size + 24}" font-family="sans-serif">',
        f'<text x="{size // 2}" y="16" font-size="13" text-anchor="middle">{escape(title)}</text>',
    ]
    top = 24 + margin
    for i, name in enumerate(labels):
        cx = margin + i * cell + cell // 2
        cy = top + i * cell + cell // 2
        parts.append(f'<text x="{cx}" y="{top - 8}" font-size="11" text-anchor="middle">{escape(name)}</text>')
        parts.append(f'<text x="{margin - 6}" y="{cy + 4}" font-size="11" text-anchor="end">{escape(name)}</text>')
    for i in range(k):
        for j in range(k):
            v = matrix[i, j]
            x = margin + j * cell
            y = top + i * cell
            parts.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{diverging(v)}" stroke="#ffffff"/>')
            parts.append(
                f'<text x="{x + cell // 2}" y="{y + cell // 2 + 4}" font-size="11" text-anchor="middle">{v:.2f}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def attention_maps(stack, entities: Sequence[int], title: str = "", cell: int = 12) -> str:
    """One panel per entity plus an overlay panel coloring each cell by its strongest entity."""
    stack = np.asarray(stack, dtype=np.float64)
    h, w, _ = stack.shape
    ents = list(entities)
    panel_w = w * cell
    gap = 16
    n_panels = len(ents) + 1
    width = n_panels * panel_w + (n_panels + 1) * gap
    height = h * cell + 48
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">',
        f'<text x="{gap}" y="16" font-size="13">{escape(title)}</text>',
    ]
    peak = max(float(stack[..., ents].max()), 1e-300)
    for p, e in enumerate(ents + [None]):
        x0 = gap + p * (panel_w + gap)
        label = f"token {e}" if e is not None else "overlay"
        parts.append(f'<text x="{x0}" y="36" font-size="11">{label}</text>')
        for i in range(h):
            for j in range(w):
                if e is None:
                    vals = stack[i, j, ents]
                    k = int(np.argmax(vals))
                    fill = _tint(_PALETTE[k % len(_PALETTE)], vals[k] / peak)
                else:
                    fill = _tint(_PALETTE[p % len(_PALETTE)], stack[i, j, e] / peak)
                parts.append(
                    f'<rect x="{x0 + j * cell}" y="{42 + i * cell}" width="{cell}" height="{cell}" fill="{fill}"/>'
                )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
