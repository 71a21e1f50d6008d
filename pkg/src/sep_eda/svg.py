"""Standalone SVG scatter plots (no plotting dependency)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

_WIDTH = 960
_HEIGHT = 720
_MARGIN_FRAC = 0.05

# categorical palette, cycled past 20 labels
_PALETTE = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
    "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5",
    "#c49c94", "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
]


def _axis_fit(values: np.ndarray, lo_px: float, hi_px: float, flip: bool):
    vmin, vmax = float(values.min()), float(values.max())
    if vmax == vmin:
        mid = 0.5 * (lo_px + hi_px)
        return lambda v: np.full_like(np.asarray(v, dtype=np.float64), mid)
    scale = (hi_px - lo_px) / (vmax - vmin)
    if flip:
        return lambda v: hi_px - (np.asarray(v, dtype=np.float64) - vmin) * scale
    return lambda v: lo_px + (np.asarray(v, dtype=np.float64) - vmin) * scale


def render_scatter_svg(
    coords: np.ndarray,
    labels: np.ndarray | None = None,
    sizes: np.ndarray | None = None,
    path: str | Path = "scatter.svg",
    title: str | None = None,
) -> None:
    """Write a 960x720 SVG with one circle per row of `coords`.

    Coordinates are affinely fit into the viewbox with a 5% margin; colors
    cycle a 20-color categorical palette over `labels`; `sizes` (arbitrary
    positive weights) scale the circle radii; a legend appears when labels
    are given.
    """
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 2:
        raise ValueError(f"coords must be (n, 2), got {coords.shape}")
    if not np.isfinite(coords).all():
        raise ValueError("coords must be finite")
    n = coords.shape[0]

    mx = _WIDTH * _MARGIN_FRAC
    my = _HEIGHT * _MARGIN_FRAC
    fx = _axis_fit(coords[:, 0], mx, _WIDTH - mx, flip=False)
    fy = _axis_fit(coords[:, 1], my, _HEIGHT - my, flip=True)
    px = fx(coords[:, 0])
    py = fy(coords[:, 1])

    if sizes is not None:
        sizes = np.asarray(sizes, dtype=np.float64)
        smax = sizes.max() if sizes.size and sizes.max() > 0 else 1.0
        radii = 2.0 + 10.0 * np.sqrt(np.maximum(sizes, 0.0) / smax)
    else:
        radii = np.full(n, 3.0)

    if labels is not None:
        labels = np.asarray(labels)
        colors = [_PALETTE[int(l) % len(_PALETTE)] for l in labels]
    else:
        colors = ["#1f77b4"] * n

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'  <rect width="{_WIDTH}" height="{_HEIGHT}" fill="#ffffff"/>',
    ]
    if title:
        safe = title.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        parts.append(
            f'  <text x="{_WIDTH / 2:.0f}" y="24" text-anchor="middle" '
            f'font-size="16" fill="#333">{safe}</text>'
        )
    for i in range(n):
        parts.append(
            f'  <circle cx="{px[i]:.2f}" cy="{py[i]:.2f}" r="{radii[i]:.2f}" '
            f'fill="{colors[i]}" fill-opacity="0.65"/>'
        )
    if labels is not None:
        distinct = np.unique(labels)
        lx = _WIDTH - mx - 110
        for row, lab in enumerate(distinct):
            ly = my + 10 + row * 18
            color = _PALETTE[int(lab) % len(_PALETTE)]
            parts.append(
                f'  <rect x="{lx:.0f}" y="{ly:.0f}" width="12" height="12" fill="{color}"/>'
            )
            parts.append(
                f'  <text x="{lx + 16:.0f}" y="{ly + 10:.0f}" font-size="12" '
                f'fill="#333">{int(lab)}</text>'
            )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
