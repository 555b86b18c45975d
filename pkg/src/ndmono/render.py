"""SVG rendering of reconstructions: accepted hexagons shaded by smallest eigenvalue."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .engine import ReconResult
from .phantom import BallShape, Phantom

__all__ = ["render_svg", "eigenvalue_color"]

# light-to-dark sequential ramp
_RAMP = np.array([
    [255, 247, 236],
    [253, 212, 158],
    [252, 141, 89],
    [215, 48, 31],
    [127, 0, 0],
], dtype=float)


def eigenvalue_color(values, vmax: float | None = None) -> list[str]:
    """Hex colors for non-negative values on a sequential ramp."""
    v = np.asarray(values, dtype=float)
    top = vmax if vmax is not None else (v.max() if v.size else 1.0)
    t = np.clip(v / top, 0.0, 1.0) if top > 0 else np.zeros_like(v)
    pos = t * (len(_RAMP) - 1)
    lo = np.floor(pos).astype(int).clip(0, len(_RAMP) - 2)
    frac = (pos - lo)[:, None]
    rgb = (1 - frac) * _RAMP[lo] + frac * _RAMP[lo + 1]
    return ["#%02x%02x%02x" % tuple(int(round(c)) for c in row) for row in rgb]


def _pt(z, scale):
    # y axis points down in SVG
    return f"{z.real * scale:.3f},{-z.imag * scale:.3f}"


def render_svg(result: ReconResult, path=None, phantom: Phantom | None = None, size: int = 600, title: str | None = None) -> str:
    """Draw the unit circle, accepted hexagons and the phantom outline.

    Returns the SVG text and writes it to ``path`` when given.
    """
    scale = size / 2.2
    half = size / 2
    tiling = result.tiling
    acc = result.accepted_cells
    ev = np.maximum(result.eigenvalues[acc], 0.0)
    colors = eigenvalue_color(ev)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="{-half} {-half} {size} {size}">',
        f'<rect x="{-half}" y="{-half}" width="{size}" height="{size}" fill="white"/>',
    ]
    if title:
        out.append(f'<title>{title}</title>')
    out.append('<g stroke="#999" stroke-width="0.3">')
    for i, color in zip(acc, colors):
        pts = " ".join(_pt(z, scale) for z in tiling.vertices(i))
        out.append(f'<polygon points="{pts}" fill="{color}"><title>cell {i}: {result.eigenvalues[i]:.3e}</title></polygon>')
    out.append("</g>")
    out.append(f'<circle cx="0" cy="0" r="{scale:.3f}" fill="none" stroke="black" stroke-width="1"/>')
    if phantom is not None:
        out.append('<g fill="none" stroke="black" stroke-width="1.5">')
        for s in phantom.shapes:
            if isinstance(s, BallShape):
                c = s.center
                out.append(
                    f'<circle cx="{c.real * scale:.3f}" cy="{-c.imag * scale:.3f}" r="{s.radius * scale:.3f}"/>'
                )
            else:
                pts = " ".join(_pt(z, scale) for z in s.vertices)
                out.append(f'<polygon points="{pts}"/>')
        out.append("</g>")
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
