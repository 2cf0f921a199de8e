"""SVG figures for packings: filled primal circles, dashed dual circles."""

from __future__ import annotations

import numpy as np

from .packing import DoublePacking

__all__ = ["packing_to_svg", "save_svg"]


def _fmt(x: float) -> str:
    return f"{x:.6f}"


def packing_to_svg(pk: DoublePacking, size: int = 720) -> str:
    """Render the packing as an SVG string (deterministic, no timestamps).

    Vertex circles are drawn solid and filled, face circles dashed and
    unfilled; the y-axis is flipped so the mathematical orientation matches
    the picture.
    """
    bf = pk.trunc.bounded_faces
    xs = np.concatenate([pk.vertex_center.real, pk.face_center[bf].real])
    ys = np.concatenate([pk.vertex_center.imag, pk.face_center[bf].imag])
    rs = np.concatenate([pk.vertex_radius, pk.face_radius[bf]])
    lo = float(np.min(np.minimum(xs - rs, -ys - rs)))
    hi = float(np.max(np.maximum(xs + rs, -ys + rs)))
    pad = 0.03 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    span = hi - lo
    stroke = span / 900.0

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="{_fmt(lo)} {_fmt(lo)} {_fmt(span)} {_fmt(span)}">',
        f'<g fill="#c9ddf0" stroke="#27415e" stroke-width="{_fmt(stroke)}">',
    ]
    for v in range(pk.trunc.n_vertices):
        z = pk.vertex_center[v]
        lines.append(f'<circle cx="{_fmt(z.real)}" cy="{_fmt(-z.imag)}" '
                     f'r="{_fmt(pk.vertex_radius[v])}"/>')
    lines.append("</g>")
    dash = f"{_fmt(4 * stroke)} {_fmt(3 * stroke)}"
    lines.append(f'<g fill="none" stroke="#a03c32" '
                 f'stroke-width="{_fmt(stroke)}" stroke-dasharray="{dash}">')
    for f in bf:
        z = pk.face_center[f]
        lines.append(f'<circle cx="{_fmt(z.real)}" cy="{_fmt(-z.imag)}" '
                     f'r="{_fmt(pk.face_radius[f])}"/>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def save_svg(pk: DoublePacking, path, size: int = 720) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(packing_to_svg(pk, size=size))
