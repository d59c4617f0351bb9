"""Minimal SVG line plot of a 1D grid function."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .lattice import GridFunction, Region

W, H, PAD = 640, 360, 40


def plot_1d(u: GridFunction, omega: Region | None = None, x0: float | None = None,
            radii: dict[str, float] | None = None, title: str = "") -> str:
    x = u.lattice.coords[:, 0]
    y = u.values
    xlo, xhi = float(x.min()), float(x.max())
    ylo, yhi = float(min(y.min(), 0.0)), float(max(y.max(), 0.0))
    if yhi - ylo < 1e-12:
        yhi = ylo + 1.0

    def sx(v):
        return PAD + (v - xlo) / (xhi - xlo) * (W - 2 * PAD)

    def sy(v):
        return H - PAD - (v - ylo) / (yhi - ylo) * (H - 2 * PAD)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>']
    if omega is not None and omega.nodes.size:
        xo = x[omega.nodes]
        out.append(f'<rect x="{sx(xo.min()):.3f}" y="{PAD}" width="{sx(xo.max()) - sx(xo.min()):.3f}" '
                   f'height="{H - 2 * PAD}" fill="#eef3fb"/>')
    if x0 is not None:
        for name, r in sorted((radii or {}).items()):
            for edge in (x0 - r, x0 + r):
                if xlo <= edge <= xhi:
                    out.append(f'<line x1="{sx(edge):.3f}" y1="{PAD}" x2="{sx(edge):.3f}" y2="{H - PAD}" '
                               f'stroke="#999" stroke-dasharray="4 3"/>')
            out.append(f'<text x="{sx(x0 + r) + 2:.3f}" y="{PAD + 12}" font-size="10">{name}</text>')
    out.append(f'<line x1="{PAD}" y1="{sy(0.0):.3f}" x2="{W - PAD}" y2="{sy(0.0):.3f}" stroke="#ccc"/>')
    pts = " ".join(f"{sx(a):.3f},{sy(b):.3f}" for a, b in zip(x, y))
    out.append(f'<polyline fill="none" stroke="#1f4e9c" stroke-width="1.5" points="{pts}"/>')
    out.append(f'<text x="{PAD}" y="{PAD - 12}" font-size="12">{title}</text>')
    out.append(f'<text x="{PAD}" y="{H - 12}" font-size="10">x in [{xlo:g}, {xhi:g}], '
               f'u in [{float(np.min(y)):.4g}, {float(np.max(y)):.4g}]</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_plot(path: str | Path, *args, **kwargs) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(plot_1d(*args, **kwargs))
    return path
