"""Dependency-free SVG line chart of success fraction against horizon."""
from __future__ import annotations

import re
from html import escape

from .runner import read_csv, success_table

COLORS = {
    "gc_exact": "#1b9e77", "gc_neural": "#d95f02", "fqi": "#7570b3",
    "ppo": "#e7298a", "tree_search": "#66a61e",
}
FALLBACK_COLORS = ("#e6ab02", "#a6761d", "#666666")

W, H_PX = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 60, 150, 30, 50


def fractions(results) -> dict:
    return {m: {h: s / n for h, (s, n) in sorted(rows.items())}
            for m, rows in sorted(success_table(results).items())}


def render_svg(data: dict, title: str = "Fraction of successes") -> str:
    """``data`` maps method -> {horizon: fraction}. Methods without points are skipped."""
    data = {m: pts for m, pts in data.items() if pts}
    xs = sorted({h for pts in data.values() for h in pts}) or [0, 1]
    x0, x1 = min(xs), max(xs)
    if x0 == x1:
        x0, x1 = x0 - 1, x1 + 1
    pw, ph = W - LEFT - RIGHT, H_PX - TOP - BOTTOM

    def sx(h):
        return LEFT + (h - x0) / (x1 - x0) * pw

    def sy(f):
        return TOP + (1.0 - f) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H_PX}" '
           f'viewBox="0 0 {W} {H_PX}" font-family="sans-serif" font-size="12">',
           f'<text x="{LEFT}" y="18">{escape(title)}</text>',
           f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for k in range(6):
        f = k / 5
        out.append(f'<line x1="{LEFT - 4}" y1="{sy(f):.2f}" x2="{LEFT}" y2="{sy(f):.2f}" stroke="#444"/>')
        out.append(f'<text x="{LEFT - 8}" y="{sy(f) + 4:.2f}" text-anchor="end">{f:.1f}</text>')
    for h in xs:
        out.append(f'<text x="{sx(h):.2f}" y="{TOP + ph + 18}" text-anchor="middle">{h}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{H_PX - 10}" text-anchor="middle">horizon</text>')

    spare = iter(FALLBACK_COLORS * 10)
    for i, (method, pts) in enumerate(data.items()):
        color = COLORS.get(method) or next(spare)
        m = escape(method, quote=True)
        path = " ".join(f"{sx(h):.2f},{sy(f):.2f}" for h, f in pts.items())
        out.append(f'<g class="series" data-method="{m}">')
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{path}"/>')
        for h, f in pts.items():
            out.append(f'<circle cx="{sx(h):.2f}" cy="{sy(f):.2f}" r="3" fill="{color}" '
                       f'data-method="{m}" data-horizon="{h}" data-fraction="{f!r}"/>')
        out.append("</g>")
        ly = TOP + 16 * i + 8
        out.append(f'<line x1="{LEFT + pw + 12}" y1="{ly}" x2="{LEFT + pw + 32}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text class="legend" x="{LEFT + pw + 38}" y="{ly + 4}">{m}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


_POINT = re.compile(r'<circle [^>]*data-method="([^"]*)" data-horizon="(\d+)" data-fraction="([^"]*)"')


def parse_svg_points(svg: str) -> dict:
    """Inverse of the point markup written by ``render_svg``."""
    data: dict = {}
    for m, h, f in _POINT.findall(svg):
        data.setdefault(m, {})[int(h)] = float(f)
    return data


def plot(csv_path, out_path) -> dict:
    data = fractions(read_csv(csv_path))
    with open(out_path, "w") as fh:
        fh.write(render_svg(data))
    return data
