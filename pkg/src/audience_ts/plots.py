"""Minimal hand-rolled SVG box plots (no plotting dependency)."""

from __future__ import annotations

from collections.abc import Sequence
from xml.sax.saxutils import escape

from .simlab import quantiles

W, H = 480, 320
LEFT, RIGHT, TOP, BOTTOM = 64, 16, 36, 48


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def box_plot_svg(
    groups: Sequence[tuple[str, Sequence[float]]],
    title: str,
    ylabel: str = "",
    bars: bool = False,
) -> str:
    """Box plot per group (or a single bar per group when ``bars``)."""
    stats = [(label, quantiles(vals)) for label, vals in groups if len(vals)]
    if not stats:
        return ""
    lo = 0.0 if bars else min(s["min"] for _, s in stats)
    hi = max(s["max"] for _, s in stats)
    if hi == lo:
        hi = lo + 1.0
    plot_w, plot_h = W - LEFT - RIGHT, H - TOP - BOTTOM

    def y(v: float) -> float:
        return TOP + plot_h * (1 - (v - lo) / (hi - lo))

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP + plot_h}" x2="{W - RIGHT}" y2="{TOP + plot_h}" stroke="black"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        v = lo + frac * (hi - lo)
        out.append(f'<text x="{LEFT - 4}" y="{y(v) + 4:.1f}" text-anchor="end">{_fmt(v)}</text>')
    if ylabel:
        out.append(
            f'<text x="14" y="{TOP + plot_h / 2}" transform="rotate(-90 14 {TOP + plot_h / 2})" '
            f'text-anchor="middle">{escape(ylabel)}</text>'
        )
    slot = plot_w / len(stats)
    half = min(slot * 0.3, 24)
    for i, (label, s) in enumerate(stats):
        cx = LEFT + slot * (i + 0.5)
        out.append(f'<text x="{cx:.1f}" y="{TOP + plot_h + 16}" text-anchor="middle">{escape(label)}</text>')
        if bars:
            out.append(
                f'<rect x="{cx - half:.1f}" y="{y(s["mean"]):.1f}" width="{2 * half:.1f}" '
                f'height="{y(lo) - y(s["mean"]):.1f}" fill="#9ab"/>'
            )
            out.append(f'<text x="{cx:.1f}" y="{y(s["mean"]) - 4:.1f}" text-anchor="middle">{_fmt(s["mean"])}</text>')
            continue
        out.append(f'<line x1="{cx:.1f}" y1="{y(s["min"]):.1f}" x2="{cx:.1f}" y2="{y(s["q1"]):.1f}" stroke="black"/>')
        out.append(f'<line x1="{cx:.1f}" y1="{y(s["q3"]):.1f}" x2="{cx:.1f}" y2="{y(s["max"]):.1f}" stroke="black"/>')
        out.append(
            f'<rect x="{cx - half:.1f}" y="{y(s["q3"]):.1f}" width="{2 * half:.1f}" '
            f'height="{max(y(s["q1"]) - y(s["q3"]), 0.5):.1f}" fill="#cde" stroke="black"/>'
        )
        out.append(
            f'<line x1="{cx - half:.1f}" y1="{y(s["median"]):.1f}" x2="{cx + half:.1f}" '
            f'y2="{y(s["median"]):.1f}" stroke="black" stroke-width="2"/>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
