"""Deterministic CSV and SVG writers for experiment outputs.

Numbers render with 17 significant digits in CSV (value-preserving for
doubles) and 6 in SVG coordinates; neither format embeds timestamps or
environment details, so identical data yields identical bytes.
"""

from __future__ import annotations

import io
from pathlib import Path

__all__ = ["format_value", "write_csv", "polyline_svg"]


def format_value(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def write_csv(path, header: list[str], rows) -> None:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(format_value(v) for v in row) + "\n")
    Path(path).write_text(buf.getvalue())


_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2")


def polyline_svg(
    series: list[tuple[list, list, str]],
    title: str = "",
    width: int = 640,
    height: int = 480,
) -> str:
    """Render labeled (xs, ys, label) series as SVG polylines on shared axes.

    The view box is fixed by the canvas size; data coordinates are mapped
    into a margined plot area spanning the joint data range.  Purely
    arithmetic: equal input always produces equal output text.
    """
    if not series:
        raise ValueError("nothing to plot")
    margin = 50.0
    xs_all = [x for xs, _, _ in series for x in xs]
    ys_all = [y for _, ys, _ in series for y in ys]
    if not xs_all:
        raise ValueError("series are empty")
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def px(x: float) -> float:
        return margin + (x - x_lo) / x_span * (width - 2 * margin)

    def py(y: float) -> float:
        return height - margin - (y - y_lo) / y_span * (height - 2 * margin)

    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{width}" height="{height}">\n'
    )
    out.write(f'<rect width="{width}" height="{height}" fill="white"/>\n')
    frame = (
        f'{margin:.6g},{margin:.6g} {margin:.6g},{height - margin:.6g} '
        f'{width - margin:.6g},{height - margin:.6g}'
    )
    out.write(f'<polyline points="{frame}" fill="none" stroke="black" stroke-width="1"/>\n')
    if title:
        out.write(
            f'<text x="{width / 2:.6g}" y="{margin / 2:.6g}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>\n'
        )
    for i, (xs, ys, label) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        pts = " ".join(f"{px(float(x)):.6g},{py(float(y)):.6g}" for x, y in zip(xs, ys))
        out.write(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>\n')
        out.write(
            f'<text x="{width - margin:.6g}" y="{margin + 16 * (i + 1):.6g}" text-anchor="end" '
            f'font-family="sans-serif" font-size="12" fill="{color}">{label}</text>\n'
        )
    out.write("</svg>\n")
    return out.getvalue()
