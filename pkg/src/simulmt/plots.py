"""SVG rendering, built by plain string assembly so the package needs no
plotting dependency. Everything is emitted into a fixed 800x600 viewBox and
is fully self-contained: no external fonts, images or scripts.
"""

from __future__ import annotations

import math
from typing import Sequence

from .metrics import alignment_chunks
from .sweep import SweepResult

WIDTH = 800
HEIGHT = 600

# Fig-style marker convention: swept criteria get triangle/star/diamond,
# the consecutive baselines circle and square.
MARKER_BY_SERIES = {
    "worse": "triangle",
    "diff": "star",
    "entropy": "diamond",
    "greedy": "circle",
    "beam": "square",
}
COLOR_BY_SERIES = {
    "worse": "#d62728",
    "diff": "#1f77b4",
    "entropy": "#2ca02c",
    "greedy": "#7f7f7f",
    "beam": "#17becf",
}
FALLBACK_MARKER = "circle"
FALLBACK_COLOR = "#9467bd"


def _escape(text) -> str:
    return (str(text)
            .replace("&", "&amp;")
            .replace("<", "&lt;")
            .replace(">", "&gt;")
            .replace('"', "&quot;"))


def _marker(shape: str, x: float, y: float, size: float, color: str) -> str:
    s = size
    if shape == "triangle":
        pts = f"{x:.2f},{y - s:.2f} {x - s:.2f},{y + s:.2f} {x + s:.2f},{y + s:.2f}"
        return f'<polygon points="{pts}" fill="{color}"/>'
    if shape == "diamond":
        pts = f"{x:.2f},{y - s:.2f} {x + s:.2f},{y:.2f} {x:.2f},{y + s:.2f} {x - s:.2f},{y:.2f}"
        return f'<polygon points="{pts}" fill="{color}"/>'
    if shape == "square":
        return (f'<rect x="{x - s:.2f}" y="{y - s:.2f}" width="{2 * s:.2f}" '
                f'height="{2 * s:.2f}" fill="{color}"/>')
    if shape == "star":
        pts = []
        for k in range(10):
            r = s * 1.3 if k % 2 == 0 else s * 0.55
            a = -math.pi / 2 + k * math.pi / 5
            pts.append(f"{x + r * math.cos(a):.2f},{y + r * math.sin(a):.2f}")
        return f'<polygon points="{" ".join(pts)}" fill="{color}"/>'
    return f'<circle cx="{x:.2f}" cy="{y:.2f}" r="{s:.2f}" fill="{color}"/>'


def _svg_document(body: list[str]) -> str:
    head = (f'<svg xmlns="http://www.w3.org/2000/svg" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}" '
            f'font-family="sans-serif">')
    return "\n".join([head, f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
                      *body, "</svg>"]) + "\n"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if count < 2:
        return [lo]
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def frontier_svg(rows: Sequence[SweepResult]) -> str:
    """Quality-vs-delay scatter: x = mean tau, y = BLEU, markers by criterion."""
    if not rows:
        raise ValueError("no rows to plot")
    left, right, top, bottom = 80.0, 40.0, 50.0, 70.0
    pw = WIDTH - left - right
    ph = HEIGHT - top - bottom

    xs = [r.mean_tau for r in rows]
    ys = [r.bleu for r in rows]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_pad = (x_hi - x_lo) * 0.08 or 0.05
    y_pad = (y_hi - y_lo) * 0.08 or 5.0
    x_lo, x_hi = x_lo - x_pad, x_hi + x_pad
    y_lo, y_hi = y_lo - y_pad, y_hi + y_pad

    def px(v: float) -> float:
        return left + (v - x_lo) / (x_hi - x_lo) * pw

    def py(v: float) -> float:
        return top + ph - (v - y_lo) / (y_hi - y_lo) * ph

    body: list[str] = []
    body.append(f'<text x="{WIDTH / 2:.0f}" y="28" text-anchor="middle" '
                f'font-size="18">Quality vs. delay</text>')
    # axes
    body.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" '
                f'y2="{top + ph}" stroke="black"/>')
    body.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" '
                f'stroke="black"/>')
    for v in _ticks(x_lo, x_hi):
        x = px(v)
        body.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" '
                    f'y2="{top + ph + 6}" stroke="black"/>')
        body.append(f'<text x="{x:.2f}" y="{top + ph + 22}" '
                    f'text-anchor="middle" font-size="12">{v:.2f}</text>')
    for v in _ticks(y_lo, y_hi):
        y = py(v)
        body.append(f'<line x1="{left - 6}" y1="{y:.2f}" x2="{left}" '
                    f'y2="{y:.2f}" stroke="black"/>')
        body.append(f'<text x="{left - 10}" y="{y + 4:.2f}" text-anchor="end" '
                    f'font-size="12">{v:.1f}</text>')
    body.append(f'<text x="{left + pw / 2:.0f}" y="{HEIGHT - 22}" '
                f'text-anchor="middle" font-size="14">mean delay (tau)</text>')
    body.append(f'<text x="24" y="{top + ph / 2:.0f}" text-anchor="middle" '
                f'font-size="14" transform="rotate(-90 24 {top + ph / 2:.0f})">'
                f'BLEU</text>')

    series_seen: list[str] = []
    for row in rows:
        shape = MARKER_BY_SERIES.get(row.criterion, FALLBACK_MARKER)
        color = COLOR_BY_SERIES.get(row.criterion, FALLBACK_COLOR)
        if row.criterion not in series_seen:
            series_seen.append(row.criterion)
        detail = (f"{row.criterion}"
                  + (f" delta={row.delta} s0={row.s0}" if row.delta is not None
                     else " (baseline)")
                  + f": bleu={row.bleu:.2f} tau={row.mean_tau:.3f}")
        body.append(f"<g>{_marker(shape, px(row.mean_tau), py(row.bleu), 6, color)}"
                    f"<title>{_escape(detail)}</title></g>")

    # legend, top-right inside the plot area
    lx = left + pw - 130
    ly = top + 12
    body.append(f'<rect x="{lx - 14}" y="{ly - 14}" width="144" '
                f'height="{20 * len(series_seen) + 12}" fill="white" '
                f'stroke="#999"/>')
    for i, name in enumerate(series_seen):
        y = ly + i * 20
        shape = MARKER_BY_SERIES.get(name, FALLBACK_MARKER)
        color = COLOR_BY_SERIES.get(name, FALLBACK_COLOR)
        body.append(_marker(shape, lx, y, 5, color))
        body.append(f'<text x="{lx + 14}" y="{y + 4}" font-size="12">'
                    f'{_escape(name)}</text>')
    return _svg_document(body)


CHUNK_FILLS = ("#cfe3f7", "#fbe2b5")


def trace_svg(source_tokens: Sequence[str], target_tokens: Sequence[str],
              committed: Sequence[int]) -> str:
    """Chunk-aligned rendering of one simultaneous decode.

    Top band: source tokens; middle band: target tokens, grouped into
    alignment chunks with alternating highlights and connectors from each
    chunk to its source span; bottom: a step plot of s'(t).
    """
    if len(committed) != len(target_tokens):
        raise ValueError("one committed context size per target token")
    chunks = alignment_chunks(committed)
    n_src = len(source_tokens)
    n_tgt = len(target_tokens)
    if n_src == 0 or n_tgt == 0:
        raise ValueError("need non-empty source and target")

    left = 60.0
    pw = WIDTH - 2 * left
    src_y, tgt_y, box_h = 60.0, 150.0, 34.0
    src_w = pw / n_src
    tgt_w = pw / n_tgt

    body: list[str] = []
    body.append(f'<text x="{WIDTH / 2:.0f}" y="30" text-anchor="middle" '
                f'font-size="16">Simultaneous decode alignment</text>')

    fill_of_src = {}
    fill_of_tgt = {}
    for k, chunk in enumerate(chunks):
        fill = CHUNK_FILLS[k % 2]
        for i in range(chunk.source_start, chunk.source_end):
            fill_of_src[i] = fill
        for t in range(chunk.target_start, chunk.target_end):
            fill_of_tgt[t] = fill

    for i, token in enumerate(source_tokens):
        x = left + i * src_w
        fill = fill_of_src.get(i, "#eeeeee")
        body.append(f'<rect x="{x:.2f}" y="{src_y}" width="{src_w:.2f}" '
                    f'height="{box_h}" fill="{fill}" stroke="#666"/>')
        body.append(f'<text x="{x + src_w / 2:.2f}" y="{src_y + 22}" '
                    f'text-anchor="middle" font-size="12">{_escape(token)}</text>')
    for t, token in enumerate(target_tokens):
        x = left + t * tgt_w
        fill = fill_of_tgt.get(t, "#eeeeee")
        body.append(f'<rect x="{x:.2f}" y="{tgt_y}" width="{tgt_w:.2f}" '
                    f'height="{box_h}" fill="{fill}" stroke="#666"/>')
        body.append(f'<text x="{x + tgt_w / 2:.2f}" y="{tgt_y + 22}" '
                    f'text-anchor="middle" font-size="12">{_escape(token)}</text>')
    body.append(f'<text x="{left - 8}" y="{src_y + 22}" text-anchor="end" '
                f'font-size="12">source</text>')
    body.append(f'<text x="{left - 8}" y="{tgt_y + 22}" text-anchor="end" '
                f'font-size="12">target</text>')

    for chunk in chunks:
        sx = left + (chunk.source_start + chunk.source_end) / 2 * src_w
        tx = left + (chunk.target_start + chunk.target_end) / 2 * tgt_w
        body.append(f'<line x1="{sx:.2f}" y1="{src_y + box_h}" x2="{tx:.2f}" '
                    f'y2="{tgt_y}" stroke="#888" stroke-dasharray="4 3"/>')

    # step plot of s'(t)
    top, bottom = 240.0, HEIGHT - 50.0
    ph = bottom - top
    max_s = max(max(committed), n_src)

    def px(t: float) -> float:  # t in 0..n_tgt
        return left + t / n_tgt * pw

    def py(s: float) -> float:
        return bottom - s / max_s * ph

    body.append(f'<line x1="{left}" y1="{bottom}" x2="{left + pw}" '
                f'y2="{bottom}" stroke="black"/>')
    body.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}" '
                f'stroke="black"/>')
    points = []
    for t, s in enumerate(committed):
        points.append(f"{px(t):.2f},{py(s):.2f}")
        points.append(f"{px(t + 1):.2f},{py(s):.2f}")
    body.append(f'<polyline points="{" ".join(points)}" fill="none" '
                f'stroke="#d62728" stroke-width="2"/>')
    x_step = max(1, n_tgt // 10)
    for t in range(1, n_tgt + 1, x_step):
        x = px(t)
        body.append(f'<line x1="{x:.2f}" y1="{bottom}" x2="{x:.2f}" '
                    f'y2="{bottom + 5}" stroke="black"/>')
        body.append(f'<text x="{x:.2f}" y="{bottom + 18}" text-anchor="middle" '
                    f'font-size="11">{t}</text>')
    s_step = max(1, max_s // 8)
    for s in range(0, max_s + 1, s_step):
        y = py(s)
        body.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" '
                    f'y2="{y:.2f}" stroke="black"/>')
        body.append(f'<text x="{left - 9}" y="{y + 4:.2f}" text-anchor="end" '
                    f'font-size="11">{s}</text>')
    body.append(f'<text x="{left + pw / 2:.0f}" y="{HEIGHT - 14}" '
                f'text-anchor="middle" font-size="13">target position t</text>')
    body.append(f'<text x="20" y="{(top + bottom) / 2:.0f}" text-anchor="middle" '
                f'font-size="13" transform="rotate(-90 20 {(top + bottom) / 2:.0f})">'
                f"s'(t)</text>")
    return _svg_document(body)
