"""Minimal deterministic SVG log-log plot."""

from __future__ import annotations

import math

WIDTH, HEIGHT = 640, 480
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 60


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float) -> list[int]:
    return list(range(math.ceil(lo), math.floor(hi) + 1))


def loglog_svg(log2_dt, log2_err, slope: float, intercept: float, title: str,
               label: str) -> str:
    """Points (log2 dt, log2 err) with the line y = slope x + intercept.

    A NaN slope drops the line; no points gives an empty frame.
    """
    xs, ys = list(log2_dt), list(log2_err)
    has_line = bool(xs) and math.isfinite(slope) and math.isfinite(intercept)
    line_y = [slope * x + intercept for x in xs] if has_line else []
    x_lo, x_hi = (min(xs) - 0.5, max(xs) + 0.5) if xs else (-1.0, 1.0)
    y_all = ys + line_y
    y_lo, y_hi = (min(y_all) - 0.5, max(y_all) + 0.5) if y_all else (-1.0, 1.0)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x_lo) / (x_hi - x_lo) * pw

    def py(y):
        return TOP + (y_hi - y) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{title}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x_lo, x_hi):
        x = _fmt(px(t))
        out.append(f'<line x1="{x}" y1="{TOP + ph}" x2="{x}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x}" y="{TOP + ph + 20}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="12">{t}</text>')
    for t in _ticks(y_lo, y_hi):
        y = _fmt(py(t))
        out.append(f'<line x1="{LEFT - 5}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y}" text-anchor="end" dominant-baseline="middle" '
                   f'font-family="sans-serif" font-size="12">{t}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle" '
               f'font-family="sans-serif" font-size="13">log2(step size)</text>')
    out.append(f'<text x="18" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {TOP + ph / 2:.2f})" font-family="sans-serif" '
               f'font-size="13">log2({label})</text>')
    if has_line:
        out.append(f'<line x1="{_fmt(px(xs[0]))}" y1="{_fmt(py(line_y[0]))}" '
                   f'x2="{_fmt(px(xs[-1]))}" y2="{_fmt(py(line_y[-1]))}" stroke="#c0392b" '
                   f'stroke-width="1.5"/>')
    for x, y in zip(xs, ys):
        out.append(f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" r="4" fill="#2c3e50"/>')
    out.append(f'<text x="{LEFT + 10}" y="{TOP + 20}" font-family="sans-serif" font-size="13" '
               f'fill="#c0392b">slope = {slope:.4f}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
