"""Minimal deterministic SVG line plots.

Hand-rolled so that plot output is byte-identical for identical data: no
timestamps, no hashed ids, no external dependencies.  Good enough for the
few diagnostic figures the CLI emits.
"""

from __future__ import annotations

import math

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 72, 16, 36, 52
_COLORS = ("#1f6fb2", "#c23b22", "#3a7d44", "#8a5fbf", "#b8860b")


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _ticks(lo: float, hi: float, n: int = 6):
    if not math.isfinite(lo) or not math.isfinite(hi) or lo == hi:
        lo, hi = lo - 0.5, lo + 0.5
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / max(n - 1, 1)))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(t) < 1e-12 * span else t)
        t += step
    return ticks


def write_line_plot(path, x, series, title="", xlabel="", ylabel=""):
    """Write a line plot; ``series`` maps label -> y array."""
    x = list(map(float, x))
    ys = {label: list(map(float, y)) for label, y in series.items()}
    xlo, xhi = min(x), max(x)
    all_y = [v for y in ys.values() for v in y if math.isfinite(v)]
    ylo, yhi = min(all_y), max(all_y)
    if xlo == xhi:
        xlo, xhi = xlo - 0.5, xhi + 0.5
    if ylo == yhi:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    pad = 0.04 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def px(v):
        return _ML + (v - xlo) / (xhi - xlo) * (_W - _ML - _MR)

    def py(v):
        return _H - _MB - (v - ylo) / (yhi - ylo) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="22" font-family="sans-serif" font-size="15" '
        f'text-anchor="middle">{title}</text>',
    ]
    axis = (f'M {px(xlo):.2f} {py(ylo):.2f} H {px(xhi):.2f} '
            f'M {px(xlo):.2f} {py(ylo):.2f} V {py(yhi):.2f}')
    parts.append(f'<path d="{axis}" stroke="black" fill="none" stroke-width="1"/>')
    for t in _ticks(xlo, xhi):
        xpix = px(t)
        parts.append(f'<line x1="{xpix:.2f}" y1="{py(ylo):.2f}" x2="{xpix:.2f}" '
                     f'y2="{py(ylo) + 5:.2f}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{xpix:.2f}" y="{py(ylo) + 19:.2f}" font-family="sans-serif" '
                     f'font-size="11" text-anchor="middle">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi):
        ypix = py(t)
        parts.append(f'<line x1="{px(xlo) - 5:.2f}" y1="{ypix:.2f}" x2="{px(xlo):.2f}" '
                     f'y2="{ypix:.2f}" stroke="black" stroke-width="1"/>')
        parts.append(f'<text x="{px(xlo) - 8:.2f}" y="{ypix + 4:.2f}" font-family="sans-serif" '
                     f'font-size="11" text-anchor="end">{_fmt(t)}</text>')
    if xlabel:
        parts.append(f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 14}" '
                     f'font-family="sans-serif" font-size="13" text-anchor="middle">{xlabel}</text>')
    if ylabel:
        xr = 18
        yr = (_MT + _H - _MB) / 2
        parts.append(f'<text x="{xr}" y="{yr:.1f}" font-family="sans-serif" font-size="13" '
                     f'text-anchor="middle" transform="rotate(-90 {xr} {yr:.1f})">{ylabel}</text>')

    for idx, (label, y) in enumerate(ys.items()):
        color = _COLORS[idx % len(_COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y) if math.isfinite(b))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.3"/>')
        ly = _MT + 16 + 16 * idx
        parts.append(f'<line x1="{_W - _MR - 130}" y1="{ly - 4}" x2="{_W - _MR - 106}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR - 100}" y="{ly}" font-family="sans-serif" '
                     f'font-size="12">{label}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(parts) + "\n")
