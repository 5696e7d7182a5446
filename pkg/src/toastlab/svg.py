"""SVG emitters: toast levels as nested rectangles, optional point overlays.

d = 1 toasts draw directly in the plane; d = 2 toasts project onto a chosen
pair of coordinate axes.  Output is deterministic text.
"""

from __future__ import annotations

from pathlib import Path

from .toast import Toast

_LEVEL_COLORS = ["#9ecae1", "#fdae6b", "#a1d99b", "#bcbddc", "#fc9272", "#c7e9c0"]


def toast_svg(
    toast: Toast,
    path: str | Path,
    plane: tuple[int, int] = (0, 1),
    points: list[tuple[float, float]] | None = None,
    located: list[tuple[float, float]] | None = None,
    size: int = 900,
) -> None:
    ax, ay = plane
    xs, ys = [], []
    for level in toast.levels:
        for region in level.regions:
            box = region.absolute()
            xs += [float(box.lo.coords[ax]), float(box.hi.coords[ax])]
            ys += [float(box.lo.coords[ay]), float(box.hi.coords[ay])]
    if not xs:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    pad = 0.03 * max(max(xs) - min(xs), max(ys) - min(ys), 1.0)
    x0, x1 = min(xs) - pad, max(xs) + pad
    y0, y1 = min(ys) - pad, max(ys) + pad
    scale = size / max(x1 - x0, y1 - y0)

    def sx(v: float) -> float:
        return (v - x0) * scale

    def sy(v: float) -> float:
        return (y1 - v) * scale  # flip so the vertical axis points up

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for level in reversed(toast.levels):
        color = _LEVEL_COLORS[level.n % len(_LEVEL_COLORS)]
        for region in level.regions:
            box = region.absolute()
            x = sx(float(box.lo.coords[ax]))
            y = sy(float(box.hi.coords[ay]))
            w = float(box.side(ax)) * scale
            h = float(box.side(ay)) * scale
            lines.append(
                f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
                f'fill="{color}" fill-opacity="0.45" stroke="#404040" stroke-width="0.6"/>'
            )
    for px, py in points or []:
        lines.append(
            f'<circle cx="{sx(px):.2f}" cy="{sy(py):.2f}" r="3" fill="#d62728"/>'
        )
    for px, py in located or []:
        x, y = sx(px), sy(py)
        lines.append(
            f'<path d="M {x - 4:.2f} {y - 4:.2f} L {x + 4:.2f} {y + 4:.2f} '
            f'M {x - 4:.2f} {y + 4:.2f} L {x + 4:.2f} {y - 4:.2f}" '
            f'stroke="#1a1a1a" stroke-width="1.2"/>'
        )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")
