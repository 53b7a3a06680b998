"""Minimal line/marker plots written straight to SVG text.

Only what the experiment figures need: stacked panels sharing an x axis,
linear or log10 y scale, polylines and markers, axis ticks and a legend.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from xml.sax.saxutils import escape

import numpy as np

COLORS = ("#1f4e9c", "#222222", "#c0392b", "#27864a", "#8e44ad")


@dataclass
class Series:
    x: np.ndarray
    y: np.ndarray
    label: str = ""
    color: str = COLORS[0]
    line: bool = True
    marker: bool = False
    dashed: bool = False


@dataclass
class Panel:
    ylabel: str
    series: list[Series] = field(default_factory=list)
    log_y: bool = False
    height: int = 220

    def add(self, x, y, label="", **style) -> "Panel":
        style.setdefault("color", COLORS[len(self.series) % len(COLORS)])
        self.series.append(Series(np.asarray(x, float), np.asarray(y, float), label, **style))
        return self


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    if hi <= lo:
        return np.array([lo])
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=10 * mag)
    return np.arange(np.ceil(lo / step) * step, hi + 1e-9 * step, step)


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def render(panels: list[Panel], xlabel: str, title: str = "", width: int = 640) -> str:
    left, right, top, gap, bottom = 70, 20, 30 if title else 12, 18, 45
    total_h = top + sum(p.height for p in panels) + gap * (len(panels) - 1) + bottom
    xs = np.concatenate([s.x for p in panels for s in p.series]) if panels else np.zeros(1)
    xs = xs[np.isfinite(xs)]
    x0, x1 = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    plot_w = width - left - right

    def sx(v):
        return left + (v - x0) / (x1 - x0) * plot_w

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{total_h}" '
        f'viewBox="0 0 {width} {total_h}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{total_h}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>')
    y_top = top
    for pi, panel in enumerate(panels):
        h = panel.height
        ys = np.concatenate([s.y for s in panel.series]) if panel.series else np.zeros(1)
        if panel.log_y:
            ys = ys[ys > 0]
            ys = np.log10(ys) if ys.size else np.zeros(1)
        ys = ys[np.isfinite(ys)]
        y0, y1 = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
        if panel.log_y:
            y0, y1 = np.floor(y0), np.ceil(y1)
        pad = 0.05 * (y1 - y0) if y1 > y0 else 0.5
        y0, y1 = y0 - pad, y1 + pad

        def sy(v, y0=y0, y1=y1, y_top=y_top, h=h):
            return y_top + h - (v - y0) / (y1 - y0) * h

        out.append(f'<rect x="{left}" y="{y_top}" width="{plot_w}" height="{h}" fill="none" stroke="black"/>')
        for t in _ticks(y0, y1):
            label = f"1e{int(round(t))}" if panel.log_y else _fmt(t)
            if panel.log_y and abs(t - round(t)) > 1e-9:
                continue
            out.append(f'<line x1="{left - 4}" y1="{sy(t):.2f}" x2="{left}" y2="{sy(t):.2f}" stroke="black"/>')
            out.append(f'<text x="{left - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{label}</text>')
        out.append(
            f'<text transform="translate(16,{y_top + h / 2}) rotate(-90)" text-anchor="middle">{escape(panel.ylabel)}</text>'
        )
        for si, s in enumerate(panel.series):
            y = np.log10(np.where(s.y > 0, s.y, np.nan)) if panel.log_y else s.y
            ok = np.isfinite(s.x) & np.isfinite(y)
            pts = [(sx(a), sy(b)) for a, b in zip(s.x[ok], y[ok])]
            if s.line and len(pts) > 1:
                path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
                dash = ' stroke-dasharray="5,3"' if s.dashed else ""
                out.append(f'<polyline points="{path}" fill="none" stroke="{s.color}" stroke-width="1.5"{dash}/>')
            if s.marker:
                out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.5" fill="{s.color}"/>' for a, b in pts)
            if s.label:
                ly = y_top + 14 + 14 * si
                out.append(f'<line x1="{left + plot_w - 120}" y1="{ly - 4}" x2="{left + plot_w - 100}" y2="{ly - 4}" stroke="{s.color}" stroke-width="2"/>')
                out.append(f'<text x="{left + plot_w - 95}" y="{ly}">{escape(s.label)}</text>')
        if pi == len(panels) - 1:
            base = y_top + h
            for t in _ticks(x0, x1):
                out.append(f'<line x1="{sx(t):.2f}" y1="{base}" x2="{sx(t):.2f}" y2="{base + 4}" stroke="black"/>')
                out.append(f'<text x="{sx(t):.2f}" y="{base + 16}" text-anchor="middle">{_fmt(t)}</text>')
            out.append(f'<text x="{left + plot_w / 2}" y="{base + 34}" text-anchor="middle">{escape(xlabel)}</text>')
        y_top += h + gap
    out.append("</svg>")
    return "\n".join(out) + "\n"


def energy_scan_svg(scan) -> str:
    """E0 against l0 with the exact curve overlaid and a relative-deviation panel."""
    top = Panel("E0")
    if any(r.E0_exact is not None for r in scan.records):
        exact = [np.nan if r.E0_exact is None else r.E0_exact for r in scan.records]
        top.add(scan.l0_grid, exact, "exact", color=COLORS[1])
    top.add(scan.l0_grid, scan.energies, scan.method, color=COLORS[0], line=False, marker=True)
    panels = [top]
    dev = scan.rel_devs
    if np.any(np.isfinite(dev)):
        panels.append(Panel("|dE0/E0|", log_y=True, height=130).add(scan.l0_grid, dev, color=COLORS[2], marker=True))
    return render(panels, "l0", f"N = {scan.params.n_sites}")


def particle_number_svg(scan) -> str:
    panel = Panel("<P>").add(scan.l0_grid, scan.particle_numbers, scan.method, marker=True)
    return render([panel], "l0", f"N = {scan.params.n_sites}")


def dims_svg(run) -> str:
    """Subspace dimension after each step; accepted steps are marked."""
    k = np.array([s.k for s in run.steps], float)
    dim = np.array([s.dim for s in run.steps], float)
    acc = np.array([bool(np.any(s.accepted)) for s in run.steps])
    panel = Panel("dim K").add(k, dim, "all steps", color=COLORS[1])
    panel.add(k[acc], dim[acc], "accepted", color=COLORS[0], line=False, marker=True)
    return render([panel], "Trotter step k", f"N = {run.params.n_sites}")


def ratio_svg(rows) -> str:
    """dimK/dimH against system size."""
    n = np.array([r.n_sites for r in rows], float)
    ratio = np.array([r.dim_ratio for r in rows], float)
    return render([Panel("dimK / dimH").add(n, ratio, line=False, marker=True)], "N")


def l0c_fit_svg(fit) -> str:
    n = np.array([p[0] for p in fit.points], float)
    l0c = np.array([p[1] for p in fit.points], float)
    fine = np.linspace(n.min(), n.max(), 100)
    panel = Panel("l0,c").add(n, l0c, "detected", line=False, marker=True)
    panel.add(fine, fit.predict(fine), "fit", color=COLORS[2], dashed=True)
    return render([panel], "N")
