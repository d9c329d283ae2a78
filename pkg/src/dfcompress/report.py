"""CSV / JSON / SVG report writers.  Every file is written atomically."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from xml.sax.saxutils import escape

ESTIMATE_HEADER = ["layer", "dataflow", "q_bits", "p", "pe_energy", "input_move", "weight_move",
                   "output_move", "register_energy", "total", "logic_area", "memory_bits"]
HISTORY_HEADER = ["episode", "step", "layer", "Q", "P", "alpha", "beta", "reward"]


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text):
    atomic_write_bytes(path, text.encode("utf-8"))


def fmt(v):
    """Locale-independent number formatting: '.' decimal point, no grouping."""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def estimate_rows(report, net_name=None):
    rows = []
    area = report.area
    for i, (e, q, p) in enumerate(zip(report.layers, report.q_bits, report.remaining)):
        rows.append([f"L{i}", report.dataflow.value, q, float(p), e.pe_energy, e.input_move,
                     e.weight_move, e.output_move, e.register_energy, e.total,
                     area.logic_area if i == 0 and area else "",
                     area.memory_bits if i == 0 and area else ""])
    rows.append(["total", report.dataflow.value, "", "", report.pe_energy, report.input_move,
                 report.weight_move, report.output_move, report.register_energy, report.total,
                 area.logic_area if area else "", area.memory_bits if area else ""])
    return rows


def history_rows(history):
    rows = []
    for rec in history:
        for layer, (q, p) in enumerate(zip(rec.q, rec.p)):
            rows.append([rec.episode, rec.t, layer, float(q), float(p), float(rec.alpha),
                         float(rec.beta), float(rec.reward)])
    return rows


# -- SVG -----------------------------------------------------------------------

_COLORS = ["#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1"]


class _Svg:
    def __init__(self, width, height, title):
        self.w, self.h = width, height
        self.parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
                      f'viewBox="0 0 {width} {height}">',
                      f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
                      f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14" '
                      f'font-family="sans-serif">{escape(title)}</text>']

    def rect(self, x, y, w, h, color, tip=None):
        inner = f"<title>{escape(tip)}</title>" if tip else ""
        self.parts.append(f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
                          f'fill="{color}">{inner}</rect>')

    def text(self, x, y, s, size=10, anchor="middle"):
        self.parts.append(f'<text x="{x:.2f}" y="{y:.2f}" text-anchor="{anchor}" '
                          f'font-size="{size}" font-family="sans-serif">{escape(str(s))}</text>')

    def line(self, x1, y1, x2, y2, color="black"):
        self.parts.append(f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
                          f'stroke="{color}"/>')

    def polyline(self, pts, color):
        p = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        self.parts.append(f'<polyline points="{p}" fill="none" stroke="{color}" stroke-width="1.5"/>')

    def render(self):
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def breakdown_svg(report, title):
    """Stacked bars of the energy breakdown, one bar per layer plus the total."""
    parts = ["pe_energy", "input_move", "weight_move", "output_move", "register_energy"]
    bars = [(f"L{i}", e) for i, e in enumerate(report.layers)]
    width, height = 120 + 70 * (len(bars) + 1), 360
    top, bottom, left = 40, 300, 70
    svg = _Svg(width, height, title)
    peak = max([e.total for _, e in bars] + [1e-300])
    svg.line(left, bottom, width - 20, bottom)
    svg.line(left, top, left, bottom)
    svg.text(left - 5, top + 4, f"{peak:.3g}", anchor="end")
    svg.text(left - 5, bottom, "0", anchor="end")
    for i, (name, e) in enumerate(bars):
        x = left + 20 + 70 * i
        y = bottom
        for j, part in enumerate(parts):
            v = getattr(e, part)
            h = (bottom - top) * v / peak
            y -= h
            svg.rect(x, y, 40, h, _COLORS[j], f"{name} {part}: {v:.6g}")
        svg.text(x + 20, bottom + 15, name)
    for j, part in enumerate(parts):
        y = top + 16 * j
        svg.rect(width - 150, y, 10, 10, _COLORS[j])
        svg.text(width - 135, y + 9, part, anchor="start")
    return svg.render()


def campaign_svg(episodes, beta0, title):
    """Energy of the final configuration per episode (line) over accuracy (bars)."""
    n = max(len(episodes), 1)
    width, height = max(360, 80 + 24 * n), 340
    top, bottom, left, right = 40, 290, 60, width - 50
    svg = _Svg(width, height, title)
    svg.line(left, bottom, right, bottom)
    svg.line(left, top, left, bottom)
    svg.line(right, top, right, bottom)
    svg.text(left - 5, top + 4, f"{beta0:.3g}", anchor="end")
    svg.text(right + 5, top + 4, "acc 1.0", anchor="start")
    step = (right - left) / n
    pts = []
    for i, e in enumerate(episodes):
        x = left + step * (i + 0.5)
        h = (bottom - top) * e["final_alpha"]
        svg.rect(x - step * 0.3, bottom - h, step * 0.6, h, "#cfd8e3",
                 f"episode {e['episode']} accuracy {e['final_alpha']:.4f}")
        pts.append((x, bottom - (bottom - top) * e["final_beta"] / beta0))
        svg.text(x, bottom + 14, e["episode"], size=8)
    if pts:
        svg.polyline(pts, "#e15759")
    svg.text((left + right) / 2, height - 10, "episode")
    return svg.render()


def write_svg(path, markup):
    atomic_write_text(path, markup)
