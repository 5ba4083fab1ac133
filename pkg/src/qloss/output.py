"""File writers for sweep tables, reports, matrices and quick SVG plots."""

from __future__ import annotations

import csv
import html
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

FLOAT_FORMAT = "{:.12g}"


def fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT.format(float(value))
    return str(value)


def parse_grid(text: str) -> list[float]:
    """``start:stop:count`` (inclusive, evenly spaced) or a comma-separated list."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid {text!r} must look like start:stop:count")
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
        if count < 1:
            raise ValueError("grid count must be >= 1")
        if count == 1:
            return [start]
        return [float(x) for x in np.linspace(start, stop, count)]
    values = [float(x) for x in text.split(",") if x.strip()]
    if not values:
        raise ValueError("empty grid")
    return values


def _round_json(obj):
    if isinstance(obj, dict):
        return {str(k): _round_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_json(v) for v in obj]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return None
        return float(FLOAT_FORMAT.format(x))
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def csv_text(columns: Sequence[str], rows: Iterable[dict], comments: Sequence[str] = ()) -> str:
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([fmt(row[c]) for c in columns])
    return buf.getvalue()


def json_text(payload) -> str:
    return json.dumps(_round_json(payload), indent=2, sort_keys=False) + "\n"


def matrix_csv_text(m) -> str:
    """One matrix row per line; each complex entry is a (re, im) column pair."""
    m = np.atleast_2d(np.asarray(m, dtype=np.complex128))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"{p}{j}" for j in range(m.shape[1]) for p in ("re", "im")])
    for row in m:
        w.writerow([fmt(x) for z in row for x in (float(z.real), float(z.imag))])
    return buf.getvalue()


def read_matrix_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))[1:]
    vals = np.array([[float(x) for x in r] for r in rows if r])
    return vals[:, 0::2] + 1j * vals[:, 1::2]


def density_csv_text(rho, comments: Sequence[str] = ()) -> str:
    rows = [
        {"row_state": r, "col_state": c, "re": re, "im": im} for r, c, re, im in rho.csv_rows(tol=0.0)
    ]
    return csv_text(["row_state", "col_state", "re", "im"], rows, comments)


def svg_text(
    series: dict[str, tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 640,
    height: int = 420,
) -> str:
    """Line plot with plain axes; one polyline per series."""
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"]
    xs = [x for xv, _ in series.values() for x in xv]
    ys = [y for _, yv in series.values() for y in yv if y is not None and math.isfinite(y)]
    if not xs or not ys:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    left, right, top, bottom = 70, 20, 40, 50
    pw, ph = width - left - right, height - top - bottom

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for k in range(5):
        xv = x0 + (x1 - x0) * k / 4
        yv = y0 + (y1 - y0) * k / 4
        out.append(f'<text x="{px(xv):.1f}" y="{top + ph + 16}" text-anchor="middle">{xv:.4g}</text>')
        out.append(f'<text x="{left - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.4g}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{height - 8}" text-anchor="middle">{html.escape(xlabel)}</text>')
    out.append(
        f'<text x="14" y="{top + ph / 2}" text-anchor="middle" transform="rotate(-90 14 {top + ph / 2})">'
        f"{html.escape(ylabel)}</text>"
    )
    out.append(f'<text x="{left + pw / 2}" y="20" text-anchor="middle">{html.escape(title)}</text>')
    for k, (name, (xv, yv)) in enumerate(series.items()):
        color = palette[k % len(palette)]
        pts = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xv, yv) if y is not None and math.isfinite(y))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{left + pw - 4}" y="{top + 14 + 14 * k}" text-anchor="end" fill="{color}">{html.escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8")
