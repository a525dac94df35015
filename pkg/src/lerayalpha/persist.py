"""Files: field snapshots, checkpoints, reports, manifests and log-log plots.

Snapshot format (plain text)::

    MACFIELD nx ny lx
    [STATE t step_index dt]          (checkpoints only)
    U                                 nx lines of ny comma-separated values
    V                                 nx lines of ny+1 values
    [P]                               nx lines of ny values

Floats are written with ``repr`` so a read-back is bit-exact.
"""
from __future__ import annotations

import json
import math
import os
import tempfile
from pathlib import Path
from typing import Optional

import numpy as np

from .mesh import GridSpec, ScalarField, VelocityField


class FieldFormatError(ValueError):
    pass


def atomic_write(path, text: str) -> Path:
    """Write to a temporary file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _block(tag: str, arr: np.ndarray) -> list:
    return [tag] + [",".join(repr(float(x)) for x in row) for row in arr]


def field_text(v: VelocityField, p: Optional[ScalarField] = None, state: Optional[tuple] = None) -> str:
    g = v.grid
    lines = [f"MACFIELD {g.nx} {g.ny} {float(g.lx)!r}"]
    if state is not None:
        t, k, dt = state
        lines.append(f"STATE {float(t)!r} {int(k)} {float(dt)!r}")
    lines += _block("U", v.u) + _block("V", v.v)
    if p is not None:
        lines += _block("P", p.values)
    return "\n".join(lines) + "\n"


def write_field(path, v: VelocityField, p: Optional[ScalarField] = None) -> Path:
    return atomic_write(path, field_text(v, p))


def write_checkpoint(path, v: VelocityField, p: ScalarField, t: float, step_index: int, dt: float) -> Path:
    return atomic_write(path, field_text(v, p, (t, step_index, dt)))


def _parse(text: str):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("MACFIELD"):
        raise FieldFormatError("missing MACFIELD header")
    head = lines[0].split()
    try:
        grid = GridSpec(int(head[1]), int(head[2]), float(head[3]))
    except (IndexError, ValueError) as exc:
        raise FieldFormatError(f"bad header: {lines[0]!r}") from exc
    pos = 1
    state = None
    if pos < len(lines) and lines[pos].startswith("STATE"):
        parts = lines[pos].split()
        state = (float(parts[1]), int(parts[2]), float(parts[3]))
        pos += 1
    blocks = {}
    shapes = {"U": grid.ny, "V": grid.ny + 1, "P": grid.ny}
    while pos < len(lines):
        tag = lines[pos]
        if tag not in shapes:
            raise FieldFormatError(f"unexpected block {tag!r}")
        rows = [np.array([float(x) for x in ln.split(",")]) for ln in lines[pos + 1:pos + 1 + grid.nx]]
        if len(rows) != grid.nx or any(len(r) != shapes[tag] for r in rows):
            raise FieldFormatError(f"block {tag} has the wrong shape")
        blocks[tag] = np.array(rows)
        pos += 1 + grid.nx
    if "U" not in blocks or "V" not in blocks:
        raise FieldFormatError("snapshot needs U and V blocks")
    v = VelocityField(blocks["U"], blocks["V"], grid)
    p = ScalarField(blocks["P"], grid) if "P" in blocks else None
    return v, p, state


def read_field(path):
    """Returns ``(velocity, pressure or None)``."""
    v, p, _ = _parse(Path(path).read_text(encoding="utf-8"))
    return v, p


def read_checkpoint(path):
    """Returns ``(velocity, pressure, (t, step_index, dt))``."""
    v, p, state = _parse(Path(path).read_text(encoding="utf-8"))
    if state is None or p is None:
        raise FieldFormatError("not a checkpoint (missing STATE line or pressure)")
    return v, p, state


def write_manifest(path, payload: dict) -> Path:
    return atomic_write(path, json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return str(x)


# ---------------------------------------------------------------------------
# SVG log-log plot
# ---------------------------------------------------------------------------

def loglog_svg(series: dict, xlabel: str, ylabel: str, fits: Optional[dict] = None,
               title: str = "", width: int = 480, height: int = 360) -> str:
    """Markers for each named series of ``(x, y)`` points; dashed fitted lines when given.

    ``fits`` maps series name to ``(slope, intercept)`` in natural-log coordinates.
    """
    pts = [(x, y) for s in series.values() for x, y in s if x > 0 and y > 0]
    if not pts:
        return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">'
                f'<text x="20" y="40">no positive data</text></svg>\n')
    lx = [math.log10(x) for x, _ in pts]
    ly = [math.log10(y) for _, y in pts]
    x0, x1 = math.floor(min(lx)), math.ceil(max(lx))
    y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    x1 = x1 if x1 > x0 else x0 + 1
    y1 = y1 if y1 > y0 else y0 + 1
    ml, mr, mt, mb = 70, 20, 30, 50
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (math.log10(x) - x0) / (x1 - x0) * pw

    def py(y):
        return mt + (y1 - math.log10(y)) / (y1 - y0) * ph

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for e in range(x0, x1 + 1):
        xp = px(10.0**e)
        out.append(f'<line x1="{xp:.1f}" y1="{mt}" x2="{xp:.1f}" y2="{mt + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{xp:.1f}" y="{mt + ph + 15}" text-anchor="middle">1e{e}</text>')
    for e in range(y0, y1 + 1):
        yp = py(10.0**e)
        out.append(f'<line x1="{ml}" y1="{yp:.1f}" x2="{ml + pw}" y2="{yp:.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{ml - 5}" y="{yp + 4:.1f}" text-anchor="end">1e{e}</text>')
    for i, (name, data) in enumerate(series.items()):
        c = colors[i % len(colors)]
        data = [(x, y) for x, y in data if x > 0 and y > 0]
        for x, y in data:
            out.append(f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="3.5" fill="{c}"/>')
        if fits and name in fits and data:
            slope, icpt = fits[name]
            xa, xb = min(x for x, _ in data), max(x for x, _ in data)
            ya, yb = math.exp(icpt) * xa**slope, math.exp(icpt) * xb**slope
            if ya > 0 and yb > 0:
                out.append(f'<line x1="{px(xa):.1f}" y1="{py(ya):.1f}" x2="{px(xb):.1f}" y2="{py(yb):.1f}" '
                           f'stroke="{c}" stroke-dasharray="5,3"/>')
        label = name if not (fits and name in fits) else f"{name} (slope {fits[name][0]:.3f})"
        out.append(f'<text x="{ml + 8}" y="{mt + 14 + 14 * i}" fill="{c}">{_esc(label)}</text>')
    out.append(f'<text x="{ml + pw / 2}" y="{height - 12}" text-anchor="middle">{_esc(xlabel)}</text>')
    out.append(f'<text x="15" y="{mt + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 15 {mt + ph / 2})">{_esc(ylabel)}</text>')
    if title:
        out.append(f'<text x="{ml + pw / 2}" y="18" text-anchor="middle">{_esc(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_report(directory, report, x_key: Optional[str] = None, series: Optional[dict] = None):
    """CSV rows, key-value summary and (when there is data) an SVG plot of a RateReport."""
    d = Path(directory)
    paths = [atomic_write(d / f"{report.name}.csv", report.to_csv()),
             atomic_write(d / f"{report.name}_summary.txt", report.summary())]
    if series:
        fits = {}
        for name, data in series.items():
            good = [(x, y) for x, y in data if x > 0 and y > 0]
            if name in report.fits and len(good) >= 2:
                lx = np.log([x for x, _ in good])
                ly = np.log([y for _, y in good])
                slope = report.fits[name][0]
                fits[name] = (slope, float(np.mean(ly - slope * lx)))
        svg = loglog_svg(series, x_key or report.parameter, "error", fits, report.name)
        paths.append(atomic_write(d / f"{report.name}.svg", svg))
    return paths
