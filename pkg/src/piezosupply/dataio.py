"""CSV ingestion of measured sweeps and CSV/SVG emission of curves and traces."""
from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from .errors import DataError
from .harvester import GRAM
from .sweeps import AbscissaKind, SweepCurve, ValueKind
from .transient import POWER_CHANNELS, Trace

# header -> (abscissa kind, value kind, file units per SI unit)
SCHEMAS = {
    ("frequency_hz", "voltage_v"): (AbscissaKind.FREQUENCY_HZ, ValueKind.VOLT_AMPLITUDE, 1.0),
    ("frequency_hz", "power_w"): (AbscissaKind.FREQUENCY_HZ, ValueKind.AVG_POWER, 1.0),
    ("resistance_ohm", "power_w"): (AbscissaKind.RESISTANCE_OHM, ValueKind.AVG_POWER, 1.0),
    ("tip_mass_g", "frequency_hz"): (AbscissaKind.TIP_MASS_KG, ValueKind.RESONANT_FREQ, 1000.0),
}
_HEADERS = {(a, v): header for header, (a, v, _) in SCHEMAS.items()}

AXIS_LABELS = {
    AbscissaKind.FREQUENCY_HZ: "Frequency [Hz]",
    AbscissaKind.RESISTANCE_OHM: "Load resistance [Ohm]",
    AbscissaKind.TIP_MASS_KG: "Tip mass [g]",
    ValueKind.VOLT_AMPLITUDE: "Voltage amplitude [V]",
    ValueKind.AVG_POWER: "Average power [W]",
    ValueKind.RESONANT_FREQ: "Resonant frequency [Hz]",
}


class CsvFormatError(DataError):
    pass


@dataclass(frozen=True, eq=False)
class MeasuredSweep:
    """A sweep curve plus free-text provenance from ``# key: value`` lines."""

    curve: SweepCurve
    metadata: Mapping[str, str] = field(default_factory=dict)

    @property
    def device(self) -> Optional[str]:
        return self.metadata.get("device")

    @property
    def tip_mass(self) -> Optional[float]:
        """Tip mass in kg, if the file records ``tip_mass_g``."""
        value = self.metadata.get("tip_mass_g")
        return None if value is None else float(value) * GRAM


def _fmt(value: float) -> str:
    return f"{value:.9g}"


def parse_sweep_csv(stream) -> MeasuredSweep:
    """Read one of the fixed two-column sweep schemas.

    Lines starting with ``#`` before the header carry metadata.  Rows out
    of abscissa order are sorted with a warning.
    """
    text = stream.read() if hasattr(stream, "read") else str(stream)
    metadata = {}
    lines = text.splitlines()
    start = 0
    while start < len(lines) and (not lines[start].strip() or lines[start].lstrip().startswith("#")):
        body = lines[start].strip().lstrip("#").strip()
        if ":" in body:
            key, value = body.split(":", 1)
            metadata[key.strip()] = value.strip()
        start += 1
    if start >= len(lines):
        raise CsvFormatError("missing header row")
    header = tuple(cell.strip() for cell in next(csv.reader([lines[start]])))
    if header not in SCHEMAS:
        known = "; ".join(",".join(h) for h in SCHEMAS)
        raise CsvFormatError(f"unrecognised header {','.join(header)!r}; expected one of: {known}")
    abscissa_kind, value_kind, scale = SCHEMAS[header]

    xs, ys = [], []
    for rowno, row in enumerate(csv.reader(lines[start + 1:]), start=start + 2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != 2:
            raise CsvFormatError(f"row {rowno}: expected 2 cells, got {len(row)}")
        try:
            x, y = float(row[0]), float(row[1])
        except ValueError:
            raise CsvFormatError(f"row {rowno}: non-numeric cell in {row!r}") from None
        if not (np.isfinite(x) and np.isfinite(y)):
            raise CsvFormatError(f"row {rowno}: non-finite value")
        xs.append(x)
        ys.append(y)
    if not xs:
        raise CsvFormatError("no data rows")
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    if order != list(range(len(xs))):
        warnings.warn("sweep rows were not in abscissa order; sorted", stacklevel=2)
    xs = [xs[i] for i in order]
    ys = [ys[i] for i in order]
    for a, b in zip(xs, xs[1:]):
        if a == b:
            raise CsvFormatError(f"duplicate abscissa value {a!r}")
    curve = SweepCurve(abscissa_kind, value_kind, [x / scale for x in xs], ys)
    return MeasuredSweep(curve, metadata)


def _file_abscissa(curve: SweepCurve):
    scale = 1000.0 if curve.abscissa_kind is AbscissaKind.TIP_MASS_KG else 1.0
    return [x * scale for x in curve.abscissa.tolist()]


def emit_curve(curve: SweepCurve, format: str = "csv",
               metadata: Optional[Mapping[str, str]] = None) -> str:
    """Render a curve as CSV (9 significant digits) or as an SVG line plot."""
    if curve is None or len(curve) == 0:
        raise ValueError("cannot emit an empty curve")
    if format == "csv":
        header = _HEADERS[(curve.abscissa_kind, curve.value_kind)]
        out = [f"# {k}: {v}" for k, v in (metadata or {}).items()]
        out.append(",".join(header))
        for x, y in zip(_file_abscissa(curve), curve.values.tolist()):
            out.append(f"{_fmt(x)},{_fmt(y)}")
        return "\n".join(out) + "\n"
    if format == "svg":
        return svg_plot(_file_abscissa(curve), curve.values.tolist(),
                        AXIS_LABELS[curve.abscissa_kind], AXIS_LABELS[curve.value_kind],
                        comment=_comment(metadata))
    raise ValueError(f"unknown format {format!r}; use csv or svg")


def _comment(metadata):
    if not metadata:
        return None
    return "; ".join(f"{k}: {v}" for k, v in metadata.items())


def _ticks(lo, hi, n=5):
    return [lo + (hi - lo) * i / (n - 1) for i in range(n)]


def _span(values):
    lo, hi = min(values), max(values)
    if lo == hi:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    return lo, hi


def svg_plot(xs, ys, xlabel: str, ylabel: str, comment: Optional[str] = None) -> str:
    """Single-series line plot on linear axes in a fixed 800x600 viewBox."""
    width, height = 800, 600
    left, right, top, bottom = 100, 40, 30, 70
    pw, ph = width - left - right, height - top - bottom
    x0, x1 = _span(xs)
    y0, y1 = _span(ys)

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{width}" height="{height}" font-family="sans-serif" font-size="12">',
    ]
    if comment:
        parts.append(f"<!-- {comment.replace('--', '- -')} -->")
    parts.append(f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" '
                 'fill="none" stroke="black"/>')
    for t in _ticks(x0, x1):
        x = px(t)
        parts.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        parts.append(f'<text x="{x:.2f}" y="{top + ph + 20}" text-anchor="middle">{t:.4g}</text>')
    for t in _ticks(y0, y1):
        y = py(t)
        parts.append(f'<line x1="{left - 5}" y1="{y:.2f}" x2="{left}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{left - 8}" y="{y + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 20}" text-anchor="middle">{_escape(xlabel)}</text>')
    parts.append(f'<text x="25" y="{top + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 25 {top + ph / 2:.1f})">{_escape(ylabel)}</text>')
    points = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys))
    parts.append(f'<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{points}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _escape(text):
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


TRACE_COLUMNS = ("t_s", "x_m", "xdot_m_s", "v_piezo_v", "v_input_cap_v", "v_output_v",
                 "mode") + tuple(f"{name}_w" for name in POWER_CHANNELS) + ("e_stored_j",)


def emit_trace(trace: Trace, format: str = "csv",
               metadata: Optional[Mapping[str, str]] = None) -> str:
    """Export a transient trace: every channel as CSV, or load voltage as SVG."""
    if len(trace) == 0:
        raise ValueError("cannot emit an empty trace")
    if format == "svg":
        return svg_plot(trace.t.tolist(), trace.v_load.tolist(), "Time [s]",
                        "Load voltage [V]", comment=_comment(metadata))
    if format != "csv":
        raise ValueError(f"unknown format {format!r}; use csv or svg")
    buf = io.StringIO()
    for k, v in (metadata or {}).items():
        buf.write(f"# {k}: {v}\n")
    buf.write(",".join(TRACE_COLUMNS) + "\n")
    columns = [trace.t, trace.x, trace.xdot, trace.v_piezo, trace.v_input_cap,
               trace.v_output, trace.mode] + [getattr(trace, n) for n in POWER_CHANNELS] + [trace.e_stored]
    for row in zip(*(c.tolist() for c in columns)):
        buf.write(",".join(str(v) if isinstance(v, int) else _fmt(v) for v in row) + "\n")
    return buf.getvalue()
