"""Self-contained SVG renderers for the campaign CSV families.

No plotting dependency: charts are assembled from line/scatter primitives with
fixed formatting, so identical input bytes yield identical SVG bytes.
"""

from __future__ import annotations

import math
from pathlib import Path

from .experiments import CSV_VERSION_LINE

WIDTH, HEIGHT = 640, 420
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 30, 50

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
           "#e377c2", "#7f7f7f"]


class CsvFormatError(ValueError):
    pass


def _parse_csv(path) -> tuple[list[str], list[list[str]]]:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines or lines[0].strip() != CSV_VERSION_LINE:
        raise CsvFormatError(f"line 1: expected '{CSV_VERSION_LINE}' header")
    if len(lines) < 2:
        raise CsvFormatError("line 2: missing column header")
    header = [h.strip() for h in lines[1].split(",")]
    rows = []
    for i, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != len(header):
            raise CsvFormatError(
                f"line {i}: expected {len(header)} fields, found {len(cells)}")
        rows.append(cells)
    return header, rows


def _f(cell: str, line_no: int, col: str) -> float:
    try:
        return float(cell)
    except ValueError as exc:
        raise CsvFormatError(f"line {line_no}: bad float in {col}: {cell!r}") from exc


def _series_by_method(header, rows, x_col, y_col):
    xi, yi = header.index(x_col), header.index(y_col)
    mi = header.index("method")
    series: dict[str, list[tuple[float, float]]] = {}
    for n, row in enumerate(rows, start=3):
        x = _f(row[xi], n, x_col)
        y = _f(row[yi], n, y_col)
        if math.isnan(y):
            continue
        series.setdefault(row[mi], []).append((x, y))
    return series


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    start = math.ceil(lo / step) * step
    ticks = []
    t = start
    while t <= hi + 1e-12 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _render(series: dict, title: str, x_label: str, y_label: str,
            log_y: bool, scatter: bool = False) -> str:
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]
    x0, x1 = MARGIN_L, WIDTH - MARGIN_R
    y0, y1 = HEIGHT - MARGIN_B, MARGIN_T
    parts.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
                 f'fill="none" stroke="black"/>')

    points = [pt for pts in series.values() for pt in pts]
    if not points:
        parts.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{(y0 + y1) / 2:.1f}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="13" fill="#888">no data</text>')
        parts.append(_axis_labels(x_label, y_label))
        parts.append("</svg>")
        return "\n".join(parts)

    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    if log_y:
        ys = [math.log10(max(y, 1e-300)) for y in ys]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    def px(x: float) -> float:
        return x0 + (x - x_lo) / (x_hi - x_lo) * (x1 - x0)

    def py(y: float) -> float:
        return y0 - (y - y_lo) / (y_hi - y_lo) * (y0 - y1)

    for t in _ticks(x_lo, x_hi):
        parts.append(f'<line x1="{px(t):.2f}" y1="{y0}" x2="{px(t):.2f}" '
                     f'y2="{y0 + 5}" stroke="black"/>')
        parts.append(f'<text x="{px(t):.2f}" y="{y0 + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{t:g}</text>')
    for t in _ticks(y_lo, y_hi):
        label = f"1e{t:g}" if log_y else f"{t:g}"
        parts.append(f'<line x1="{x0 - 5}" y1="{py(t):.2f}" x2="{x0}" '
                     f'y2="{py(t):.2f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8}" y="{py(t) + 4:.2f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{label}</text>')

    for idx, (name, pts) in enumerate(sorted(series.items())):
        color = PALETTE[idx % len(PALETTE)]
        vals = [(p[0], math.log10(max(p[1], 1e-300)) if log_y else p[1])
                for p in sorted(pts)]
        if scatter or len(vals) == 1:
            for x, y in vals:
                parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" '
                             f'fill="{color}"/>')
        else:
            path = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in vals)
            parts.append(f'<polyline points="{path}" fill="none" '
                         f'stroke="{color}" stroke-width="1.5"/>')
        ly = MARGIN_T + 16 * idx + 12
        parts.append(f'<line x1="{x1 - 110}" y1="{ly - 4}" x2="{x1 - 90}" '
                     f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{x1 - 85}" y="{ly}" font-family="sans-serif" '
                     f'font-size="11">{name}</text>')

    parts.append(_axis_labels(x_label, y_label))
    parts.append("</svg>")
    return "\n".join(parts)


def _axis_labels(x_label: str, y_label: str) -> str:
    cx = (MARGIN_L + WIDTH - MARGIN_R) / 2
    cy = (MARGIN_T + HEIGHT - MARGIN_B) / 2
    return (f'<text x="{cx:.1f}" y="{HEIGHT - 12}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12">{x_label}</text>\n'
            f'<text x="16" y="{cy:.1f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 16 {cy:.1f})">{y_label}</text>')


def emit_plots(csv_path, out_dir=None) -> list[Path]:
    """Render the chart family matching the CSV schema; returns SVG paths."""
    csv_path = Path(csv_path)
    out_dir = Path(out_dir) if out_dir is not None else csv_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    header, rows = _parse_csv(csv_path)
    stem = csv_path.stem
    outputs: list[Path] = []

    def write(name: str, svg: str) -> None:
        path = out_dir / name
        path.write_text(svg, encoding="utf-8")
        outputs.append(path)

    if "theta_deg" in header:
        write(f"{stem}_power.svg",
              _render(_series_by_method(header, rows, "theta_deg", "p_tx_mw"),
                      "Transmit power vs user angle", "theta [deg]",
                      "log10 P_Tx [mW]", log_y=True))
        write(f"{stem}_ratio.svg",
              _render(_series_by_method(header, rows, "theta_deg", "ratio_to_fd"),
                      "Transmit power relative to FD", "theta [deg]",
                      "P_Tx / P_Tx(FD)", log_y=False))
    elif "delta_db" in header:
        write(f"{stem}.svg",
              _render(_series_by_method(header, rows, "delta_db", "mean_p_tx_mw"),
                      "Mean transmit power vs SINR floor", "delta [dB]",
                      "log10 mean P_Tx [mW]", log_y=True))
    elif "realization" in header:
        write(f"{stem}.svg",
              _render(_series_by_method(header, rows, "realization", "p_tx_mw"),
                      "Per-realization transmit power", "realization",
                      "log10 P_Tx [mW]", log_y=True, scatter=True))
    elif "n_users" in header:
        write(f"{stem}.svg",
              _render(_series_by_method(header, rows, "n_users", "mean_p_tx_mw"),
                      "Mean transmit power vs user count", "users K",
                      "log10 mean P_Tx [mW]", log_y=True))
    elif "dx_over_lambda" in header:
        write(f"{stem}.svg",
              _render(_series_by_method(header, rows, "dx_over_lambda",
                                        "mean_p_tx_mw"),
                      "Mean transmit power vs element spacing", "d_x / lambda",
                      "log10 mean P_Tx [mW]", log_y=True))
    else:
        raise CsvFormatError("line 2: unrecognized column set "
                             f"{header!r} for plotting")
    return outputs
