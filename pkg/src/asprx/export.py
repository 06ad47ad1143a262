"""Deterministic CSV/JSON/SVG writers; every file opens with a provenance header."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import __version__

TOOL = "asprx"


@dataclass(frozen=True)
class Provenance:
    scenario: str
    seed: int
    config_hash: str
    tool_version: str = __version__

    def lines(self) -> list[str]:
        return [
            f"tool={TOOL} {self.tool_version}",
            f"scenario={self.scenario}",
            f"seed={self.seed}",
            f"config_hash={self.config_hash}",
        ]

    def as_dict(self) -> dict:
        return {"tool": TOOL, "tool_version": self.tool_version, "scenario": self.scenario,
                "seed": self.seed, "config_hash": self.config_hash}


def fmt(x: float) -> str:
    """Float with 9 significant digits; integers and non-finite values kept readable."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def _json_ready(value):
    if isinstance(value, dict):
        return {k: _json_ready(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_ready(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        x = float(value)
        if not math.isfinite(x):
            return fmt(x)
        return float(fmt(x))
    return value


def write_csv(path: Path, prov: Provenance, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for line in prov.lines():
            fh.write(f"# {line}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")
    return path


def write_json(path: Path, prov: Provenance, payload: dict) -> Path:
    doc = {"provenance": prov.as_dict(), **_json_ready(payload)}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return path


# ---------------------------------------------------------------- SVG


_W, _H, _M = 480, 360, 48


def _scale(v: np.ndarray, lo: float, hi: float, a: float, b: float) -> np.ndarray:
    span = hi - lo if hi > lo else 1.0
    return a + (v - lo) / span * (b - a)


def _frame(prov: Provenance, title: str, xlabel: str, ylabel: str, xr, yr) -> list[str]:
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        "<!-- " + "; ".join(prov.lines()) + " -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" viewBox="0 0 {_W} {_H}">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<rect x="{_M}" y="{_M // 2}" width="{_W - 1.5 * _M:g}" height="{_H - 1.5 * _M:g}" '
        'fill="none" stroke="black" stroke-width="1"/>',
        f'<text x="{_W / 2:g}" y="16" text-anchor="middle" font-size="13" font-family="sans-serif">{title}</text>',
        f'<text x="{_W / 2:g}" y="{_H - 6}" text-anchor="middle" font-size="11" font-family="sans-serif">{xlabel}</text>',
        f'<text x="12" y="{_H / 2:g}" text-anchor="middle" font-size="11" font-family="sans-serif" '
        f'transform="rotate(-90 12 {_H / 2:g})">{ylabel}</text>',
        f'<text x="{_M}" y="{_H - _M + 14}" font-size="9" font-family="sans-serif">{fmt(xr[0])}</text>',
        f'<text x="{_W - _M // 2}" y="{_H - _M + 14}" text-anchor="end" font-size="9" font-family="sans-serif">{fmt(xr[1])}</text>',
        f'<text x="{_M - 3}" y="{_H - _M}" text-anchor="end" font-size="9" font-family="sans-serif">{fmt(yr[0])}</text>',
        f'<text x="{_M - 3}" y="{_M // 2 + 8}" text-anchor="end" font-size="9" font-family="sans-serif">{fmt(yr[1])}</text>',
    ]
    return out


def _limits(v: np.ndarray, symmetric: bool = False) -> tuple[float, float]:
    v = v[np.isfinite(v)]
    if v.size == 0:
        return -1.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if symmetric:
        m = max(abs(lo), abs(hi)) or 1.0
        return -1.05 * m, 1.05 * m
    pad = 0.05 * (hi - lo or 1.0)
    return lo - pad, hi + pad


def _xy(x, y, xr, yr):
    px = _scale(np.asarray(x, float), *xr, _M, _W - _M / 2)
    py = _scale(np.asarray(y, float), *yr, _H - _M, _M / 2)
    return px, py


def svg_scatter(path: Path, prov: Provenance, x, y, title: str, xlabel: str, ylabel: str,
                symmetric: bool = False, max_points: int = 4000) -> Path:
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.size > max_points:
        idx = np.linspace(0, x.size - 1, max_points).astype(int)
        x, y = x[idx], y[idx]
    if symmetric:
        m = max(_limits(x, True)[1], _limits(y, True)[1])
        xr = yr = (-m, m)
    else:
        xr, yr = _limits(x), _limits(y)
    out = _frame(prov, title, xlabel, ylabel, xr, yr)
    px, py = _xy(x, y, xr, yr)
    out += [f'<circle cx="{a:.2f}" cy="{b:.2f}" r="1.2" fill="#1f4e9c" fill-opacity="0.5"/>'
            for a, b in zip(px, py)]
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


def svg_lines(path: Path, prov: Provenance, x, ys: Sequence, title: str, xlabel: str, ylabel: str,
              max_points: int = 2000) -> Path:
    """One polyline per entry of ``ys`` (all sharing ``x``)."""
    x = np.asarray(x, float)
    ys = [np.asarray(y, float) for y in ys]
    xr = _limits(x)
    yr = _limits(np.concatenate(ys)) if ys else (-1.0, 1.0)
    out = _frame(prov, title, xlabel, ylabel, xr, yr)
    colors = ("#1f4e9c", "#c0392b", "#27ae60", "#8e44ad")
    for i, y in enumerate(ys):
        idx = np.arange(x.size)
        if x.size > max_points:
            idx = np.linspace(0, x.size - 1, max_points).astype(int)
        px, py = _xy(x[idx], y[idx], xr, yr)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{colors[i % 4]}" stroke-width="1"/>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


def svg_eye(path: Path, prov: Provenance, waveform, sps: int, title: str, n_traces: int = 300) -> Path:
    """Overlay of two-symbol traces."""
    w = np.asarray(waveform, float)
    span = 2 * sps
    n = min(n_traces, (w.size - 1) // sps - 1)
    t = np.arange(span + 1) / sps
    yr = _limits(w[: (n + 2) * sps], symmetric=True)
    xr = (0.0, 2.0)
    out = _frame(prov, title, "time (symbols)", "amplitude (V)", xr, yr)
    for k in range(max(n, 0)):
        seg = w[k * sps : k * sps + span + 1]
        px, py = _xy(t[: seg.size], seg, xr, yr)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
        out.append(f'<polyline points="{pts}" fill="none" stroke="#1f4e9c" stroke-opacity="0.15" stroke-width="1"/>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path
