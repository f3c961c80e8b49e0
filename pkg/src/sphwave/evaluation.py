"""Sweeps, summary tables and crosstalk for encoding/decoding pipelines."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import sphere
from .decoderopt import (
    DecodingMatrix,
    SwfFormat,
    observables,
    observables_from_signals,
    speaker_signals,
)

DB_FLOOR = -120.0
SUMMARY_ROWS = ("E_dB", "IR", "IT", "IT_deg", "vR", "vT", "vT_deg")


@dataclass
class SweepReport:
    angles: np.ndarray  # radians along the ring
    directions: np.ndarray
    speaker_names: list
    gains: np.ndarray  # directions x speakers
    P: np.ndarray
    E: np.ndarray
    vR: np.ndarray
    vT: np.ndarray
    IR: np.ndarray
    IT: np.ndarray

    @property
    def E_dB(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.maximum(10.0 * np.log10(self.E), DB_FLOOR)

    @property
    def IT_deg(self) -> np.ndarray:
        return np.degrees(np.arcsin(np.clip(self.IT, 0.0, 1.0)))

    @property
    def vT_deg(self) -> np.ndarray:
        return np.degrees(np.arcsin(np.clip(self.vT, 0.0, 1.0)))

    def column(self, name) -> np.ndarray:
        return getattr(self, name)


def sweep(fmt=None, decoder: DecodingMatrix | None = None, plane: str = "horizontal",
          n: int = 360) -> SweepReport:
    """Observables for a source travelling along a great circle.

    Without a decoder, the channels of an SWF format are rendered on virtual
    speakers placed at the vertices of its truncation level.
    """
    if n < 4:
        raise ValueError("a sweep needs at least 4 directions")
    if plane not in ("horizontal", "vertical"):
        raise ValueError(f"unknown plane {plane!r}")
    dirs = sphere.sample_vectors(n, f"{plane}_ring")
    if decoder is not None:
        S = speaker_signals(decoder, dirs)
        U = decoder.layout.vectors
        names = list(decoder.layout.names)
    else:
        if not isinstance(fmt, SwfFormat):
            raise ValueError("a sweep without a decoder needs an SWF format")
        S = fmt.encode(dirs).T
        U = fmt.channel_vectors
        names = [f"v{i}" for i in range(len(U))]
    o = observables_from_signals(S, U, dirs)
    return SweepReport(sphere.ring_angles(n), dirs, names, S, o.P, o.E, o.vR, o.vT, o.IR, o.IT)


def summarize(report: SweepReport) -> dict:
    """avg/max/min per observable, plus the energy spread ΔE."""
    out = {}
    for name in SUMMARY_ROWS:
        col = report.column(name)
        out[name] = {"avg": float(np.mean(col)), "max": float(np.max(col)),
                     "min": float(np.min(col))}
    out["E_dB"]["delta"] = out["E_dB"]["max"] - out["E_dB"]["min"]
    return out


def crosstalk(D: DecodingMatrix) -> np.ndarray:
    """Energy of all other speakers relative to the target speaker, in dB, per speaker.

    A silent target speaker yields +inf.
    """
    S = speaker_signals(D, D.layout.vectors)
    out = np.empty(len(D.layout))
    for k in range(len(D.layout)):
        own = S[k, k] ** 2
        rest = (S[k] ** 2).sum() - own
        if own == 0.0:
            out[k] = math.inf
        elif rest == 0.0:
            out[k] = -math.inf
        else:
            out[k] = 10.0 * math.log10(rest / own)
    return out


def write_sweep_csv(report: SweepReport, path) -> None:
    header = ["angle_deg", "P", "E_dB", "vR", "vT", "vT_deg", "IR", "IT", "IT_deg"]
    header += [f"g_{n}" for n in report.speaker_names]
    cols = [np.degrees(report.angles), report.P, report.E_dB, report.vR, report.vT,
            report.vT_deg, report.IR, report.IT, report.IT_deg]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for j in range(len(report.angles)):
            row = [c[j] for c in cols] + list(report.gains[j])
            w.writerow([_fmt(x) for x in row])


def write_summary_csv(summary: dict, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["observable", "avg", "max", "min"])
        for name in SUMMARY_ROWS:
            s = summary[name]
            w.writerow([name, _fmt(s["avg"]), _fmt(s["max"]), _fmt(s["min"])])
        w.writerow(["delta_E_dB", _fmt(summary["E_dB"]["delta"]), "", ""])


def write_crosstalk_csv(names, values, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["speaker", "crosstalk_dB"])
        for n, v in zip(names, values):
            w.writerow([n, _fmt(v)])


def _fmt(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.17g}"


def format_summary(summary: dict) -> str:
    """Plain-text table avg (max / min) per observable."""
    lines = [f"{'observable':<10} {'avg':>9} {'max':>9} {'min':>9}"]
    for name in SUMMARY_ROWS:
        s = summary[name]
        lines.append(f"{name:<10} {s['avg']:>9.3f} {s['max']:>9.3f} {s['min']:>9.3f}")
    lines.append(f"{'delta_E':<10} {summary['E_dB']['delta']:>9.3f}")
    return "\n".join(lines)
