"""Reading and writing S-parameter traces and fit reports.

Formats
-------
* CSV with header ``freq_ghz,s21_re,s21_im[,s11_re,s11_im]`` (``#`` lines are comments).
* Touchstone v1 two-port files (``.s2p``): ``!`` comments, one ``#`` option line
  ``# <HZ|KHZ|MHZ|GHZ> S <RI|MA|DB> R <z0>``, then records of nine numbers
  ``f S11 S21 S12 S22`` (angles in degrees).
* Fit reports: ``key = value`` lines, one per parameter, sorted by key.
"""
from __future__ import annotations

import csv
import io
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .network import SParamTrace

__all__ = [
    "TraceFormatError",
    "read_trace",
    "read_csv_trace",
    "write_csv_trace",
    "trace_to_csv",
    "read_touchstone",
    "write_touchstone",
    "format_report",
    "parse_report",
    "atomic_write_text",
]

CSV_HEADER = ("freq_ghz", "s21_re", "s21_im", "s11_re", "s11_im")
_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}


class TraceFormatError(ValueError):
    """The file is not a valid trace in the expected format."""


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file in the same directory and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(value: float) -> str:
    value = float(value)
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return repr(value)


# ---------------------------------------------------------------------------
# CSV


def trace_to_csv(trace: SParamTrace, manifest_line: str | None = None) -> str:
    buf = io.StringIO()
    if manifest_line:
        buf.write(f"# manifest: {manifest_line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    has_s11 = trace.s11 is not None
    writer.writerow(CSV_HEADER if has_s11 else CSV_HEADER[:3])
    for i, f in enumerate(trace.freq):
        row = [_num(f / 1e9), _num(trace.s21[i].real), _num(trace.s21[i].imag)]
        if has_s11:
            row += [_num(trace.s11[i].real), _num(trace.s11[i].imag)]
        writer.writerow(row)
    return buf.getvalue()


def write_csv_trace(path, trace: SParamTrace, manifest_line: str | None = None) -> None:
    atomic_write_text(path, trace_to_csv(trace, manifest_line))


def read_csv_trace(path) -> SParamTrace:
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise TraceFormatError(f"{path}: empty trace file")
    reader = csv.reader(lines)
    header = [h.strip().lower() for h in next(reader)]
    if tuple(header) not in (CSV_HEADER[:3], CSV_HEADER):
        raise TraceFormatError(f"{path}: unexpected header {header}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise TraceFormatError(f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}")
        try:
            rows.append([float(v) for v in row])
        except ValueError as exc:
            raise TraceFormatError(f"{path}: row {lineno}: {exc}") from exc
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    s11 = data[:, 3] + 1j * data[:, 4] if len(header) == 5 else None
    try:
        return SParamTrace(data[:, 0] * 1e9, data[:, 1] + 1j * data[:, 2], s11)
    except ValueError as exc:
        raise TraceFormatError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Touchstone v1


def _parse_option_line(line: str) -> tuple[float, str, float]:
    tokens = line[1:].upper().split()
    unit, fmt, z0 = 1e9, "MA", 50.0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok in _UNITS:
            unit = _UNITS[tok]
        elif tok in ("RI", "MA", "DB"):
            fmt = tok
        elif tok == "S":
            pass
        elif tok in ("Y", "Z", "H", "G"):
            raise TraceFormatError(f"only S-parameter files are supported, got {tok}")
        elif tok == "R":
            i += 1
            if i >= len(tokens):
                raise TraceFormatError("option line ends after R")
            z0 = float(tokens[i])
        else:
            raise TraceFormatError(f"unknown option token {tok!r}")
        i += 1
    return unit, fmt, z0


def _to_complex(a: np.ndarray, b: np.ndarray, fmt: str) -> np.ndarray:
    if fmt == "RI":
        return a + 1j * b
    mag = a if fmt == "MA" else 10.0 ** (a / 20.0)
    return mag * np.exp(1j * np.deg2rad(b))


def read_touchstone(path) -> SParamTrace:
    """Read a two-port Touchstone v1 file; S21 and S11 are kept, reference impedance in ``meta``."""
    option = None
    values: list[float] = []
    with open(path) as fh:
        for line in fh:
            line = line.split("!", 1)[0].strip()
            if not line:
                continue
            if line.startswith("#"):
                if option is None:
                    option = _parse_option_line(line)
                continue
            try:
                values.extend(float(tok) for tok in line.split())
            except ValueError as exc:
                raise TraceFormatError(f"{path}: {exc}") from exc
    if option is None:
        option = (1e9, "MA", 50.0)
    unit, fmt, z0 = option
    if len(values) % 9:
        raise TraceFormatError(f"{path}: data count {len(values)} is not a multiple of 9 (two-port records)")
    data = np.array(values, dtype=float).reshape(-1, 9)
    if data.shape[0] == 0:
        raise TraceFormatError(f"{path}: no data records")
    s11 = _to_complex(data[:, 1], data[:, 2], fmt)
    s21 = _to_complex(data[:, 3], data[:, 4], fmt)
    try:
        return SParamTrace(data[:, 0] * unit, s21, s11, meta={"z0": z0, "format": fmt})
    except ValueError as exc:
        raise TraceFormatError(f"{path}: {exc}") from exc


def write_touchstone(path, trace: SParamTrace, z0: float = 50.0) -> None:
    """Write an RI-format two-port file in Hz, assuming a reciprocal, symmetric device."""
    s11 = trace.s11 if trace.s11 is not None else np.zeros_like(trace.s21)
    lines = ["! two-port S-parameters (S12 = S21, S22 = S11)", f"# HZ S RI R {_num(z0)}"]
    for f, a, b in zip(trace.freq, s11, trace.s21):
        nums = [f, a.real, a.imag, b.real, b.imag, b.real, b.imag, a.real, a.imag]
        lines.append(" ".join(_num(v) for v in nums))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_trace(path) -> SParamTrace:
    """Dispatch on extension: ``.s2p`` -> Touchstone, anything else -> CSV."""
    if str(path).lower().endswith(".s2p"):
        return read_touchstone(path)
    return read_csv_trace(path)


# ---------------------------------------------------------------------------
# key/value reports


def format_report(values: dict, manifest_line: str | None = None) -> str:
    lines = []
    if manifest_line:
        lines.append(f"# manifest: {manifest_line}")
    for key in sorted(values):
        value = values[key]
        if isinstance(value, float):
            value = _num(value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def parse_report(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise TraceFormatError(f"malformed report line {line!r}")
        value = value.strip()
        try:
            out[key.strip()] = float(value)
        except ValueError:
            out[key.strip()] = value
    return out
