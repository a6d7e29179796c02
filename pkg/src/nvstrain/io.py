"""Spectrum CSV and result JSON formats.

Spectrum CSV: header ``nu_ghz,pl`` or ``nu_ghz,pl,sigma``; UTF-8, LF line
endings, ``.`` as decimal separator, frequencies strictly increasing.

Every float written by this module is rounded to 12 significant digits and
printed in shortest round-trip form, so identical inputs give identical bytes.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .spectrum import SpectrumSamples

SIG_DIGITS = 12
SPECTRUM_HEADERS = (("nu_ghz", "pl"), ("nu_ghz", "pl", "sigma"))


class CsvFormatError(ValueError):
    def __init__(self, path, line, message):
        self.path, self.line = str(path), line
        super().__init__(f"{path}:{line}: {message}")


def fmt_float(x: float) -> str:
    return repr(round_sig(x))


def round_sig(x: float) -> float:
    x = float(x)
    if not math.isfinite(x) or x == 0.0:
        return 0.0 if x == 0.0 else x
    return float(f"{x:.{SIG_DIGITS - 1}e}")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = round_sig(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(_clean(doc), sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(path, doc: dict) -> None:
    Path(path).write_text(dumps(doc), encoding="utf-8", newline="\n")


def read_json(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def read_spectrum_csv(path) -> SpectrumSamples:
    """Parse a spectrum CSV; errors name the offending line."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise CsvFormatError(path, 0, f"not UTF-8 ({exc.reason})") from None
    lines = text.split("\n")
    header = tuple(h.strip() for h in lines[0].strip().split(","))
    if header not in SPECTRUM_HEADERS:
        raise CsvFormatError(path, 1, f"header must be 'nu_ghz,pl' or 'nu_ghz,pl,sigma', got {lines[0]!r}")
    ncol = len(header)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.strip().split(",")
        if len(fields) != ncol:
            raise CsvFormatError(path, lineno, f"expected {ncol} columns, got {len(fields)}")
        try:
            vals = [float(f) for f in fields]
        except ValueError:
            raise CsvFormatError(path, lineno, f"non-numeric value in {line.strip()!r}") from None
        if not all(math.isfinite(v) for v in vals):
            raise CsvFormatError(path, lineno, "non-finite value")
        if rows and vals[0] <= rows[-1][1][0]:
            raise CsvFormatError(path, lineno, "frequencies must be strictly increasing")
        if ncol == 3 and vals[2] <= 0:
            raise CsvFormatError(path, lineno, "sigma must be positive")
        rows.append((lineno, vals))
    if not rows:
        raise CsvFormatError(path, 2, "no data rows")
    data = np.array([v for _, v in rows])
    sigma = data[:, 2] if ncol == 3 else None
    return SpectrumSamples(data[:, 0], data[:, 1], sigma)


def spectrum_csv_text(samples: SpectrumSamples) -> str:
    cols = [samples.nu, samples.pl]
    header = "nu_ghz,pl"
    if samples.sigma is not None:
        cols.append(samples.sigma)
        header += ",sigma"
    body = "\n".join(",".join(fmt_float(v) for v in row) for row in zip(*cols))
    return header + "\n" + body + "\n"


def write_spectrum_csv(path, samples: SpectrumSamples) -> None:
    Path(path).write_text(spectrum_csv_text(samples), encoding="utf-8", newline="\n")


def samples_to_json(samples: SpectrumSamples) -> dict:
    d = {"nu_ghz": samples.nu, "pl": samples.pl}
    if samples.sigma is not None:
        d["sigma"] = samples.sigma
    return d


def write_table_csv(path, header: tuple[str, ...], rows) -> None:
    lines = [",".join(header)]
    lines += [",".join(fmt_float(v) for v in row) for row in rows]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
