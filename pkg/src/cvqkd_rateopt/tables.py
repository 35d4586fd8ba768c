"""CSV readers and writers for sample, sweep and comparison tables."""

from __future__ import annotations

import csv
import math

from .optimizer import Comparison, OptimumPoint
from .sim import FerSample, snr_to_db

__all__ = [
    "SAMPLE_COLUMNS",
    "SWEEP_COLUMNS",
    "COMPARISON_COLUMNS",
    "TableError",
    "write_samples",
    "read_samples",
    "write_sweep",
    "read_sweep",
    "write_comparison",
    "read_comparison",
]

SAMPLE_COLUMNS = ("rate", "s_linear", "s_db", "frames", "errors", "fer", "ci_low", "ci_high", "seed")
SWEEP_COLUMNS = ("d_km", "v_a_star", "beta_star", "s_linear", "rate", "fer", "skr", "feasible")
COMPARISON_COLUMNS = SWEEP_COLUMNS + ("skr_baseline", "improvement")


class TableError(ValueError):
    pass


def _f(x: float) -> str:
    # repr round-trips exactly; inf/nan spelled the way float() reads them
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read(path, header):
    with open(path, newline="", encoding="utf-8") as fh:
        rd = csv.reader(fh)
        try:
            got = tuple(next(rd))
        except StopIteration:
            raise TableError(f"{path}: empty file") from None
        if got != tuple(header):
            raise TableError(f"{path}: expected header {','.join(header)}, got {','.join(got)}")
        return [dict(zip(header, row)) for row in rd if row]


def write_samples(path, samples) -> None:
    _write(path, SAMPLE_COLUMNS, (
        (_f(x.rate), _f(x.s), _f(snr_to_db(x.s)), x.frames, x.frame_errors, _f(x.fer), _f(x.ci_low), _f(x.ci_high), x.seed)
        for x in samples
    ))


def read_samples(path) -> list[FerSample]:
    out = []
    for i, row in enumerate(_read(path, SAMPLE_COLUMNS), start=2):
        try:
            out.append(FerSample(float(row["s_linear"]), float(row["rate"]), int(row["frames"]), int(row["errors"]), int(row["seed"])))
        except ValueError as e:
            raise TableError(f"{path}:{i}: {e}") from None
    return out


def _sweep_cells(p: OptimumPoint):
    return (_f(p.d_km), _f(p.v_a_star), _f(p.beta_star), _f(p.s), _f(p.rate), _f(p.fer), _f(p.skr), int(p.feasible))


def _sweep_row(row) -> OptimumPoint:
    return OptimumPoint(*(float(row[c]) for c in SWEEP_COLUMNS[:-1]), bool(int(row["feasible"])))


def write_sweep(path, points) -> None:
    _write(path, SWEEP_COLUMNS, (_sweep_cells(p) for p in points))


def read_sweep(path) -> list[OptimumPoint]:
    return [_sweep_row(r) for r in _read(path, SWEEP_COLUMNS)]


def write_comparison(path, rows) -> None:
    _write(path, COMPARISON_COLUMNS, (_sweep_cells(c.joint) + (_f(c.skr_baseline), _f(c.improvement)) for c in rows))


def read_comparison(path) -> list[Comparison]:
    return [
        Comparison(_sweep_row(r), math.nan, float(r["skr_baseline"]), float(r["improvement"]))
        for r in _read(path, COMPARISON_COLUMNS)
    ]
