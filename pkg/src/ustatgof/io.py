"""CSV ingestion and emission for counts, samples, distributions and weights.

Formats (bins are 1-indexed and must cover ``1..d`` exactly once):

* counts: header ``bin,count``, non-negative integer counts;
* samples: header ``obs,bin``, one row per observation;
* distributions and weights: header ``bin,value``, values printed with 17
  significant digits so they reload bit-for-bit.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .distributions import SIMPLEX_TOL, CountVector, ProbVector, WeightVector
from .errors import ParseError, UStatError
from .statistics import SampleList

LOAD_TOL = 1e-6


def _read_rows(path, header):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ParseError(f"{path}: cannot read ({exc.strerror})") from None
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != list(header):
        raise ParseError(f"{path}: expected header {','.join(header)!r}")
    body = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {lineno}: expected {len(header)} fields, got {len(row)}")
        body.append((lineno, [c.strip() for c in row]))
    if not body:
        raise ParseError(f"{path}: no data rows")
    return body


def _int(path, lineno, text, what):
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"{path}: row {lineno}: {what} {text!r} is not an integer") from None


def _float(path, lineno, text):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"{path}: row {lineno}: value {text!r} is not a number") from None
    if not math.isfinite(v):
        raise ParseError(f"{path}: row {lineno}: value {text!r} is not finite")
    return v


def _by_bin(path, body, parse_value):
    seen = {}
    for lineno, (b, v) in body:
        bin_ = _int(path, lineno, b, "bin")
        if bin_ < 1:
            raise ParseError(f"{path}: row {lineno}: bin {bin_} must be >= 1")
        if bin_ in seen:
            raise ParseError(f"{path}: row {lineno}: duplicate bin {bin_} (first at row {seen[bin_][0]})")
        seen[bin_] = (lineno, parse_value(path, lineno, v))
    d = len(seen)
    for b in range(1, d + 1):
        if b not in seen:
            raise ParseError(f"{path}: missing bin {b}")
    return [seen[b][1] for b in range(1, d + 1)], [seen[b][0] for b in range(1, d + 1)]


def load_counts(path) -> CountVector:
    def count(path, lineno, text):
        c = _int(path, lineno, text, "count")
        if c < 0:
            raise ParseError(f"{path}: row {lineno}: negative count {c}")
        return c

    values, _ = _by_bin(path, _read_rows(path, ("bin", "count")), count)
    try:
        return CountVector(np.array(values, dtype=np.int64))
    except UStatError as exc:
        raise ParseError(f"{path}: {exc}") from None


def load_dist(path) -> ProbVector:
    """Read a distribution; raw sums within 1e-6 of one are renormalized."""
    values, lines = _by_bin(path, _read_rows(path, ("bin", "value")), _float)
    for v, lineno in zip(values, lines):
        if v < 0:
            raise ParseError(f"{path}: row {lineno}: negative probability {v!r}")
    arr = np.array(values, dtype=np.float64)
    total = math.fsum(arr)
    if abs(total - 1.0) > LOAD_TOL:
        raise ParseError(f"{path}: values sum to {total:.17g}, not within {LOAD_TOL:g} of 1")
    if abs(total - 1.0) <= SIMPLEX_TOL:
        return ProbVector(arr)
    return ProbVector.from_values(arr)


def load_weight(path) -> WeightVector:
    values, lines = _by_bin(path, _read_rows(path, ("bin", "value")), _float)
    for v, lineno in zip(values, lines):
        if v <= 0:
            raise ParseError(f"{path}: row {lineno}: weight {v!r} must be positive")
    return WeightVector(np.array(values, dtype=np.float64), kind="custom")


def load_samples(path, d: int | None = None) -> SampleList:
    body = _read_rows(path, ("obs", "bin"))
    bins = []
    for lineno, (obs, b) in body:
        _int(path, lineno, obs, "obs")
        bin_ = _int(path, lineno, b, "bin")
        if bin_ < 1:
            raise ParseError(f"{path}: row {lineno}: bin {bin_} must be >= 1")
        bins.append(bin_)
    return SampleList(tuple(bins), d if d is not None else max(bins))


def _write(path, header, rows):
    text = ",".join(header) + "\n" + "".join(f"{a},{b}\n" for a, b in rows)
    if path is None:
        return text
    Path(path).write_text(text)
    return text


def write_vector(path, values) -> str:
    """Write ``bin,value`` rows; returns the text."""
    return _write(path, ("bin", "value"), ((i, format(float(v), ".17g")) for i, v in enumerate(values, 1)))


def write_dist(path, pi: ProbVector) -> str:
    return write_vector(path, pi.values)


def write_weight(path, w: WeightVector) -> str:
    return write_vector(path, w.w)


def write_counts(path, counts: CountVector) -> str:
    return _write(path, ("bin", "count"), ((i, int(c)) for i, c in enumerate(counts.counts, 1)))


def write_samples(path, samples: SampleList) -> str:
    return _write(path, ("obs", "bin"), ((i, b) for i, b in enumerate(samples.bins, 1)))
