"""Workload trace ingestion: CSV loading, cleaning, feature extraction, synthesis."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .datacenter import Instance, PmSpec, VmSpec
from .errors import DataError, LiteralSyntaxError
from .literal import parse_literal, render_literal

SOURCE_COLUMNS = (
    "requested_cpus",
    "requested_memory",
    "avg_cpus",
    "avg_memory",
    "cpu_usage_mean",
    "memory_usage_mean",
    "duration",
)
FEATURE_COLUMNS = SOURCE_COLUMNS + ("cpu_utilization_ratio", "cpu_peak_ratio", "memory_peak_ratio")

# Nested Google-trace columns and where their keys land among SOURCE_COLUMNS.
GOOGLE_FIELD_MAP = {
    "resource_request": {"cpus": "requested_cpus", "memory": "requested_memory"},
    "maximum_usage": {"cpus": "avg_cpus", "memory": "avg_memory"},
    "average_usage": {"cpus": "cpu_usage_mean", "memory": "memory_usage_mean"},
}


@dataclass(frozen=True)
class RawTraceRecord:
    job_id: str
    timestamp: int
    fields: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        if not self.job_id:
            raise ValueError("job_id must be non-empty")
        if self.timestamp < 0:
            raise ValueError("timestamp must be >= 0")

    def number(self, name: str) -> float | None:
        v = self.fields.get(name)
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            return None
        return None if math.isnan(v) else float(v)


@dataclass(frozen=True)
class FeatureMatrix:
    names: tuple[str, ...]
    values: np.ndarray  # shape (row_count, len(names))

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1 and vals.size == 0:
            vals = vals.reshape(0, len(self.names))
        if vals.ndim != 2 or vals.shape[1] != len(self.names):
            raise ValueError("values must be a 2-D array with one column per name")
        if len(set(self.names)) != len(self.names):
            raise ValueError("column names must be unique")
        object.__setattr__(self, "values", vals)

    @property
    def row_count(self) -> int:
        return self.values.shape[0]

    @classmethod
    def from_columns(cls, columns: Mapping[str, Sequence[float]]) -> "FeatureMatrix":
        names = tuple(columns)
        lengths = {len(columns[n]) for n in names}
        if len(lengths) > 1:
            raise ValueError("every column must have the same length")
        rows = lengths.pop() if lengths else 0
        vals = np.column_stack([np.asarray(columns[n], dtype=float) for n in names]) if names else np.zeros((rows, 0))
        return cls(names, vals)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def columns(self) -> dict[str, np.ndarray]:
        return {n: self.values[:, k] for k, n in enumerate(self.names)}


@dataclass(frozen=True)
class SynthSpec:
    vm_count: int = 50
    cpu_demand_range: tuple[float, float] = (0.5, 8.0)
    mem_demand_range: tuple[float, float] = (1.0, 32.0)
    duration_range: tuple[float, float] = (300.0, 7200.0)
    missing_rate: float = 0.0

    def __post_init__(self):
        if self.vm_count < 1:
            raise ValueError("vm_count must be >= 1")
        for name in ("cpu_demand_range", "mem_demand_range", "duration_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: lo must not exceed hi")
        if not 0 <= self.missing_rate <= 1:
            raise ValueError("missing_rate must lie in [0, 1]")


def _parse_cell(cell: str) -> object:
    text = cell.strip()
    if not text:
        return None
    try:
        return float(text) if any(c in text for c in ".eEn") else int(text)
    except ValueError:
        pass
    if text[0] in "{[('\"":
        try:
            return parse_literal(text)
        except LiteralSyntaxError:
            return text
    return text


def load_trace(source, schema: Sequence[str] = SOURCE_COLUMNS, *, id_column: str = "job_id",
               time_column: str = "timestamp") -> list[RawTraceRecord]:
    """Read a CSV trace with a header row into records.

    ``source`` is a path, a text/byte stream or raw bytes. Columns listed in
    ``schema`` are numeric: cells that do not parse as numbers become missing
    (``None``). Other cells that look like literals are parsed with
    :func:`parse_literal`; anything else is kept as text.
    """
    if isinstance(source, (bytes, bytearray)):
        fh = io.StringIO(bytes(source).decode("utf-8"))
    elif isinstance(source, str) or hasattr(source, "__fspath__"):
        with open(source, encoding="utf-8", newline="") as f:
            fh = io.StringIO(f.read())
    elif hasattr(source, "read"):
        data = source.read()
        fh = io.StringIO(data.decode("utf-8") if isinstance(data, bytes) else data)
    else:
        raise TypeError("source must be a path, bytes or a readable stream")

    reader = csv.reader(fh)
    header = next(reader, None)
    if not header:
        raise DataError("trace has no header row")
    header = [h.strip() for h in header]
    if len(set(header)) != len(header):
        dupes = sorted({h for h in header if header.count(h) > 1})
        raise DataError(f"duplicate column names: {dupes}")
    for required in (id_column, time_column):
        if required not in header:
            raise DataError(f"trace header lacks required column {required!r}")
    numeric = set(schema)

    records = []
    for lineno, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise DataError(f"line {lineno}: expected {len(header)} cells, got {len(row)}")
        values = {}
        job_id = timestamp = None
        for name, cell in zip(header, row):
            if name == id_column:
                job_id = cell.strip()
                continue
            if name == time_column:
                try:
                    timestamp = int(float(cell))
                except ValueError:
                    raise DataError(f"line {lineno}: bad timestamp {cell!r}") from None
                continue
            v = _parse_cell(cell)
            if name in numeric and (isinstance(v, bool) or not isinstance(v, (int, float))):
                v = None
            values[name] = v
        try:
            records.append(RawTraceRecord(job_id, timestamp, values))
        except ValueError as exc:
            raise DataError(f"line {lineno}: {exc}") from None
    return records


def write_trace(records: Iterable[RawTraceRecord], path_or_stream, columns: Sequence[str] = SOURCE_COLUMNS) -> None:
    """Write records as CSV (job_id, timestamp, then ``columns``); missing cells stay empty."""

    def cell(v):
        if v is None:
            return ""
        if isinstance(v, (dict, list)):
            return render_literal(v)
        return repr(v) if isinstance(v, float) else str(v)

    own = not hasattr(path_or_stream, "write")
    fh = open(path_or_stream, "w", encoding="utf-8", newline="") if own else path_or_stream
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["job_id", "timestamp", *columns])
        for r in records:
            w.writerow([r.job_id, r.timestamp, *(cell(r.fields.get(c)) for c in columns)])
    finally:
        if own:
            fh.close()


def flatten_nested(records: Iterable[RawTraceRecord],
                   field_map: Mapping[str, Mapping[str, str]] = GOOGLE_FIELD_MAP) -> list[RawTraceRecord]:
    """Lift keys of nested mapping cells into flat numeric columns."""
    out = []
    for r in records:
        fields_ = dict(r.fields)
        for col, keys in field_map.items():
            nested = fields_.pop(col, None)
            for key, target in keys.items():
                v = nested.get(key) if isinstance(nested, dict) else None
                ok = isinstance(v, (int, float)) and not isinstance(v, bool)
                fields_.setdefault(target, float(v) if ok else None)
        out.append(RawTraceRecord(r.job_id, r.timestamp, fields_))
    return out


def _median(values: list[float]) -> float:
    s = sorted(values)
    n = len(s)
    mid = n // 2
    return s[mid] if n % 2 else (s[mid - 1] + s[mid]) / 2.0


def clean_records(records: Sequence[RawTraceRecord], columns: Sequence[str] = SOURCE_COLUMNS) -> list[RawTraceRecord]:
    """Drop rows with every numeric column missing, then median-impute the rest."""
    kept = [r for r in records if any(r.number(c) is not None for c in columns)]
    medians = {}
    for c in columns:
        present = [v for v in (r.number(c) for r in kept) if v is not None]
        if kept and not present:
            raise DataError(f"column {c!r} is missing in every row")
        if present:
            medians[c] = _median(present)
    out = []
    for r in kept:
        fields_ = dict(r.fields)
        for c in columns:
            v = r.number(c)
            fields_[c] = medians[c] if v is None else v
        out.append(RawTraceRecord(r.job_id, r.timestamp, fields_))
    return out


def _ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num)
    nz = den != 0
    out[nz] = num[nz] / den[nz]
    return out


def extract_features(records: Sequence[RawTraceRecord]) -> FeatureMatrix:
    """The ten canonical feature columns, one row per record."""
    cols = {}
    for c in SOURCE_COLUMNS:
        vals = []
        for r in records:
            v = r.number(c)
            if v is None:
                raise DataError(f"record {r.job_id}: missing numeric column {c!r}")
            vals.append(v)
        cols[c] = np.array(vals, dtype=float)
    cols["cpu_utilization_ratio"] = _ratio(cols["cpu_usage_mean"], cols["requested_cpus"])
    cols["cpu_peak_ratio"] = _ratio(cols["avg_cpus"], cols["requested_cpus"])
    cols["memory_peak_ratio"] = _ratio(cols["avg_memory"], cols["requested_memory"])
    return FeatureMatrix.from_columns({c: cols[c] for c in FEATURE_COLUMNS})


def minmax_normalize(matrix: FeatureMatrix) -> FeatureMatrix:
    """Rescale each column to [0, 1]; constant columns become all zeros."""
    vals = matrix.values
    if vals.shape[0] == 0:
        return FeatureMatrix(matrix.names, vals.copy())
    lo = vals.min(axis=0)
    span = vals.max(axis=0) - lo
    out = np.zeros_like(vals)
    nz = span > 0
    out[:, nz] = (vals[:, nz] - lo[nz]) / span[nz]
    return FeatureMatrix(matrix.names, out)


def synth_workload(spec: SynthSpec, seed: int) -> list[RawTraceRecord]:
    """Seeded synthetic trace in the flat canonical schema.

    Requests are uniform over the configured ranges; peak usage is a uniform
    fraction of the request and mean usage a uniform fraction of the peak.
    """
    rng = np.random.default_rng(seed)
    n = spec.vm_count
    req_c = rng.uniform(*spec.cpu_demand_range, size=n)
    req_m = rng.uniform(*spec.mem_demand_range, size=n)
    dur = rng.uniform(*spec.duration_range, size=n)
    peak_c = req_c * rng.uniform(0.3, 1.0, size=n)
    peak_m = req_m * rng.uniform(0.3, 1.0, size=n)
    mean_c = peak_c * rng.uniform(0.4, 1.0, size=n)
    mean_m = peak_m * rng.uniform(0.4, 1.0, size=n)
    gaps = rng.integers(1_000, 5_000_000, size=n)
    ts = np.cumsum(gaps)
    blank = rng.random((n, len(SOURCE_COLUMNS))) < spec.missing_rate
    table = np.column_stack([req_c, req_m, peak_c, peak_m, mean_c, mean_m, dur])
    records = []
    for i in range(n):
        fields_ = {
            c: (None if blank[i, k] else float(table[i, k]))
            for k, c in enumerate(SOURCE_COLUMNS)
        }
        records.append(RawTraceRecord(f"job-{i:05d}", int(ts[i]), fields_))
    return records


def instance_from_records(records: Sequence[RawTraceRecord], pms: Sequence[PmSpec], **kwargs) -> Instance:
    """One VM per cleaned record, sized by its requested CPU and memory."""
    vms = []
    for i, r in enumerate(records):
        vals = [r.number(c) for c in ("requested_cpus", "requested_memory", "duration")]
        if any(v is None for v in vals):
            raise DataError(f"record {r.job_id}: needs requested_cpus, requested_memory and duration")
        vms.append(VmSpec(i, *vals))
    return Instance(tuple(vms), tuple(pms), **kwargs)


def epoch_demands_from_trace(records: Sequence[RawTraceRecord], n_vms: int, epochs: int) -> list[np.ndarray]:
    """Split a trace in time order into ``epochs`` windows of CPU demand vectors.

    Window ``e`` assigns VM ``i`` the ``cpu_usage_mean`` of record
    ``e * n_vms + i`` (cycling when the trace is short).
    """
    ordered = sorted(records, key=lambda r: r.timestamp)
    if not ordered:
        raise DataError("empty trace")
    vals = [r.number("cpu_usage_mean") for r in ordered]
    if any(v is None for v in vals):
        raise DataError("cpu_usage_mean must be present in every record (clean first)")
    out = []
    for e in range(epochs):
        out.append(np.array([vals[(e * n_vms + i) % len(vals)] for i in range(n_vms)], dtype=float))
    return out
