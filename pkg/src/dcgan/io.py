"""Path CSV files, dataset manifests, flat config files, and CSV ingestion."""

from __future__ import annotations

import configparser
import csv
from pathlib import Path

import numpy as np

from dcgan.signature import PathBatch


class FormatError(ValueError):
    pass


def write_paths(batch: PathBatch, path) -> None:
    """Write ``series_id,t,ch0,...`` rows; floats use ``repr`` so they round-trip exactly."""
    N = batch.n_channels
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series_id", "t"] + [f"ch{c}" for c in range(N)])
        ts = [repr(float(t)) for t in batch.times]
        for i in range(len(batch)):
            vals = batch.values[i]
            for j, t in enumerate(ts):
                w.writerow([i, t] + [repr(float(v)) for v in vals[j]])


def read_paths(path, meta: dict | None = None) -> PathBatch:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such path file: {path}")
    series: dict[str, tuple[list, list]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r, None)
        if header is None or header[:2] != ["series_id", "t"] or len(header) < 3:
            raise FormatError(f"{path}: header must be series_id,t,ch0,...")
        N = len(header) - 2
        for lineno, row in enumerate(r, start=2):
            if not row:
                continue
            if len(row) != N + 2:
                raise FormatError(f"{path}:{lineno}: expected {N + 2} fields, got {len(row)}")
            ts, vs = series.setdefault(row[0], ([], []))
            try:
                ts.append(float(row[1]))
                vs.append([float(v) for v in row[2:]])
            except ValueError as e:
                raise FormatError(f"{path}:{lineno}: {e}") from None
    if not series:
        raise FormatError(f"{path}: no data rows")
    ids = list(series)
    ref_id = ids[0]
    ref_t = np.array(series[ref_id][0])
    for sid in ids:
        t = np.array(series[sid][0])
        if np.any(np.diff(t) <= 0):
            raise FormatError(f"series {sid}: times are not strictly increasing")
        if t.shape != ref_t.shape or not np.array_equal(t, ref_t):
            raise FormatError(f"series {sid} and series {ref_id} are on different time grids")
    values = np.array([series[sid][1] for sid in ids], dtype=np.float64)
    return PathBatch(ref_t, values, dict(meta or {}))


# --------------------------------------------------------------------------
# flat key = value files


def write_kv(path, sections: dict[str, dict]) -> None:
    """Sections of ``key = value`` lines, keys sorted, so files diff cleanly."""
    lines = []
    for name, items in sections.items():
        lines.append(f"[{name}]")
        for k in sorted(items):
            lines.append(f"{k} = {_fmt(items[k])}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_fmt(x) for x in v)
    return str(v)


def read_kv(path) -> dict[str, dict[str, str]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such config file: {path}")
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(path.read_text(encoding="utf-8"))
    except configparser.Error as e:
        raise FormatError(f"{path}: {e}") from None
    return {s: dict(cp[s]) for s in cp.sections()}


def coerce(text: str, like):
    """Parse ``text`` to the type of the default value ``like``."""
    if isinstance(like, bool):
        low = text.strip().lower()
        if low not in ("true", "false", "1", "0", "yes", "no"):
            raise FormatError(f"not a boolean: {text!r}")
        return low in ("true", "1", "yes")
    if isinstance(like, int):
        return int(text)
    if isinstance(like, float):
        return float(text)
    if isinstance(like, tuple):
        return tuple(int(x) for x in text.split(",") if x.strip())
    return text


# --------------------------------------------------------------------------
# ingestion of real series


def ingest_windows(raw: np.ndarray, window: int, stride: int = 1, times=None):
    """Cut a ``(T, N)`` series into overlapping windows and min-max scale each channel.

    Returns the windowed :class:`PathBatch` and the per-channel ``(min, max)``
    used for scaling.
    """
    x = np.asarray(raw, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if window < 2 or stride < 1:
        raise ValueError("window must be >= 2 and stride >= 1")
    if x.shape[0] < window:
        raise ValueError(f"series of length {x.shape[0]} is shorter than the window {window}")
    lo, hi = x.min(axis=0), x.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    x = (x - lo) / span
    starts = range(0, x.shape[0] - window + 1, stride)
    values = np.stack([x[s : s + window] for s in starts])
    t = np.arange(window, dtype=np.float64) if times is None else np.asarray(times, dtype=np.float64)
    return PathBatch(t, values, {"dataset": "csv", "init_family": "gaussian"}), (lo, hi)


def read_table(path) -> np.ndarray:
    """Numeric columns of a plain CSV with a header row (non-numeric columns dropped)."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise FormatError(f"{path}: no data rows")
    cols = []
    for c in range(len(rows[0])):
        try:
            cols.append([float(r[c]) for r in rows[1:]])
        except (ValueError, IndexError):
            continue
    if not cols:
        raise FormatError(f"{path}: no numeric columns")
    return np.array(cols).T
