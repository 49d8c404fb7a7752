"""CSV and JSON serialization with byte-stable output."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np

from .errors import DomainError
from .paths import SampledPath


def _fmt(x: float) -> str:
    return repr(float(x))


def path_to_csv(path: SampledPath) -> str:
    """Header ``t,v_1,...,v_k``; matrix values flattened row-major."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    flat = path.flat
    w.writerow(["t"] + [f"v_{i + 1}" for i in range(flat.shape[1])])
    for t, row in zip(path.times, flat):
        w.writerow([_fmt(t)] + [_fmt(x) for x in row])
    return buf.getvalue()


def write_path_csv(path: SampledPath, file) -> None:
    Path(file).write_text(path_to_csv(path), encoding="utf-8")


def read_path_csv(file, shape: tuple | None = None) -> SampledPath:
    """Load a path; ``shape`` reshapes each row (default: a column vector, or scalar)."""
    text = Path(file).read_text(encoding="utf-8")
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise DomainError(f"{file}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "t" or len(header) < 2:
        raise DomainError(f"{file}: header must be t,v_1,...,v_k")
    k = len(header) - 1
    body = [r for r in rows[1:] if r]
    try:
        data = np.array([[float(x) for x in r] for r in body], dtype=float)
    except ValueError as exc:
        raise DomainError(f"{file}: non-numeric entry ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != k + 1:
        raise DomainError(f"{file}: every row needs {k + 1} fields")
    if shape is None:
        shape = (1, 1) if k == 1 else (k, 1)
    if shape[0] * shape[1] != k:
        raise DomainError(f"{file}: {k} value columns cannot form shape {tuple(shape)}")
    return SampledPath(data[:, 0], data[:, 1:].reshape(-1, *shape))


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(obj, file) -> None:
    Path(file).write_text(dumps(obj), encoding="utf-8")
