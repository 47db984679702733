"""Output persistence: RNLS1 field snapshots, JSON documents and CSV tables."""

import json
import math
import struct
from pathlib import Path
from typing import Any, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

from rnls_lab.errors import UsageError
from rnls_lab.models import Field, GridSpec
from rnls_lab.utils.logger import get_logger

log = get_logger("Store")

MAGIC = b"RNLS"
SNAPSHOT_VERSION = 1

PathLike = Union[str, Path]


def _ensure_parent(path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def write_field(field: Field, path: PathLike) -> Path:
    """Write a physical-space field as an RNLS1 snapshot"""
    grid = field.grid
    path = _ensure_parent(path)
    header = MAGIC + struct.pack(f"<3I{grid.d}I{grid.d}d", SNAPSHOT_VERSION, grid.d, grid.k,
                                 *grid.dims, *grid.lengths)
    payload = np.ascontiguousarray(field.values, dtype="<c16").tobytes(order="C")
    path.write_bytes(header + payload)
    log.debug(f"Wrote snapshot {path}")
    return path


def read_field(path: PathLike) -> Field:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"Snapshot not found: {path}")
    blob = path.read_bytes()
    if blob[:4] != MAGIC:
        raise UsageError(f"{path} is not an RNLS1 snapshot (bad magic)")
    try:
        version, d, k = struct.unpack_from("<3I", blob, 4)
        if version != SNAPSHOT_VERSION:
            raise UsageError(f"{path}: unsupported snapshot version {version}")
        offset = 16
        dims = struct.unpack_from(f"<{d}I", blob, offset)
        offset += 4 * d
        lengths = struct.unpack_from(f"<{d}d", blob, offset)
        offset += 8 * d
    except struct.error as e:
        raise UsageError(f"{path}: truncated snapshot header") from e
    grid = GridSpec(d=d, k=k, dims=dims, lengths=lengths)
    count = grid.npoints
    if len(blob) - offset != 16 * count:
        raise UsageError(f"{path}: expected {count} samples, found {(len(blob) - offset) // 16}")
    values = np.frombuffer(blob, dtype="<c16", count=count, offset=offset).reshape(grid.shape)
    return Field(grid=grid, values=values.astype(np.complex128))


def _json_float(value: float) -> str:
    if math.isnan(value):
        return '"nan"'
    if math.isinf(value):
        return '"inf"' if value > 0 else '"-inf"'
    text = format(value, ".17g")
    # keep floats recognizable as floats
    if not any(ch in text for ch in ".en"):
        text += ".0"
    return text


def _encode(value: Any, indent: int) -> str:
    pad = "  " * (indent + 1)
    close = "  " * indent
    if isinstance(value, BaseModel):
        value = value.model_dump(mode="json")
    if isinstance(value, np.ndarray):
        value = value.tolist()
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{_encode(str(key), 0)}: {_encode(value[key], indent + 1)}"
                 for key in sorted(value, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        items = [pad + _encode(item, indent + 1) for item in value]
        return "[\n" + ",\n".join(items) + "\n" + close + "]"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return _json_float(float(value))
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=False)
    if hasattr(value, "value"):
        return _encode(value.value, indent)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def dumps_json(document: Any) -> str:
    """Sorted keys, 17 significant digits, non-finite floats as strings"""
    return _encode(document, 0) + "\n"


def write_json(document: Any, path: PathLike) -> Path:
    path = _ensure_parent(path)
    path.write_text(dumps_json(document), encoding="utf-8")
    log.debug(f"Wrote {path}")
    return path


def write_csv(frame: pd.DataFrame, path: PathLike) -> Path:
    path = _ensure_parent(path)
    frame.to_csv(path, index=False, float_format="%.17g", lineterminator="\n")
    log.debug(f"Wrote {path} ({len(frame)} rows)")
    return path
