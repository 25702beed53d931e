"""Channel files in, result files out.

Channel JSON is either explicit Kraus data::

    {"dim": 2, "kraus": [[[[1, 0], [0, 0]], [[0, 0], [1, 0]]]]}

(operators, then rows, then entries, each entry a ``[re, im]`` pair) or a
named builtin::

    {"builtin": "shift_mixture", "params": {"a": 0.5, "b": 0.5}, "dim": 4}

Relative output paths are resolved against ``$UNITARITY_OUTPUT_DIR`` when it
is set.
"""

from __future__ import annotations

import csv
import json
import os
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .channels import KrausChannel
from .errors import IoError, ParseError

if TYPE_CHECKING:
    from .experiments import ChannelSpec, ResultRecord

OUTPUT_DIR_ENV = "UNITARITY_OUTPUT_DIR"
FORMATS = ("json", "csv")
CSV_HEADER = ("repeat", "index_kind", "value", "queries", "seed", "wall_seconds")


def kraus_to_json(kraus: np.ndarray) -> list:
    """Nested ``[re, im]`` lists for an array of Kraus operators."""
    arr = np.asarray(kraus, dtype=complex)
    return np.stack([arr.real, arr.imag], axis=-1).tolist()


def kraus_from_json(data) -> np.ndarray:
    try:
        arr = np.asarray(data, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"Kraus data is not a nested array of numbers: {exc}") from None
    if arr.ndim != 4 or arr.shape[-1] != 2:
        raise ParseError(
            f"Kraus data must have shape (operators, rows, columns, 2), got {arr.shape}"
        )
    return arr[..., 0] + 1j * arr[..., 1]


def channel_spec_from_dict(data) -> "ChannelSpec":
    from .experiments import ChannelSpec

    if not isinstance(data, dict):
        raise ParseError("channel file must hold a JSON object")
    if "builtin" in data:
        params = data.get("params", {})
        if not isinstance(params, dict):
            raise ParseError("'params' must be an object")
        if "dim" not in data:
            raise ParseError("builtin channel needs 'dim'")
        return ChannelSpec(builtin=str(data["builtin"]), params=dict(params), dim=_as_dim(data["dim"]))
    if "kraus" not in data:
        raise ParseError("channel file needs either 'builtin' or 'kraus'")
    kraus = kraus_from_json(data["kraus"])
    dim = _as_dim(data.get("dim", kraus.shape[1]))
    return ChannelSpec(dim=dim, kraus=kraus_to_json(kraus))


def _as_dim(value) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
        raise ParseError(f"'dim' must be an integer, got {value!r}")
    return int(value)


def read_channel_spec(path) -> "ChannelSpec":
    """Parse a channel file into a :class:`~unitarity.experiments.ChannelSpec` (not yet validated)."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read channel file {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: malformed JSON ({exc})") from None
    return channel_spec_from_dict(data)


def load_channel_spec(path) -> KrausChannel:
    """Read and validate a channel file.

    Raises:
        ParseError: malformed JSON or schema.
        ValidationError: the Kraus operators are not a valid channel.
        IoError: the file cannot be read.
    """
    return read_channel_spec(path).build()


def resolve_output(path) -> Path:
    path = Path(path)
    root = os.environ.get(OUTPUT_DIR_ENV)
    if root and not path.is_absolute():
        path = Path(root) / path
    return path


def dumps_result(record: "ResultRecord") -> str:
    return json.dumps(record.to_dict(), indent=2, allow_nan=True) + "\n"


def csv_rows(record: "ResultRecord") -> tuple[tuple, list[tuple]]:
    """Header and rows of the flat CSV view of a result.

    Estimate results give one row per repeat and index (the assembled
    unitarity plus each index). Other kinds write their table as is.
    """
    if record.config.kind == "estimate":
        seed = record.config.estimator.seed
        rows = []
        for rep, rec in enumerate(record.records):
            rows.append((rep, rec.kind, rec.value, rec.total_queries, seed, rec.wall_seconds))
            for kind, part in rec.components.items():
                rows.append((rep, kind, part.value, part.total_queries, seed, part.wall_seconds))
        return CSV_HEADER, rows
    header: list[str] = []
    for row in record.rows:
        header.extend(k for k in row if k not in header)
    return tuple(header), [tuple(row.get(k, "") for k in header) for row in record.rows]


def _fmt(value):
    if isinstance(value, float):
        return format(value, ".17g")
    return value


def emit_result(record: "ResultRecord", path, format: str = "json") -> Path:
    """Write ``record`` as JSON (full record) or CSV (flat rows).

    Returns the resolved path. Floats in CSV carry 17 significant digits.

    Raises:
        IoError: the file cannot be written; the message names the path.
    """
    if format not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}, got {format!r}")
    target = resolve_output(path)
    try:
        with open(target, "w", newline="") as fh:
            if format == "json":
                fh.write(dumps_result(record))
            else:
                header, rows = csv_rows(record)
                writer = csv.writer(fh)
                writer.writerow(header)
                writer.writerows([_fmt(v) for v in row] for row in rows)
    except OSError as exc:
        raise IoError(f"cannot write result to {target}: {exc.strerror or exc}") from exc
    return target


def load_result(path) -> "ResultRecord":
    from .experiments import ResultRecord

    target = resolve_output(path)
    try:
        data = json.loads(Path(target).read_text())
    except OSError as exc:
        raise IoError(f"cannot read result file {target}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{target}: malformed JSON ({exc})") from None
    return ResultRecord.from_dict(data)
