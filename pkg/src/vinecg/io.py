"""Canonical JSON model documents and CSV ingestion."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any

import numpy as np

from .bicop import BivariateCopula, CopulaFamily
from .errors import DataError, ModelFormatError, VineError
from .vcg import CopulaVertex, VineModel, validate

__all__ = ["SCHEMA_VERSION", "save", "load", "dumps_model", "read_csv", "write_csv"]

SCHEMA_VERSION = 1
_TOP_KEYS = {"schema_version", "d", "vertices", "default_order", "cond_set", "provenance"}
_VERTEX_KEYS = {"left", "right", "cond", "family", "rotation", "theta"}


def _record(cv: CopulaVertex) -> dict:
    cop = cv.copula
    if cop is None:
        raise ModelFormatError(f"copula vertex {cv.key} has no pair-copula to serialize")
    return {
        "left": cv.left,
        "right": cv.right,
        "cond": list(cv.conditioning),
        "family": cop.family.value,
        "rotation": cop.rotation,
        "theta": float(cop.theta),
    }


def save(m: VineModel, provenance: str = "") -> str:
    """Serialize ``m`` to its canonical document text.

    Vertices are sorted by ``(|cond|, left, right)``, object keys are sorted,
    floats use Python's shortest round-trip repr, and the text ends with a
    newline, so ``save(load(text)) == text`` for canonical input.
    """
    verts = sorted(m.copulas, key=lambda cv: (cv.level, cv.left, cv.right, cv.conditioning))
    doc = {
        "schema_version": SCHEMA_VERSION,
        "d": m.d,
        "vertices": [_record(cv) for cv in verts],
        "default_order": None if m.default_order is None else list(m.default_order),
        "cond_set": list(m.cond_set),
        "provenance": str(provenance),
    }
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


dumps_model = save


def _int(value: Any, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ModelFormatError(f"{path}: expected an integer, got {type(value).__name__}")
    return value


def _int_list(value: Any, path: str) -> list[int]:
    if not isinstance(value, list):
        raise ModelFormatError(f"{path}: expected an array of integers, got {type(value).__name__}")
    return [_int(x, f"{path}[{i}]") for i, x in enumerate(value)]


def _vertex(rec: Any, path: str) -> CopulaVertex:
    if not isinstance(rec, dict):
        raise ModelFormatError(f"{path}: expected an object, got {type(rec).__name__}")
    missing = sorted(_VERTEX_KEYS - rec.keys())
    if missing:
        raise ModelFormatError(f"{path}: missing field(s) {', '.join(missing)}")
    extra = sorted(rec.keys() - _VERTEX_KEYS)
    if extra:
        raise ModelFormatError(f"{path}: unknown field(s) {', '.join(extra)}")
    left = _int(rec["left"], f"{path}.left")
    right = _int(rec["right"], f"{path}.right")
    cond = _int_list(rec["cond"], f"{path}.cond")
    if cond != sorted(set(cond)):
        raise ModelFormatError(f"{path}.cond: must be sorted without duplicates, got {cond}")
    fam = rec["family"]
    if not isinstance(fam, str):
        raise ModelFormatError(f"{path}.family: expected a string")
    try:
        family = CopulaFamily(fam)
    except ValueError:
        raise ModelFormatError(f"{path}.family: unknown family {fam!r}") from None
    rotation = _int(rec["rotation"], f"{path}.rotation")
    theta = rec["theta"]
    if isinstance(theta, bool) or not isinstance(theta, (int, float)) or not math.isfinite(theta):
        raise ModelFormatError(f"{path}.theta: expected a finite number")
    try:
        cop = BivariateCopula(family, rotation, float(theta))
    except (VineError, ValueError) as e:
        raise ModelFormatError(f"{path}: {e}") from None
    try:
        return CopulaVertex(left, right, tuple(cond), cop)
    except (VineError, ValueError) as e:
        raise ModelFormatError(f"{path}: {e}") from None


def load(text: str | bytes) -> VineModel:
    """Parse and validate a model document.

    Raises:
        ModelFormatError: for malformed JSON (with byte offset), schema
            violations (naming the field path) and structural violations
            (embedding the validation report).  Nothing else escapes.
    """
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ModelFormatError(f"document is not UTF-8 (byte offset {e.start})") from None
    try:
        doc = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        offset = len(text[: e.pos].encode("utf-8"))
        raise ModelFormatError(f"JSON parse error at byte offset {offset}: {e.msg}") from None
    except (ValueError, RecursionError) as e:
        raise ModelFormatError(f"JSON parse error: {e}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError(f"$: expected an object, got {type(doc).__name__}")
    missing = sorted({"schema_version", "d", "vertices"} - doc.keys())
    if missing:
        raise ModelFormatError(f"$: missing field(s) {', '.join(missing)}")
    extra = sorted(doc.keys() - _TOP_KEYS)
    if extra:
        raise ModelFormatError(f"$: unknown field(s) {', '.join(extra)}")
    version = _int(doc["schema_version"], "$.schema_version")
    if version != SCHEMA_VERSION:
        raise ModelFormatError(f"$.schema_version: unsupported version {version}")
    d = _int(doc["d"], "$.d")
    if not 2 <= d <= 10_000:
        raise ModelFormatError(f"$.d: must be in 2..10000, got {d}")
    verts = doc["vertices"]
    if not isinstance(verts, list):
        raise ModelFormatError("$.vertices: expected an array")
    if len(verts) != d * (d - 1) // 2:
        raise ModelFormatError(f"$.vertices: expected {d * (d - 1) // 2} records for d = {d}, got {len(verts)}")
    copulas = [_vertex(rec, f"$.vertices[{i}]") for i, rec in enumerate(verts)]
    order = doc.get("default_order")
    if order is not None:
        order = _int_list(order, "$.default_order")
    cond = _int_list(doc.get("cond_set", []), "$.cond_set")
    prov = doc.get("provenance", "")
    if not isinstance(prov, str):
        raise ModelFormatError("$.provenance: expected a string")
    for i, x in enumerate((order or []) + cond):
        if not 0 <= x < d:
            raise ModelFormatError(f"variable index {x} outside 0..{d - 1} in default_order/cond_set")
    m = VineModel(d, copulas, cond_set=cond)
    issues = validate(m)
    if issues:
        raise ModelFormatError("structural violation: " + "; ".join(issues))
    if order is not None:
        from .scheduler import SamplingOrder, get_source

        try:
            get_source(SamplingOrder(tuple(order), d, tuple(cond)), m)
        except VineError as e:
            raise ModelFormatError(f"$.default_order: {e}") from None
        m = m.replace(default_order=order)
    return m


def _reject_constant(name: str):
    raise ValueError(f"non-finite number {name} is not allowed")


def read_csv(path: str | Path) -> tuple[np.ndarray, list[str]]:
    """Read a headed, comma-separated numeric CSV.

    Returns:
        ``(values, column_names)`` with values of shape ``n x d``.

    Raises:
        DataError: empty file, ragged rows (line number), non-numeric cells
            (row and column), or no data row below the header.
    """
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read {path}: {e.strerror}") from None
    except UnicodeDecodeError:
        raise DataError(f"{path} is not UTF-8 text") from None
    rows = list(csv.reader(io.StringIO(raw, newline="")))
    # skip fully blank lines (e.g. a trailing newline pair)
    numbered = [(i + 1, r) for i, r in enumerate(rows) if r and any(c.strip() for c in r)]
    if not numbered:
        raise DataError(f"{path} is empty")
    _, header = numbered[0]
    names = [h.strip() for h in header]
    d = len(names)
    body = numbered[1:]
    if not body:
        raise DataError(f"{path} has a header but no data rows")
    out = np.empty((len(body), d))
    for r, (line, cells) in enumerate(body):
        if len(cells) != d:
            raise DataError(f"{path}: line {line} has {len(cells)} fields, header has {d}")
        for c, cell in enumerate(cells):
            try:
                out[r, c] = float(cell)
            except ValueError:
                raise DataError(
                    f"{path}: non-numeric cell {cell!r} at row {r + 1}, column {c + 1} ({names[c]})"
                ) from None
    return out, names


def write_csv(values: np.ndarray, names: list[str] | None = None) -> str:
    """CSV text with a header line and LF line endings; floats use repr."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    names = names if names is not None else [f"u{j}" for j in range(values.shape[1])]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for row in values:
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()
