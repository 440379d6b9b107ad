"""CSV ingestion and JSON serialization of structures, models, plants and configs.

All writers are deterministic: dictionary keys are sorted, floats are written
with 17 significant digits (enough to round-trip any double), and files are
replaced atomically.
"""

from __future__ import annotations

import csv
import io as io_module
import json
import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._version import __version__
from .errors import (EmptyCSVError, IntegrityError, MissingColumnError, NonFiniteCellError,
                     NonNumericCellError, RaggedRowError, SchemaError)
from .laguerre import LaguerreSeriesSpec
from .model import FitStats, FittedModel, ModelStructure, coefficient_index
from .regressor import Dataset
from .simulate import PlantBranch, SyntheticPlant, exponential_response

SCHEMA_VERSION = 1


# ---------------------------------------------------------------- formatting

def format_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    s = "%.17g" % x
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _json_value(obj) -> str:
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        # JSON has no inf/nan; non-finite floats become null
        return format_float(obj) if math.isfinite(obj) else "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        items = sorted((str(k), v) for k, v in obj.items())
        return "{" + ", ".join(f"{json.dumps(k)}: {_json_value(v)}" for k, v in items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return _json_value(obj) + "\n"


def atomic_write(path, text: str) -> None:
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


def write_json(path, obj) -> None:
    atomic_write(path, dumps(obj))


def read_json(path) -> dict:
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"invalid JSON in {path}: {exc}") from None


# ---------------------------------------------------------------------- CSV

def read_csv_columns(path) -> dict:
    """All columns of a headed numeric CSV as float arrays, in file order."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise EmptyCSVError(f"{path}: file is empty")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise SchemaError(f"{path}: duplicate column names in header")
    if len(rows) == 1:
        raise EmptyCSVError(f"{path}: header present but no data rows")
    data = np.empty((len(rows) - 1, len(header)))
    for r, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise RaggedRowError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
        for c, cell in enumerate(row):
            try:
                value = float(cell)
            except ValueError:
                raise NonNumericCellError(
                    f"{path}: row {r}, column {header[c]!r}: non-numeric cell {cell!r}") from None
            if not math.isfinite(value):
                raise NonFiniteCellError(
                    f"{path}: row {r}, column {header[c]!r}: non-finite value {cell.strip()!r}")
            data[r - 1, c] = value
    return {name: data[:, c].copy() for c, name in enumerate(header)}


def dataset_from_columns(columns: dict, input_names, output_name=None, path="data",
                         sample_interval: float = 1.0) -> Dataset:
    wanted = list(input_names) + ([output_name] if output_name else [])
    missing = [n for n in wanted if n not in columns]
    if missing:
        raise MissingColumnError(f"{path}: missing column(s) {missing}; found {list(columns)}")
    inputs = np.column_stack([columns[n] for n in input_names])
    output = columns[output_name] if output_name else None
    return Dataset(inputs, output, tuple(input_names), output_name or "y", sample_interval)


def load_csv(path, input_names, output_name=None, sample_interval: float = 1.0) -> Dataset:
    """Read named input columns (and optionally the output) from a headed CSV.

    Column order in the file is irrelevant; extra columns are ignored. Rows are
    numbered from 1 after the header in error messages.
    """
    return dataset_from_columns(read_csv_columns(path), input_names, output_name, path,
                                sample_interval)


def csv_text(columns: dict) -> str:
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    buf = io_module.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for r in range(len(cols[0]) if cols else 0):
        cells = []
        for col in cols:
            v = col[r]
            if np.issubdtype(col.dtype, np.integer):
                cells.append(str(int(v)))
            elif isinstance(v, str):
                cells.append(v)
            else:
                cells.append(format_float(v))
        writer.writerow(cells)
    return buf.getvalue()


def write_csv(path, columns: dict) -> None:
    atomic_write(path, csv_text(columns))


def save_dataset(path, dataset: Dataset) -> None:
    columns = {n: dataset.inputs[:, i] for i, n in enumerate(dataset.input_names)}
    if dataset.output is not None:
        columns[dataset.output_name] = dataset.output
    write_csv(path, columns)


# ------------------------------------------------------------ schema helpers

def _require(data, key, path, kind=None):
    if not isinstance(data, dict) or key not in data:
        raise SchemaError("required field is missing", f"{path}.{key}" if path else key)
    value = data[key]
    if kind is not None and not _is_kind(value, kind):
        raise SchemaError(f"expected {kind}, got {type(value).__name__}", f"{path}.{key}" if path else key)
    return value


def _is_kind(value, kind):
    if kind == "int":
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == "list":
        return isinstance(value, list)
    if kind == "dict":
        return isinstance(value, dict)
    if kind == "str":
        return isinstance(value, str)
    if kind == "bool":
        return isinstance(value, bool)
    raise AssertionError(kind)


def _check_unknown(data, allowed, path, strict):
    if strict:
        extra = sorted(set(data) - set(allowed))
        if extra:
            raise SchemaError(f"unknown field(s) {extra}", path or "<root>")


def _check_version(data):
    version = _require(data, "schema_version", "", "int")
    if version != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {version}", "schema_version")


# ------------------------------------------------------------------ structure

_STRUCTURE_KEYS = ("schema_version", "memory", "sample_interval", "inputs", "output", "flags")


@dataclass(frozen=True)
class StructureFile:
    structure: ModelStructure
    ridge: float = 0.0


def structure_to_dict(structure: ModelStructure, ridge: float = 0.0) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "memory": structure.memory_length,
        "sample_interval": float(structure.sample_interval),
        "output": structure.output_name,
        "inputs": [
            {"name": name, "degree": structure.degrees[i],
             "terms": [{"R": structure.specs[(n, i)].order_count,
                        "a": structure.specs[(n, i)].time_scale}
                       for n in range(1, structure.degrees[i] + 1)]}
            for i, name in enumerate(structure.input_names)],
        "flags": {"constant_column": bool(structure.constant_column), "ridge": float(ridge)},
    }


def structure_from_dict(data: dict, strict: bool = False) -> StructureFile:
    """Parse a structure document; errors carry the offending field path."""
    if not isinstance(data, dict):
        raise SchemaError("structure document must be a JSON object")
    _check_version(data)
    _check_unknown(data, _STRUCTURE_KEYS + ("kind", "theta", "index", "fit_stats",
                                            "toolkit_version", "differenced")
                   if data.get("kind") == "vl-model" else _STRUCTURE_KEYS, "", strict)
    memory = _require(data, "memory", "", "int")
    sample_interval = float(data.get("sample_interval", 1.0))
    output = _require(data, "output", "", "str")
    inputs = _require(data, "inputs", "", "list")
    flags = data.get("flags", {})
    if not isinstance(flags, dict):
        raise SchemaError("expected an object", "flags")
    _check_unknown(flags, ("constant_column", "ridge"), "flags", strict)
    names, degrees, specs = [], [], {}
    for i, entry in enumerate(inputs):
        path = f"inputs[{i}]"
        if not isinstance(entry, dict):
            raise SchemaError("expected an object", path)
        _check_unknown(entry, ("name", "degree", "terms"), path, strict)
        names.append(_require(entry, "name", path, "str"))
        degree = _require(entry, "degree", path, "int")
        degrees.append(degree)
        terms = _require(entry, "terms", path, "list")
        if len(terms) != degree:
            raise SchemaError(f"degree {degree} needs {degree} term(s), found {len(terms)}",
                              f"{path}.terms")
        for n, term in enumerate(terms, start=1):
            tpath = f"{path}.terms[{n - 1}]"
            if not isinstance(term, dict):
                raise SchemaError("expected an object", tpath)
            _check_unknown(term, ("R", "a"), tpath, strict)
            R = _require(term, "R", tpath, "int")
            a = _require(term, "a", tpath, "number")
            try:
                specs[(n, i)] = LaguerreSeriesSpec(R, a)
            except ValueError as exc:
                raise SchemaError(str(exc), tpath) from None
    ridge = flags.get("ridge", 0.0)
    if not _is_kind(ridge, "number") or ridge < 0:
        raise SchemaError("ridge must be a nonnegative number", "flags.ridge")
    structure = ModelStructure(memory, tuple(degrees), specs, tuple(names), output,
                               sample_interval, bool(flags.get("constant_column", False)))
    return StructureFile(structure, float(ridge))


def save_structure(path, structure: ModelStructure, ridge: float = 0.0) -> None:
    write_json(path, structure_to_dict(structure, ridge))


def load_structure(path, strict: bool = False) -> StructureFile:
    return structure_from_dict(read_json(path), strict)


# ---------------------------------------------------------------------- model

def model_to_dict(model: FittedModel) -> dict:
    data = structure_to_dict(model.structure, model.fit_stats.ridge)
    stats = model.fit_stats
    data.update({
        "kind": "vl-model",
        "toolkit_version": __version__,
        "theta": [float(v) for v in model.theta],
        "index": [{"term": c.term, "factors": [list(f) for f in c.factors]} for c in model.index],
        "fit_stats": {"sse": stats.sse, "num_rows": stats.num_rows,
                      "condition_estimate": stats.condition_estimate, "rank": stats.rank,
                      "underdetermined": stats.underdetermined},
        "differenced": {k: float(v) for k, v in model.differenced.items()},
    })
    return data


def model_from_dict(data: dict, strict: bool = False) -> FittedModel:
    sf = structure_from_dict(data, strict)
    _require(data, "toolkit_version", "", "str")
    theta = _require(data, "theta", "", "list")
    index = _require(data, "index", "", "list")
    if len(theta) != len(index):
        raise IntegrityError(f"theta has {len(theta)} entries but the index has {len(index)}", "theta")
    parsed = []
    for j, entry in enumerate(index):
        path = f"index[{j}]"
        term = _require(entry, "term", path, "int")
        factors = _require(entry, "factors", path, "list")
        try:
            parsed.append((term, tuple((int(f[0]), int(f[1])) for f in factors)))
        except (TypeError, ValueError, IndexError):
            raise SchemaError("factors must be [input, order] pairs", f"{path}.factors") from None
    expected = coefficient_index(sf.structure)
    if len(parsed) != len(expected):
        raise IntegrityError(f"structure implies {len(expected)} coefficients, file has {len(parsed)}",
                             "index")
    if [tuple(e) for e in expected] != parsed:
        raise IntegrityError("coefficient index is not in canonical order for this structure", "index")
    for j, v in enumerate(theta):
        if not _is_kind(v, "number") or not math.isfinite(v):
            raise SchemaError("theta entries must be finite numbers", f"theta[{j}]")
    st = data.get("fit_stats", {})
    cond = st.get("condition_estimate")
    stats = FitStats(float(st.get("sse", float("nan"))), int(st.get("num_rows", 0)),
                     float("inf") if cond is None else float(cond), int(st.get("rank", 0)),
                     bool(st.get("underdetermined", False)), sf.ridge)
    return FittedModel(sf.structure, np.array(theta, dtype=float), parsed, stats,
                       {str(k): float(v) for k, v in data.get("differenced", {}).items()})


def save_model(path, model: FittedModel) -> None:
    write_json(path, model_to_dict(model))


def load_model(path, strict: bool = False) -> FittedModel:
    return model_from_dict(read_json(path), strict)


# ---------------------------------------------------------------------- plant

def plant_from_dict(data: dict, strict: bool = False):
    """Parse a plant document. Returns ``(plant, input_names, output_name)``.

    Branch ``impulse_response`` may be a list of taps or
    ``{"exponential": {"pole": p, "memory": M, "gain": g}}``.
    """
    _check_version(data)
    _check_unknown(data, ("schema_version", "noise_std", "inputs", "output", "branches"), "", strict)
    names = _require(data, "inputs", "", "list")
    output = data.get("output", "y")
    branches = []
    for j, b in enumerate(_require(data, "branches", "", "list")):
        path = f"branches[{j}]"
        _check_unknown(b, ("input", "kind", "kernels", "impulse_response", "polynomial"), path, strict)
        name = _require(b, "input", path, "str")
        if name not in names:
            raise SchemaError(f"unknown input {name!r}", f"{path}.input")
        kind = _require(b, "kind", path, "str")
        try:
            if kind == "volterra":
                kernels = {int(n): np.array(h, dtype=float)
                           for n, h in _require(b, "kernels", path, "dict").items()}
                branches.append(PlantBranch(names.index(name), "volterra", kernels=kernels))
            else:
                g = _require(b, "impulse_response", path)
                if isinstance(g, dict):
                    e = _require(g, "exponential", f"{path}.impulse_response", "dict")
                    g = exponential_response(float(e["pole"]), int(e["memory"]), float(e.get("gain", 1.0)))
                branches.append(PlantBranch(names.index(name), kind, impulse_response=g,
                                            polynomial=_require(b, "polynomial", path, "list")))
        except (KeyError, ValueError) as exc:
            raise SchemaError(str(exc), path) from None
    plant = SyntheticPlant(branches, float(data.get("noise_std", 0.0)))
    return plant, list(names), output


def load_plant(path, strict: bool = False):
    return plant_from_dict(read_json(path), strict)
