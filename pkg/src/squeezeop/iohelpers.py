"""Parsing of field descriptors and unitary matrices, and atomic output writing."""

from __future__ import annotations

import csv
import io as _io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import ValidationError
from .fock import FieldTerm, KerrField, PolynomialField, TabulatedField, ZeroField


class DescriptorError(ValueError):
    """Malformed command-line descriptor."""


def _floats(text: str, what: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise DescriptorError(f"bad number list in {what}: {text!r}") from exc
    return vals


def load_table(path, source: str | None = None) -> TabulatedField:
    """Read ``n,f(n)`` rows; ``# expansion: kappa,L1,...`` declares the expansion of ``f/beta``."""
    path = Path(path)
    expansion = None
    values = {}
    with open(path, newline="") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.lower().startswith("expansion:"):
                    expansion = _floats(body.split(":", 1)[1].strip(), f"{path}:{lineno}")
                continue
            parts = [p.strip() for p in line.split(",")]
            if len(parts) != 2:
                raise DescriptorError(f"{path}:{lineno}: expected 'n,f(n)', got {line!r}")
            try:
                n = int(parts[0])
                v = float(parts[1])
            except ValueError as exc:
                raise DescriptorError(f"{path}:{lineno}: cannot parse {line!r}") from exc
            if n in values:
                raise DescriptorError(f"{path}:{lineno}: duplicate n = {n}")
            values[n] = v
    if not values:
        raise DescriptorError(f"{path}: no table rows")
    n_max = max(values)
    missing = [n for n in range(n_max + 1) if n not in values]
    if missing or min(values) < 0:
        raise DescriptorError(f"{path}: table must cover n = 0..{n_max} without gaps (missing {missing[:5]})")
    table = tuple(values[n] for n in range(n_max + 1))
    try:
        return TabulatedField(table, None if expansion is None else tuple(expansion), source or str(path))
    except ValidationError as exc:
        raise DescriptorError(f"{path}: {exc}") from exc


def parse_field(desc: str) -> FieldTerm:
    """``zero`` | ``poly:a0,a1,...`` | ``kerr:K,h`` | ``table:@path``."""
    desc = desc.strip()
    if desc == "zero":
        return ZeroField()
    tag, sep, rest = desc.partition(":")
    if not sep:
        raise DescriptorError(f"unknown field descriptor {desc!r}")
    try:
        if tag == "poly":
            return PolynomialField(tuple(_floats(rest, "poly")))
        if tag == "kerr":
            vals = rest.split(",")
            if len(vals) != 2:
                raise DescriptorError(f"kerr needs 'K,h', got {rest!r}")
            K = float(vals[0])
            h = int(vals[1])
            return KerrField(K, h)
        if tag == "table":
            if not rest.startswith("@"):
                raise DescriptorError("table descriptor must be 'table:@path'")
            return load_table(rest[1:], source=rest[1:])
    except ValidationError as exc:
        raise DescriptorError(str(exc)) from exc
    except (ValueError, OSError) as exc:
        if isinstance(exc, DescriptorError):
            raise
        raise DescriptorError(f"bad field descriptor {desc!r}: {exc}") from exc
    raise DescriptorError(f"unknown field tag {tag!r}")


def parse_unitary(text: str, dim: int) -> np.ndarray:
    """``I`` / ``-I`` or a path to a CSV of complex literals or a JSON nested list."""
    t = text.strip()
    if t in ("I", "+I"):
        return np.eye(dim, dtype=complex)
    if t == "-I":
        return -np.eye(dim, dtype=complex)
    path = Path(t[1:] if t.startswith("@") else t)
    try:
        raw = path.read_text()
    except OSError as exc:
        raise DescriptorError(f"cannot read unitary matrix {path}: {exc}") from exc
    try:
        if path.suffix.lower() == ".json":
            rows = json.loads(raw)
            U = np.array([[complex(*c) if isinstance(c, list) else complex(c["re"], c["im"]) if isinstance(c, dict) else complex(c) for c in row] for row in rows])
        else:
            rows = [r for r in csv.reader(_io.StringIO(raw)) if r and not r[0].startswith("#")]
            U = np.array([[complex(c.strip().replace(" ", "")) for c in row] for row in rows])
    except (ValueError, TypeError, KeyError) as exc:
        raise DescriptorError(f"cannot parse unitary matrix {path}: {exc}") from exc
    return U


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(float(t)) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise DescriptorError(f"bad integer list {text!r}") from exc


# -- output ----------------------------------------------------------------------


def jsonable(obj):
    """Convert numpy scalars/arrays and complex numbers (as ``{"re", "im"}``) recursively."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    # float repr is the shortest string that round-trips bit-exactly
    return json.dumps(jsonable(obj), indent=2)


def atomic_write(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def csv_text(header: Iterable[str], rows: Iterable[Iterable]) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(header))
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()
