"""MPS reader and writer.

Sections are laid out in the classic fixed order (NAME, ROWS, COLUMNS, RHS,
BOUNDS, ENDATA) with whitespace-separated fields, so names may exceed eight
characters. Numbers are written as ``%.17e`` which round-trips every double
exactly; a model written and read back is bitwise identical.

Conventions shared with common solvers:

* the objective row is ``obj``; its RHS entry holds the negated constant;
* integer columns sit between ``INTORG``/``INTEND`` markers;
* binaries with bounds [0, 1] are announced with a ``BV`` bound. Common
  readers discard any other bound given for a ``BV`` column, so a binary
  with tightened bounds is written as an integer with ``LO``/``UP`` bounds,
  preceded by a ``*BINARY <name>`` comment that this reader honours and
  others skip;
* every other column gets explicit bounds (``FX``, ``FR``, ``MI``, ``LO``,
  ``UP``), so reader defaults never matter.
"""

from __future__ import annotations

import math
import os
from collections import defaultdict

import numpy as np
import scipy.sparse as sp

from .model import BINARY, CONTINUOUS, EQ, GE, INTEGER, LE, MilpModel

OBJ_ROW = "obj"
_SENSE_CODE = {LE: "L", GE: "G", EQ: "E"}
_CODE_SENSE = {v: k for k, v in _SENSE_CODE.items()}


class MpsError(ValueError):
    """Malformed MPS input; the message carries the offending line number."""

    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def _num(v: float) -> str:
    return "%.17e" % v


def write_mps(model: MilpModel, path) -> None:
    """Write ``model`` to ``path`` in MPS format."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(format_mps(model))


def format_mps(model: MilpModel) -> str:
    if OBJ_ROW in model.con_names:
        raise ValueError(f"constraint name {OBJ_ROW!r} is reserved for the objective")
    out = [f"NAME {model.name or 'model'}", "ROWS", f" N {OBJ_ROW}"]
    out += [f" {_SENSE_CODE[s]} {name}" for name, s in zip(model.con_names, model.senses)]
    out.append("COLUMNS")
    csc = model.A.tocsc()
    csc.sort_indices()
    in_int = False
    marker = 0
    for j, name in enumerate(model.var_names):
        is_int = model.var_types[j] != CONTINUOUS
        if is_int != in_int:
            tag = "INTORG" if is_int else "INTEND"
            out.append(f" MARKER{marker:04d} 'MARKER' '{tag}'")
            marker += 1
            in_int = is_int
        lo, hi = csc.indptr[j], csc.indptr[j + 1]
        entries = []
        if model.c[j] != 0.0 or lo == hi:
            entries.append((OBJ_ROW, model.c[j]))
        entries += [(model.con_names[i], v) for i, v in zip(csc.indices[lo:hi], csc.data[lo:hi])]
        out += [f" {name} {row} {_num(v)}" for row, v in entries]
    if in_int:
        out.append(f" MARKER{marker:04d} 'MARKER' 'INTEND'")
    out.append("RHS")
    if model.constant != 0.0:
        out.append(f" RHS {OBJ_ROW} {_num(-model.constant)}")
    out += [f" RHS {name} {_num(v)}" for name, v in zip(model.con_names, model.rhs) if v != 0.0]
    out.append("BOUNDS")
    for j, name in enumerate(model.var_names):
        out += _bound_lines(name, model.lower[j], model.upper[j], model.var_types[j])
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def _bound_lines(name, lo, hi, vtype):
    if vtype == BINARY:
        if lo == 0.0 and hi == 1.0:
            return [f" BV BND {name}"]
        return [f"*BINARY {name}", f" LO BND {name} {_num(lo)}", f" UP BND {name} {_num(hi)}"]
    if lo == hi:
        return [f" FX BND {name} {_num(lo)}"]
    if lo == -math.inf and hi == math.inf:
        return [f" FR BND {name}"]
    lines = []
    if lo == -math.inf:
        lines.append(f" MI BND {name}")
    else:
        lines.append(f" LO BND {name} {_num(lo)}")
    if hi == math.inf:
        lines.append(f" PL BND {name}")
    else:
        lines.append(f" UP BND {name} {_num(hi)}")
    return lines


def read_mps(path) -> MilpModel:
    """Parse an MPS file (the dialect written by :func:`write_mps`, plus the
    usual free-format variations)."""
    with open(path, encoding="ascii") as fh:
        text = fh.read()
    name = os.path.splitext(os.path.basename(str(path)))[0]
    return parse_mps(text, default_name=name)


def parse_mps(text: str, default_name: str = "model") -> MilpModel:
    model_name = default_name
    section = None
    obj_row = None
    row_names: list[str] = []
    row_index: dict[str, int] = {}
    senses: list[str] = []
    col_names: list[str] = []
    col_index: dict[str, int] = {}
    col_int: list[bool] = []
    entries: dict[tuple[int, int], float] = {}
    cost: dict[int, float] = defaultdict(float)
    rhs: dict[int, float] = {}
    constant = 0.0
    bounds: dict[int, list] = {}
    binaries: set[int] = set()
    explicit_lo: set[int] = set()
    in_int = False
    maximize = False
    seen_end = False

    def col(name, lineno):
        if name not in col_index:
            raise MpsError(lineno, f"unknown column {name!r}")
        return col_index[name]

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if line.startswith("*BINARY") and section == "BOUNDS":
            parts = line.split()
            if len(parts) != 2:
                raise MpsError(lineno, "bad *BINARY hint")
            binaries.add(col(parts[1], lineno))
            continue
        if not line.strip() or line.lstrip().startswith("*"):
            continue
        fields = line.split()
        if not raw[0].isspace():
            head = fields[0].upper()
            if head == "NAME":
                model_name = fields[1] if len(fields) > 1 else default_name
                section = "NAME"
            elif head in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES", "OBJSENSE"):
                section = head
                if head == "OBJSENSE" and len(fields) > 1:
                    maximize = fields[1].upper().startswith("MAX")
            elif head == "ENDATA":
                seen_end = True
                break
            else:
                raise MpsError(lineno, f"unknown section {fields[0]!r}")
            continue
        if section == "OBJSENSE":
            maximize = fields[0].upper().startswith("MAX")
        elif section == "ROWS":
            if len(fields) != 2:
                raise MpsError(lineno, "ROWS entry needs a type and a name")
            code, rname = fields[0].upper(), fields[1]
            if code == "N":
                if obj_row is None:
                    obj_row = rname
                continue
            if code not in _CODE_SENSE:
                raise MpsError(lineno, f"bad row type {fields[0]!r}")
            if rname in row_index:
                raise MpsError(lineno, f"duplicate row {rname!r}")
            row_index[rname] = len(row_names)
            row_names.append(rname)
            senses.append(_CODE_SENSE[code])
        elif section == "COLUMNS":
            if len(fields) >= 3 and fields[1].strip("'").upper() == "MARKER":
                tag = fields[2].strip("'").upper()
                if tag == "INTORG":
                    in_int = True
                elif tag == "INTEND":
                    in_int = False
                else:
                    raise MpsError(lineno, f"bad marker {fields[2]!r}")
                continue
            if len(fields) not in (3, 5):
                raise MpsError(lineno, "COLUMNS entry needs 3 or 5 fields")
            cname = fields[0]
            if cname not in col_index:
                col_index[cname] = len(col_names)
                col_names.append(cname)
                col_int.append(in_int)
            j = col_index[cname]
            for rname, sval in zip(fields[1::2], fields[2::2]):
                val = _parse_float(sval, lineno)
                if rname == obj_row:
                    cost[j] += val
                elif rname in row_index:
                    if val != 0.0:
                        entries[(row_index[rname], j)] = val
                else:
                    raise MpsError(lineno, f"unknown row {rname!r}")
        elif section == "RHS":
            if len(fields) not in (2, 3, 4, 5):
                raise MpsError(lineno, "bad RHS entry")
            pairs = fields[1:] if len(fields) % 2 == 1 else fields
            for rname, sval in zip(pairs[0::2], pairs[1::2]):
                val = _parse_float(sval, lineno)
                if rname == obj_row:
                    constant = -val
                elif rname in row_index:
                    rhs[row_index[rname]] = val
                else:
                    raise MpsError(lineno, f"unknown row {rname!r}")
        elif section == "RANGES":
            raise MpsError(lineno, "RANGES are not supported")
        elif section == "BOUNDS":
            code = fields[0].upper()
            if code in ("FR", "MI", "PL", "BV"):
                if len(fields) not in (2, 3):
                    raise MpsError(lineno, f"bad {code} bound")
                j = col(fields[-1], lineno)
                val = None
            else:
                if len(fields) not in (3, 4):
                    raise MpsError(lineno, f"bad {code} bound")
                j = col(fields[-2], lineno)
                val = _parse_float(fields[-1], lineno)
            lo, hi = bounds.setdefault(j, [0.0, math.inf])
            if code in ("LO", "LI", "FX", "MI", "FR", "BV"):
                explicit_lo.add(j)
            if code == "LO":
                lo = val
            elif code == "UP":
                hi = val
                if val < 0 and j not in explicit_lo:
                    lo = -math.inf
            elif code == "FX":
                lo = hi = val
            elif code == "FR":
                lo, hi = -math.inf, math.inf
            elif code == "MI":
                lo = -math.inf
            elif code == "PL":
                hi = math.inf
            elif code == "BV":
                lo, hi = 0.0, 1.0
                binaries.add(j)
            elif code in ("LI", "UI"):
                col_int[j] = True
                if code == "LI":
                    lo = val
                else:
                    hi = val
            else:
                raise MpsError(lineno, f"unknown bound type {fields[0]!r}")
            bounds[j] = [lo, hi]
        else:
            raise MpsError(lineno, "data line outside of a section")
    if not seen_end:
        raise MpsError(len(text.splitlines()), "missing ENDATA")

    n, m = len(col_names), len(row_names)
    lower = np.zeros(n)
    upper = np.full(n, math.inf)
    types = []
    for j in range(n):
        if j in bounds:
            lower[j], upper[j] = bounds[j]
        elif col_int[j]:
            upper[j] = math.inf
        if j in binaries:
            types.append(BINARY)
        elif col_int[j]:
            types.append(INTEGER)
        else:
            types.append(CONTINUOUS)
    c = np.zeros(n)
    for j, v in cost.items():
        c[j] = v
    if maximize:
        c, constant = -c, -constant
    if entries:
        keys = np.array(list(entries.keys()), dtype=np.int64)
        vals = np.array(list(entries.values()))
        A = sp.coo_matrix((vals, (keys[:, 0], keys[:, 1])), shape=(m, n)).tocsr()
    else:
        A = sp.csr_matrix((m, n))
    b = np.array([rhs.get(i, 0.0) for i in range(m)])
    return MilpModel(tuple(col_names), lower, upper, tuple(types), tuple(row_names), A,
                     tuple(senses), b, c, constant, model_name)


def _parse_float(s: str, lineno: int) -> float:
    try:
        v = float(s)
    except ValueError:
        raise MpsError(lineno, f"bad number {s!r}") from None
    if math.isnan(v):
        raise MpsError(lineno, "NaN value")
    return v
