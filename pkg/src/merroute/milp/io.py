"""MPS / LP emission and parsing, plus solver solution files.

MPS output uses whitespace-delimited fields so long variable names survive;
readers that insist on strict column positions need names of at most eight
characters, which the builders in this package do not produce.
"""

from __future__ import annotations

import math
import re
from pathlib import Path

from .model import MilpModel, ModelError, Sense, Solution, VarKind

_LP_TERMS_PER_LINE = 8


def _num(value: float) -> str:
    value = float(value)
    if value == 0.0:
        return "0"
    if value.is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(value)


def _ensure_nonempty(model: MilpModel) -> None:
    if model.is_empty():
        raise ModelError("cannot emit an empty model")


def emit_model(model: MilpModel, path: str | Path, fmt: str | None = None) -> Path:
    """Write ``model`` as ``mps`` or ``lp`` (inferred from the suffix if not given)."""
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt == "mps":
        text = to_mps(model)
    elif fmt == "lp":
        text = to_lp(model)
    else:
        raise ValueError(f"unknown model format {fmt!r}")
    path.write_text(text)
    return path


def read_model(path: str | Path, fmt: str | None = None) -> MilpModel:
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).lower()
    if fmt == "mps":
        return parse_mps(path.read_text())
    if fmt == "lp":
        return parse_lp(path.read_text())
    raise ValueError(f"unknown model format {fmt!r}")


# --------------------------------------------------------------------------- MPS

_ROW_TYPE = {Sense.LE: "L", Sense.GE: "G", Sense.EQ: "E"}
_OBJ_ROW = "obj"


def to_mps(model: MilpModel) -> str:
    _ensure_nonempty(model)
    lines = [f"NAME          {model.name}"]
    lines += ["OBJSENSE", "    MAX" if model.objective.sense == "max" else "    MIN"]
    lines.append("ROWS")
    lines.append(f" N  {_OBJ_ROW}")
    for con in model.constraints:
        lines.append(f" {_ROW_TYPE[con.sense]}  {con.name}")

    columns: list[list[tuple[str, float]]] = [[] for _ in model.variables]
    for coef, var in model.objective.terms:
        columns[var.index].append((_OBJ_ROW, coef))
    for con in model.constraints:
        for coef, var in con.terms:
            columns[var.index].append((con.name, coef))

    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for var in model.variables:
        if var.is_binary and not in_int:
            lines.append(f"    MARKER{marker:04d}  'MARKER'  'INTORG'")
            in_int = True
        elif not var.is_binary and in_int:
            lines.append(f"    MARKER{marker:04d}  'MARKER'  'INTEND'")
            marker += 1
            in_int = False
        entries = columns[var.index] or [(_OBJ_ROW, 0.0)]
        for row, coef in entries:
            lines.append(f"    {var.name}  {row}  {_num(coef)}")
    if in_int:
        lines.append(f"    MARKER{marker:04d}  'MARKER'  'INTEND'")

    lines.append("RHS")
    for con in model.constraints:
        if con.rhs != 0.0:
            lines.append(f"    RHS  {con.name}  {_num(con.rhs)}")

    lines.append("BOUNDS")
    for var in model.variables:
        if var.is_binary:
            lines.append(f" BV BND  {var.name}")
            continue
        lb, ub = var.lb, var.ub
        if lb == ub:
            lines.append(f" FX BND  {var.name}  {_num(lb)}")
            continue
        if lb == -math.inf and ub == math.inf:
            lines.append(f" FR BND  {var.name}")
            continue
        if lb == -math.inf:
            lines.append(f" MI BND  {var.name}")
        elif lb != 0.0:
            lines.append(f" LO BND  {var.name}  {_num(lb)}")
        if ub != math.inf:
            lines.append(f" UP BND  {var.name}  {_num(ub)}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


def parse_mps(text: str) -> MilpModel:
    """Parse free-format MPS (the subset written by :func:`to_mps` plus common variants)."""
    section = None
    name = "model"
    sense = "min"
    obj_row = None
    row_order: list[str] = []
    row_sense: dict[str, Sense] = {}
    row_terms: dict[str, list[tuple[float, str]]] = {}
    rhs: dict[str, float] = {}
    obj_terms: list[tuple[float, str]] = []
    col_order: list[str] = []
    col_int: dict[str, bool] = {}
    bounds: dict[str, list[float]] = {}
    in_int = False

    for lineno, raw in enumerate(text.splitlines(), 1):
        if not raw.strip() or raw.lstrip().startswith("*"):
            continue
        tokens = raw.split()
        if not raw[0].isspace():
            head = tokens[0].upper()
            if head == "NAME":
                name = tokens[1] if len(tokens) > 1 else name
                section = None
            elif head == "OBJSENSE":
                section = "OBJSENSE"
                if len(tokens) > 1:
                    sense = "max" if tokens[1].upper().startswith("MAX") else "min"
            elif head in ("ROWS", "COLUMNS", "RHS", "BOUNDS", "RANGES"):
                section = head
                if head == "RANGES":
                    raise ModelError("RANGES section is not supported")
            elif head == "ENDATA":
                break
            else:
                raise ModelError(f"line {lineno}: unknown MPS section {tokens[0]!r}")
            continue

        if section == "OBJSENSE":
            sense = "max" if tokens[0].upper().startswith("MAX") else "min"
        elif section == "ROWS":
            kind, row = tokens[0].upper(), tokens[1]
            if kind == "N":
                if obj_row is None:
                    obj_row = row
                continue
            row_sense[row] = {"L": Sense.LE, "G": Sense.GE, "E": Sense.EQ}[kind]
            row_order.append(row)
            row_terms[row] = []
        elif section == "COLUMNS":
            if len(tokens) >= 3 and tokens[1].strip("'\"").upper() == "MARKER":
                marker = tokens[2].strip("'\"").upper()
                in_int = marker == "INTORG"
                continue
            col = tokens[0]
            if col not in col_int:
                col_order.append(col)
                col_int[col] = in_int
            pairs = tokens[1:]
            for row, val in zip(pairs[::2], pairs[1::2]):
                coef = float(val)
                if row == obj_row:
                    obj_terms.append((coef, col))
                elif row in row_terms:
                    row_terms[row].append((coef, col))
                else:
                    raise ModelError(f"line {lineno}: unknown row {row!r}")
        elif section == "RHS":
            pairs = tokens[1:] if len(tokens) % 2 == 1 else tokens
            for row, val in zip(pairs[::2], pairs[1::2]):
                if row != obj_row:
                    rhs[row] = float(val)
        elif section == "BOUNDS":
            kind = tokens[0].upper()
            col = tokens[2] if len(tokens) >= 3 and tokens[2] in col_int else tokens[1]
            val = float(tokens[-1]) if kind in ("UP", "LO", "FX") else None
            b = bounds.setdefault(col, [0.0, math.inf])
            if kind == "UP":
                b[1] = val
            elif kind == "LO":
                b[0] = val
            elif kind == "FX":
                b[0] = b[1] = val
            elif kind == "FR":
                b[0], b[1] = -math.inf, math.inf
            elif kind == "MI":
                b[0] = -math.inf
            elif kind == "PL":
                b[1] = math.inf
            elif kind == "BV":
                b[0], b[1] = 0.0, 1.0
                col_int[col] = True
            else:
                raise ModelError(f"line {lineno}: unsupported bound type {kind!r}")

    model = MilpModel(name)
    for col in col_order:
        lb, ub = bounds.get(col, [0.0, math.inf])
        binary = col_int[col] and lb >= 0.0 and ub <= 1.0
        if col_int[col] and not binary:
            raise ModelError(f"general integer column {col!r} is not supported")
        model.add_var(col, VarKind.BINARY if binary else VarKind.CONTINUOUS, lb, ub)
    for row in row_order:
        model.add_constraint(
            [(c, model.var(v)) for c, v in row_terms[row]], row_sense[row], rhs.get(row, 0.0), row
        )
    model.set_objective([(c, model.var(v)) for c, v in obj_terms], sense)
    return model


# ---------------------------------------------------------------------------- LP


def _lp_expr(terms) -> list[str]:
    pieces = []
    for coef, var in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        pieces.append(f"{sign} {var.name}" if mag == 1.0 else f"{sign} {_num(mag)} {var.name}")
    if not pieces:
        return ["0"]
    lines = []
    for k in range(0, len(pieces), _LP_TERMS_PER_LINE):
        lines.append(" ".join(pieces[k : k + _LP_TERMS_PER_LINE]))
    return lines


def to_lp(model: MilpModel) -> str:
    _ensure_nonempty(model)
    out = [f"\\ {model.name}"]
    out.append("Maximize" if model.objective.sense == "max" else "Minimize")
    obj_lines = _lp_expr(model.objective.terms)
    if model.objective.terms:
        out.append(f" obj: {obj_lines[0]}")
        out += [f"   {ln}" for ln in obj_lines[1:]]
    else:
        # An objective needs at least one variable reference.
        out.append(f" obj: 0 {model.variables[0].name}")
    out.append("Subject To")
    for con in model.constraints:
        body = _lp_expr(con.terms)
        op = {Sense.LE: "<=", Sense.GE: ">=", Sense.EQ: "="}[con.sense]
        if len(body) == 1:
            out.append(f" {con.name}: {body[0]} {op} {_num(con.rhs)}")
        else:
            out.append(f" {con.name}: {body[0]}")
            out += [f"   {ln}" for ln in body[1:-1]]
            out.append(f"   {body[-1]} {op} {_num(con.rhs)}")
    out.append("Bounds")
    for var in model.variables:
        if var.is_binary:
            continue
        lb, ub = var.lb, var.ub
        if lb == 0.0 and ub == math.inf:
            continue
        if lb == -math.inf and ub == math.inf:
            out.append(f" {var.name} free")
        elif lb == ub:
            out.append(f" {var.name} = {_num(lb)}")
        else:
            lo = "-inf" if lb == -math.inf else _num(lb)
            hi = "+inf" if ub == math.inf else _num(ub)
            out.append(f" {lo} <= {var.name} <= {hi}")
    binaries = [v.name for v in model.variables if v.is_binary]
    if binaries:
        out.append("Binaries")
        for k in range(0, len(binaries), 10):
            out.append(" " + " ".join(binaries[k : k + 10]))
    out.append("End")
    return "\n".join(out) + "\n"


_LP_SECTIONS = {
    "maximize": "max", "maximum": "max", "max": "max",
    "minimize": "min", "minimum": "min", "min": "min",
    "subject to": "st", "such that": "st", "st": "st", "s.t.": "st",
    "bounds": "bounds", "bound": "bounds",
    "binaries": "bin", "binary": "bin", "bin": "bin",
    "generals": "gen", "general": "gen", "gen": "gen",
    "end": "end",
}
_TOKEN = re.compile(r"<=|>=|=<|=>|=|<|>|[+-]|[^\s+\-<>=:]+|:")


def _parse_linear(tokens: list[str]) -> tuple[list[tuple[float, str]], float]:
    """Parse ``[+|-] [coef] name ...`` into terms and a constant."""
    terms: list[tuple[float, str]] = []
    const = 0.0
    sign = 1.0
    coef = None
    for tok in tokens:
        if tok == "+":
            continue
        if tok == "-":
            sign = -sign
            continue
        try:
            num = float(tok)
        except ValueError:
            num = None
        if num is not None and not tok.lower().startswith(("inf", "nan")):
            if coef is not None:
                const += sign * coef
                sign = 1.0
            coef = num
            continue
        terms.append((sign * (1.0 if coef is None else coef), tok))
        sign, coef = 1.0, None
    if coef is not None:
        const += sign * coef
    return terms, const


def _parse_bound_value(tok: list[str]) -> float:
    text = "".join(tok).lower()
    if text in ("-inf", "-infinity"):
        return -math.inf
    if text in ("inf", "+inf", "infinity", "+infinity"):
        return math.inf
    return float(text)


def parse_lp(text: str) -> MilpModel:
    """Parse the CPLEX-LP subset written by :func:`to_lp`."""
    statements: dict[str, list[str]] = {"obj": [], "st": [], "bounds": [], "bin": [], "gen": []}
    sense = "min"
    section = None
    name = "model"
    buf: list[str] = []

    def flush():
        if buf and section is not None:
            statements[section].append(" ".join(buf))
        buf.clear()

    for raw in text.splitlines():
        if raw.startswith("\\"):
            if name == "model" and raw[1:].strip():
                name = raw[1:].strip()
            continue
        line = raw.split("\\", 1)[0]
        key = line.strip().lower()
        if key in _LP_SECTIONS:
            flush()
            tag = _LP_SECTIONS[key]
            if tag == "end":
                section = None
                break
            if tag in ("max", "min"):
                sense, section = tag, "obj"
            else:
                section = tag
            continue
        if not line.strip():
            continue
        if section in ("bin", "gen", "bounds"):
            flush()
            buf.append(line.strip())
            flush()
            continue
        # Continuation lines start with whitespace; a new row starts at column 1 or with "name:".
        if section == "st" and re.match(r"^\s*[^\s:]+\s*:", line) and buf:
            flush()
        buf.append(line.strip())
    flush()

    var_bounds: dict[str, list[float]] = {}
    binaries: set[str] = set()
    order: list[str] = []

    def touch(vname: str):
        if vname not in var_bounds:
            var_bounds[vname] = [0.0, math.inf]
            order.append(vname)

    obj_terms: list[tuple[float, str]] = []
    for stmt in statements["obj"]:
        body = stmt.split(":", 1)[1] if ":" in stmt else stmt
        terms, _ = _parse_linear(_TOKEN.findall(body))
        obj_terms += terms

    rows = []
    for k, stmt in enumerate(statements["st"]):
        if ":" in stmt:
            rname, body = (s.strip() for s in stmt.split(":", 1))
        else:
            rname, body = f"R{k}", stmt
        toks = _TOKEN.findall(body)
        ops = [i for i, t in enumerate(toks) if t in ("<=", ">=", "=<", "=>", "=", "<", ">")]
        if len(ops) != 1:
            raise ModelError(f"row {rname!r}: expected exactly one comparison operator")
        i = ops[0]
        lhs_terms, lhs_const = _parse_linear(toks[:i])
        rhs_terms, rhs_const = _parse_linear(toks[i + 1 :])
        terms = lhs_terms + [(-c, v) for c, v in rhs_terms]
        op = {"<=": Sense.LE, "=<": Sense.LE, "<": Sense.LE, ">=": Sense.GE, "=>": Sense.GE,
              ">": Sense.GE, "=": Sense.EQ}[toks[i]]
        rows.append((rname, terms, op, rhs_const - lhs_const))

    for c, v in obj_terms:
        touch(v)
    for _, terms, _, _ in rows:
        for _, v in terms:
            touch(v)

    for stmt in statements["bounds"]:
        toks = _TOKEN.findall(stmt)
        low = [t.lower() for t in toks]
        if len(toks) == 2 and low[1] == "free":
            touch(toks[0])
            var_bounds[toks[0]] = [-math.inf, math.inf]
            continue
        ops = [i for i, t in enumerate(toks) if t in ("<=", ">=", "=<", "=>", "=", "<", ">")]
        if len(ops) == 2:
            lo = _parse_bound_value(toks[: ops[0]])
            vname = toks[ops[0] + 1]
            hi = _parse_bound_value(toks[ops[1] + 1 :])
            touch(vname)
            var_bounds[vname] = [lo, hi]
        elif len(ops) == 1:
            i = ops[0]
            left, right, op = toks[:i], toks[i + 1 :], toks[i]
            if len(left) == 1 and not re.match(r"^[\d.]", left[0]) and left[0].lower() not in ("inf", "-inf"):
                vname, val = left[0], _parse_bound_value(right)
                flip = False
            else:
                vname, val = right[0], _parse_bound_value(left)
                flip = True
            touch(vname)
            if op == "=":
                var_bounds[vname] = [val, val]
            elif (op in ("<=", "=<", "<")) != flip:
                var_bounds[vname][1] = val
            else:
                var_bounds[vname][0] = val
        else:
            raise ModelError(f"cannot parse bound {stmt!r}")

    for stmt in statements["bin"]:
        for vname in stmt.split():
            touch(vname)
            binaries.add(vname)
    if statements["gen"]:
        raise ModelError("general integer variables are not supported")

    model = MilpModel(name)
    for vname in order:
        lb, ub = var_bounds[vname]
        if vname in binaries:
            model.add_var(vname, VarKind.BINARY)
        else:
            model.add_var(vname, VarKind.CONTINUOUS, lb, ub)
    for rname, terms, op, rhs in rows:
        model.add_constraint([(c, model.var(v)) for c, v in terms], op, rhs, rname)
    model.set_objective([(c, model.var(v)) for c, v in obj_terms], sense)
    return model


# ------------------------------------------------------------------- solutions

_STATUS_PATTERNS = [
    (re.compile(r"^\s*(optimal|optimum)", re.I), "optimal"),
    (re.compile(r"^\s*(integer\s+)?infeasible", re.I), "infeasible"),
    (re.compile(r"^\s*stopped on time", re.I), "time-limit"),
    (re.compile(r"^\s*(stopped on (gap|iterations|nodes|solutions|difficulties)|feasible)", re.I), "gap-limit"),
    (re.compile(r"^\s*unbounded", re.I), "infeasible"),
]


def parse_solution_text(text: str, model: MilpModel) -> tuple[str | None, float | None, dict[str, float]]:
    """Parse a solution file into ``(status, objective, values)``.

    Accepts plain ``<name> <value>`` lines (optionally comma separated) and the
    ``<index> <name> <value> <reduced cost>`` layout some solvers write.  The
    first line may carry a status word and ``objective value <number>``.
    Variables not listed are zero.
    """
    status = None
    objective = None
    values: dict[str, float] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if status is None:
            matched = False
            for pat, tag in _STATUS_PATTERNS:
                if pat.search(line):
                    status, matched = tag, True
                    m = re.search(r"objective value\s*[:=]?\s*([-+\d.eE]+)", line, re.I)
                    if m:
                        objective = float(m.group(1))
                    break
            m = re.match(r"^status\s*[:=,]\s*(\S+)", line, re.I)
            if m:
                word = m.group(1).lower()
                status = word if word in Solution.STATUSES else "gap-limit"
                matched = True
            if matched:
                continue
        m = re.match(r"^objective(\s+value)?\s*[:=,]\s*([-+\d.eE]+)", line, re.I)
        if m:
            objective = float(m.group(2))
            continue
        tokens = line.replace(",", " ").replace("**", " ").split()
        if len(tokens) >= 2 and tokens[0] in model:
            values[tokens[0]] = float(tokens[1])
        elif len(tokens) >= 3 and tokens[1] in model:
            values[tokens[1]] = float(tokens[2])
    return status, objective, values
