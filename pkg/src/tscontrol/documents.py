"""Input documents for the command line front end.

A system document is a JSON object::

    {
      "schema": "tscontrol.system/1",
      "name": "...",
      "timescale": "points 0 1 2 3 4"          (text or list of entries),
      "A": [[...], ...], "B": ..., "C": ..., "D": ...,
      "x0": [...], "xf": [...], "input": [...],
      "options": {"t0": .., "tf": .., "tol": .., "horizons": [..], "delta": .., "q": ..}
    }

Matrix entries are integers, ``"p/q"`` strings (both exact), floats
(accepted but flagged, which turns off the exact analyses) or one of the
time-varying presets

    {"poly": [c0, c1, ...]}          c0 + c1 t + c2 t^2 + ...
    {"sin": [a, w, phi]}             a sin(w t + phi)
    {"cos": [a, w, phi]}             a cos(w t + phi)
    {"ts_exp": [c, lam, s]}          c e_lam(t, s) on the document's time scale
    {"sum": [entry, entry, ...]}

A transfer-function document is ``{"schema": "tscontrol.tf/1", "G": ...}``
with entries in the ``"n0,n1,... / d0,d1,..."`` text format, or a plain
text file with one row per line and entries separated by ``;``.

Parsing produces a canonical form; emitting and re-parsing it is a fixed
point. Errors carry the JSON line/column or the field path.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .rational import RationalFn, RationalMatrix, _fmt
from .timescale import TimeScaleError, build_grid, parse_timescale_spec

__all__ = [
    "SYSTEM_SCHEMA",
    "TF_SCHEMA",
    "DocumentError",
    "SystemDocument",
    "TransferDocument",
    "parse_system_document",
    "parse_transfer_document",
    "load_document",
    "compile_entry",
]

SYSTEM_SCHEMA = "tscontrol.system/1"
TF_SCHEMA = "tscontrol.tf/1"
PRESETS = ("poly", "sin", "cos", "ts_exp", "sum")
OPTION_KEYS = ("t0", "tf", "tol", "horizons", "delta", "q")
SYSTEM_KEYS = ("schema", "name", "timescale", "A", "B", "C", "D", "x0", "xf", "input", "options")


class DocumentError(ValueError):
    """Invalid input document; ``where`` is a field path or line:column."""

    def __init__(self, msg, where=None):
        self.where = where
        super().__init__(f"{where}: {msg}" if where else msg)


# ---------------------------------------------------------------- canonical values

def _number(x, where, floats):
    if isinstance(x, bool) or x is None:
        raise DocumentError(f"expected a number, got {json.dumps(x)}", where)
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        if not np.isfinite(x):
            raise DocumentError("non-finite number", where)
        floats.append(where)
        return x
    if isinstance(x, str):
        try:
            f = Fraction(x.strip())
        except (ValueError, ZeroDivisionError):
            raise DocumentError(f"cannot parse {x!r} as an exact rational", where) from None
        return f.numerator if f.denominator == 1 else _fmt(f)
    raise DocumentError(f"expected a number, got {type(x).__name__}", where)


def _coeffs(x, where, floats, lengths):
    if not isinstance(x, list) or len(x) not in lengths:
        want = " or ".join(str(k) for k in lengths) if len(lengths) < 5 else "at least 1"
        raise DocumentError(f"expected a list of {want} coefficients", where)
    return [_number(c, f"{where}[{i}]", floats) for i, c in enumerate(x)]


def _entry(x, where, floats):
    if not isinstance(x, dict):
        return _number(x, where, floats)
    if len(x) != 1 or next(iter(x)) not in PRESETS:
        raise DocumentError(f"a preset is an object with one key out of {', '.join(PRESETS)}",
                            where)
    (kind, arg), = x.items()
    w = f"{where}.{kind}"
    if kind == "poly":
        return {"poly": _coeffs(arg, w, floats, range(1, 10 ** 6))}
    if kind in ("sin", "cos"):
        c = _coeffs(arg, w, floats, (2, 3))
        return {kind: c + [0] * (3 - len(c))}
    if kind == "ts_exp":
        return {kind: _coeffs(arg, w, floats, (2, 3))}
    if not isinstance(arg, list) or not arg:
        raise DocumentError("expected a nonempty list of entries", w)
    return {"sum": [_entry(e, f"{w}[{i}]", floats) for i, e in enumerate(arg)]}


def _matrix(x, name, floats, vector=None):
    """2-D list of entries; a flat list is a column (vector='col') or row."""
    if not isinstance(x, list) or not x:
        raise DocumentError("expected a nonempty list", name)
    if all(not isinstance(r, list) for r in x):
        if vector is None:
            raise DocumentError("expected a list of rows", name)
        x = [[e] for e in x] if vector == "col" else [x]
        flat = True
    else:
        flat = False
    width = None
    out = []
    for i, row in enumerate(x):
        if not isinstance(row, list):
            raise DocumentError("mixes rows and scalars", f"{name}[{i}]")
        if width is None:
            width = len(row)
        if len(row) != width or width == 0:
            raise DocumentError(f"row has {len(row)} entries, expected {width}", f"{name}[{i}]")
        out.append([_entry(e, f"{name}[{i}][{j}]" if not flat else f"{name}[{i if vector == 'col' else j}]",
                           floats) for j, e in enumerate(row)])
    return out


def _vector(x, name, floats, entries=False):
    if not isinstance(x, list) or not x:
        raise DocumentError("expected a nonempty list", name)
    f = _entry if entries else _number
    return [f(e, f"{name}[{i}]", floats) for i, e in enumerate(x)]


def _timescale(x, where="timescale"):
    if isinstance(x, str):
        items = [e for line in x.splitlines() for e in line.split("#", 1)[0].split(";")]
    elif isinstance(x, list) and all(isinstance(e, str) for e in x):
        items = x
    else:
        raise DocumentError("expected a string or a list of strings", where)
    entries = [" ".join(e.split()) for e in items if e.strip()]
    if not entries:
        raise DocumentError("empty time scale", where)
    try:
        segments = parse_timescale_spec("\n".join(entries))
        build_grid(segments)
    except TimeScaleError as exc:
        raise DocumentError(str(exc), where) from None
    return entries


def _options(x, floats):
    if not isinstance(x, dict):
        raise DocumentError("expected an object", "options")
    bad = sorted(set(x) - set(OPTION_KEYS))
    if bad:
        raise DocumentError(f"unknown option(s) {', '.join(bad)}", "options")
    out = {}
    for key in ("t0", "tf"):
        if x.get(key) is not None:
            out[key] = _number(x[key], f"options.{key}", [])
    if x.get("tol") is not None:
        tol = x["tol"]
        if isinstance(tol, bool) or not isinstance(tol, (int, float)) or tol <= 0:
            raise DocumentError("expected a positive number", "options.tol")
        out["tol"] = float(tol)
    if x.get("delta") is not None:
        d = x["delta"]
        if isinstance(d, bool) or not isinstance(d, (int, float)) or d <= 0:
            raise DocumentError("expected a positive number", "options.delta")
        out["delta"] = float(d)
    if x.get("q") is not None:
        q = x["q"]
        if isinstance(q, bool) or not isinstance(q, int) or q < 0:
            raise DocumentError("expected a nonnegative integer", "options.q")
        out["q"] = q
    if x.get("horizons") is not None:
        h = _vector(x["horizons"], "options.horizons", [])
        if any(float(Fraction(str(b))) <= float(Fraction(str(a))) for a, b in zip(h, h[1:])):
            raise DocumentError("horizons must be strictly increasing", "options.horizons")
        out["horizons"] = h
    return out


def _value(x):
    """Float value of a canonical number."""
    return float(Fraction(x)) if isinstance(x, str) else float(x)


def _exact(x):
    return Fraction(x) if isinstance(x, (int, str)) else None


# ---------------------------------------------------------------- system documents

@dataclass
class SystemDocument:
    timescale: list
    A: list
    B: list
    C: list = None
    D: list = None
    name: str = ""
    x0: list = None
    xf: list = None
    input: list = None
    options: dict = field(default_factory=dict)
    float_entries: tuple = ()

    @property
    def time_varying(self):
        return any(isinstance(e, dict) for M in (self.A, self.B, self.C, self.D) if M
                   for row in M for e in row)

    def to_dict(self):
        out = {"schema": SYSTEM_SCHEMA}
        if self.name:
            out["name"] = self.name
        out["timescale"] = list(self.timescale)
        for key in ("A", "B", "C", "D", "x0", "xf", "input"):
            v = getattr(self, key)
            if v is not None:
                out[key] = v
        if self.options:
            out["options"] = {k: self.options[k] for k in OPTION_KEYS if k in self.options}
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def grid(self):
        return build_grid(parse_timescale_spec("\n".join(self.timescale)))

    def build(self):
        """(LinearSystem, grid) described by the document."""
        from .dynamics import LinearSystem
        grid = self.grid()
        mats = [None if M is None else compile_matrix(M, grid) for M in (self.A, self.B, self.C, self.D)]
        return LinearSystem(*mats), grid

    def input_function(self, grid):
        """Callable ``t -> u(t)`` for the ``input`` field, or None."""
        if self.input is None:
            return None
        fns = [compile_entry(e, grid) for e in self.input]
        return lambda t: np.array([f(t) for f in fns])


def _json_load(text, source):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, f"{source}:{exc.lineno}:{exc.colno}") from None


def parse_system_document(data, source="<document>"):
    """Validate a system document (JSON text or a decoded dict)."""
    if isinstance(data, str):
        data = _json_load(data, source)
    if not isinstance(data, dict):
        raise DocumentError("top level must be a JSON object", source)
    schema = data.get("schema", SYSTEM_SCHEMA)
    if schema != SYSTEM_SCHEMA:
        raise DocumentError(f"unsupported schema {schema!r}, expected {SYSTEM_SCHEMA!r}", "schema")
    bad = sorted(set(data) - set(SYSTEM_KEYS))
    if bad:
        raise DocumentError(f"unknown field(s) {', '.join(bad)}", source)
    for key in ("timescale", "A", "B"):
        if key not in data:
            raise DocumentError("required field is missing", key)
    name = data.get("name", "")
    if not isinstance(name, str):
        raise DocumentError("expected a string", "name")

    floats = []
    doc = SystemDocument(
        timescale=_timescale(data["timescale"]),
        A=_matrix(data["A"], "A", floats),
        B=_matrix(data["B"], "B", floats, "col"),
        C=None if data.get("C") is None else _matrix(data["C"], "C", floats, "row"),
        D=None if data.get("D") is None else _matrix(data["D"], "D", floats, "row"),
        name=name,
        x0=None if data.get("x0") is None else _vector(data["x0"], "x0", floats),
        xf=None if data.get("xf") is None else _vector(data["xf"], "xf", floats),
        input=None if data.get("input") is None else _vector(data["input"], "input", floats, True),
        options=_options(data.get("options", {}), floats),
    )
    doc.float_entries = tuple(floats)
    _check_dims(doc)
    return doc


def _check_dims(doc):
    n = len(doc.A)
    if len(doc.A[0]) != n:
        raise DocumentError(f"must be square, got {n}x{len(doc.A[0])}", "A")
    if len(doc.B) != n:
        raise DocumentError(f"has {len(doc.B)} rows, A is {n}x{n}", "B")
    m = len(doc.B[0])
    p = n
    if doc.C is not None:
        if len(doc.C[0]) != n:
            raise DocumentError(f"has {len(doc.C[0])} columns, A is {n}x{n}", "C")
        p = len(doc.C)
    if doc.D is not None and (len(doc.D), len(doc.D[0])) != (p, m):
        raise DocumentError(f"has shape {len(doc.D)}x{len(doc.D[0])}, expected {p}x{m}", "D")
    for key in ("x0", "xf"):
        v = getattr(doc, key)
        if v is not None and len(v) != n:
            raise DocumentError(f"has length {len(v)}, expected {n}", key)
    if doc.input is not None and len(doc.input) != m:
        raise DocumentError(f"has length {len(doc.input)}, expected {m} (number of inputs)", "input")
    grid = doc.grid()
    for key in ("t0", "tf"):
        if key in doc.options:
            t = _value(doc.options[key])
            try:
                grid.index(t)
            except (TimeScaleError, KeyError, ValueError):
                raise DocumentError(f"{t!r} is not a point of the time scale", f"options.{key}") from None
    if "t0" in doc.options and "tf" in doc.options:
        if _value(doc.options["tf"]) <= _value(doc.options["t0"]):
            raise DocumentError("tf must exceed t0", "options.tf")


# ---------------------------------------------------------------- entry evaluation

class _TimeScaleExp:
    """``e_lam(t, s)`` on a grid, vectorized over nodes and dense interiors."""

    def __init__(self, grid, lam, s):
        self.grid = grid
        self.lam = lam
        f = np.where(grid.dense[:-1], np.exp(lam * grid.step[:-1]), 1.0 + grid.mu[:-1] * lam)
        self.P = np.concatenate([[1.0], np.cumprod(f)])
        self.ref = self._raw(s)

    def _raw(self, t):
        g = self.grid
        k = int(np.searchsorted(g.times, t, side="right")) - 1
        tol = 1e-12 * max(1.0, abs(t))
        if k < 0 or t > g.t_max + tol:
            raise TimeScaleError(f"t={t!r} lies outside the time scale")
        d = t - g.times[k]
        if d <= tol:
            return self.P[k]
        if k + 1 < len(g.times) and abs(g.times[k + 1] - t) <= tol:
            return self.P[k + 1]
        if not g.dense[k]:
            raise TimeScaleError(f"t={t!r} is not a point of the time scale")
        return self.P[k] * np.exp(self.lam * d)

    def __call__(self, t):
        with np.errstate(divide="ignore", invalid="ignore"):
            return self._raw(float(t)) / self.ref


def compile_entry(e, grid):
    """Callable ``t -> float`` for a canonical entry."""
    if not isinstance(e, dict):
        v = _value(e)
        return lambda t: v
    (kind, arg), = e.items()
    if kind == "poly":
        c = [_value(a) for a in arg][::-1]
        return lambda t: float(np.polyval(c, t))
    if kind in ("sin", "cos"):
        a, w, phi = (_value(x) for x in arg)
        fn = np.sin if kind == "sin" else np.cos
        return lambda t: a * float(fn(w * t + phi))
    if kind == "ts_exp":
        c, lam = _value(arg[0]), _value(arg[1])
        s = grid.t_min if len(arg) == 2 else _value(arg[2])
        ex = _TimeScaleExp(grid, lam, s)
        return lambda t: c * ex(t)
    parts = [compile_entry(x, grid) for x in arg]
    return lambda t: sum(f(t) for f in parts)


def compile_matrix(M, grid):
    """Exact (Fraction object array), float array or callable for a canonical matrix."""
    if any(isinstance(e, dict) for row in M for e in row):
        fns = [[compile_entry(e, grid) for e in row] for row in M]
        return lambda t: np.array([[f(t) for f in row] for row in fns])
    exact = [[_exact(e) for e in row] for row in M]
    if all(x is not None for row in exact for x in row):
        return np.array(exact, dtype=object)
    return np.array([[_value(e) for e in row] for row in M])


# ---------------------------------------------------------------- transfer functions

@dataclass
class TransferDocument:
    G: RationalMatrix
    text: list
    name: str = ""
    timescale: list = None
    options: dict = field(default_factory=dict)

    def to_dict(self):
        out = {"schema": TF_SCHEMA}
        if self.name:
            out["name"] = self.name
        out["G"] = self.text
        if self.timescale is not None:
            out["timescale"] = list(self.timescale)
        if self.options:
            out["options"] = {k: self.options[k] for k in OPTION_KEYS if k in self.options}
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def grid(self):
        if self.timescale is None:
            return None
        return build_grid(parse_timescale_spec("\n".join(self.timescale)))


def _tf_rows(rows):
    if isinstance(rows, str):
        rows = [[rows]]
    if not isinstance(rows, list) or not rows:
        raise DocumentError("expected an entry string or a list of rows", "G")
    if all(isinstance(r, str) for r in rows):
        rows = [rows] if len(rows) > 1 else [[rows[0]]]
    out, texts = [], []
    width = None
    for i, row in enumerate(rows):
        if not isinstance(row, list) or not row:
            raise DocumentError("expected a nonempty list of entries", f"G[{i}]")
        width = len(row) if width is None else width
        if len(row) != width:
            raise DocumentError(f"row has {len(row)} entries, expected {width}", f"G[{i}]")
        cells, cell_texts = [], []
        for j, e in enumerate(row):
            if not isinstance(e, str):
                raise DocumentError("expected a 'num / den' string", f"G[{i}][{j}]")
            try:
                f = RationalFn.parse(e)
            except (ValueError, ZeroDivisionError) as exc:
                raise DocumentError(str(exc), f"G[{i}][{j}]") from None
            cells.append(f)
            cell_texts.append(" ".join(_norm_side(x) for x in _split_entry(e)))
        out.append(cells)
        texts.append(cell_texts)
    return out, texts


def parse_transfer_document(text, source="<document>"):
    """Parse a transfer-function document (JSON or ``;``-separated text rows)."""
    stripped = text.lstrip()
    if stripped.startswith("{"):
        data = _json_load(text, source)
        schema = data.get("schema", TF_SCHEMA)
        if schema != TF_SCHEMA:
            raise DocumentError(f"unsupported schema {schema!r}, expected {TF_SCHEMA!r}", "schema")
        bad = sorted(set(data) - {"schema", "name", "G", "timescale", "options"})
        if bad:
            raise DocumentError(f"unknown field(s) {', '.join(bad)}", source)
        if "G" not in data:
            raise DocumentError("required field is missing", "G")
        raw = data["G"]
        name = data.get("name", "")
        ts = None if data.get("timescale") is None else _timescale(data["timescale"])
        opts = _options(data.get("options", {}), [])
    else:
        raw = []
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if line:
                raw.append([c.strip() for c in line.split(";")])
        if not raw:
            raise DocumentError("no transfer-function entries found", source)
        name, ts, opts = "", None, {}
    rows, texts = _tf_rows(raw)
    return TransferDocument(RationalMatrix(rows), texts, name, ts, opts)


def _split_entry(e):
    if " / " in e:
        a, b = e.split(" / ", 1)
        return a, "/", b
    if e.count("/") == 1:
        a, b = e.split("/")
        return a, "/", b
    return e, "/", "1"


def _norm_side(s):
    if s == "/":
        return s
    return ",".join(c.strip() for c in s.split(",") if c.strip())


def load_document(path):
    """Read a file and parse it as a system or transfer-function document."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise DocumentError(exc.strerror or str(exc), str(path)) from None
    if text.lstrip().startswith("{"):
        data = _json_load(text, str(path))
        if isinstance(data, dict) and (data.get("schema") == TF_SCHEMA or "G" in data):
            return parse_transfer_document(text, str(path))
        return parse_system_document(data, str(path))
    return parse_transfer_document(text, str(path))
