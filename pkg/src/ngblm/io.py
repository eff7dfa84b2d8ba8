"""CSV and matrix-file ingestion, and deterministic output formatting."""

import csv
import io
import json

import numpy as np

from .errors import ParseError

GENERATOR = "numpy.random.PCG64"


class Table:
    """Numeric columns read from a CSV file, in file order."""

    def __init__(self, columns, names):
        self.columns = columns
        self.names = list(names)

    def __getitem__(self, name):
        try:
            return self.columns[name]
        except KeyError:
            raise ParseError(
                f"column {name!r} not found; available: {', '.join(self.names)}"
            ) from None

    def __contains__(self, name):
        return name in self.columns

    def __len__(self):
        return len(next(iter(self.columns.values()))) if self.columns else 0

    def matrix(self, names):
        return np.column_stack([self[n] for n in names]) if names else np.zeros((len(self), 0))


def parse_csv(text, source="<string>"):
    """Parse CSV text with a header row. Lines starting with ``#`` and blank lines are skipped."""
    header = None
    rows = []
    reader = csv.reader(io.StringIO(text))
    for record in reader:
        lineno = reader.line_num
        if not record or all(not f.strip() for f in record) or record[0].lstrip().startswith("#"):
            continue
        fields = [f.strip() for f in record]
        if header is None:
            if len(set(fields)) != len(fields):
                raise ParseError(f"{source}: duplicate column names in header", lineno)
            header = fields
            continue
        if len(fields) != len(header):
            raise ParseError(
                f"{source}: row has {len(fields)} fields, header has {len(header)}", lineno
            )
        try:
            rows.append([float(f) for f in fields])
        except ValueError:
            bad = next(f for f in fields if not _is_float(f))
            raise ParseError(f"{source}: cannot parse {bad!r} as a number", lineno) from None
    if header is None:
        raise ParseError(f"{source}: no header row")
    data = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return Table({name: data[:, j].copy() for j, name in enumerate(header)}, header)


def _is_float(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def read_csv(path):
    with open(path, encoding="utf-8") as fh:
        return parse_csv(fh.read(), source=str(path))


def read_matrix(path):
    """Whitespace-delimited matrix file."""
    try:
        m = np.loadtxt(path, ndmin=2)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from None
    return m


def fmt(x):
    """Shortest round-trip text for a float."""
    x = float(x)
    if x != x:
        return "nan"
    if x in (float("inf"), float("-inf")):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def header_line(command, seed, **extra):
    parts = [f"ngblm {command}", f"generator={GENERATOR}", f"seed={seed}"]
    parts += [f"{k}={v}" for k, v in extra.items()]
    return "# " + " ".join(parts)


def format_csv(header, names, rows):
    lines = [header, ",".join(names)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {k: to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def format_json(report):
    return json.dumps(to_jsonable(report), indent=2) + "\n"
