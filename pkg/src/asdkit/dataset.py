"""Tabular screening-data ingestion and preprocessing.

Covers the full path from raw ARFF/CSV bytes to a numeric design matrix:
schema-aware parsing with explicit missing cells, three imputation
strategies, one-hot/binary encoding with column provenance, min-max scaling
of continuous columns, dataset combination, and stratified train/test
splitting.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field
from statistics import median

import numpy as np

from .numerics import Matrix, SeededRng

__all__ = [
    "MISSING",
    "Attribute",
    "FeatureSchema",
    "DataTable",
    "ColumnInfo",
    "DesignMatrix",
    "ScaleParams",
    "parse_arff",
    "parse_csv",
    "export_arff",
    "export_csv",
    "count_missing",
    "impute",
    "encode",
    "min_max_scale",
    "apply_scale",
    "combine",
    "train_test_split",
]


class _Missing:
    """Singleton marker for a cell the source file left as '?' (or empty)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "MISSING"


MISSING = _Missing()

KIND_BINARY = "binary"
KIND_CATEGORICAL = "categorical"
KIND_CONTINUOUS = "continuous"


@dataclass(frozen=True)
class Attribute:
    name: str
    kind: str  # binary | categorical | continuous
    categories: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (KIND_BINARY, KIND_CATEGORICAL, KIND_CONTINUOUS):
            raise ValueError(f"unknown attribute kind {self.kind!r}")
        if self.kind == KIND_BINARY and len(self.categories) != 2:
            raise ValueError(f"binary attribute {self.name!r} needs exactly 2 categories")
        if self.kind == KIND_CATEGORICAL and len(self.categories) < 1:
            raise ValueError(f"categorical attribute {self.name!r} needs categories")


@dataclass(frozen=True)
class FeatureSchema:
    """Ordered attribute list; the class attribute is flagged by name."""

    attributes: tuple[Attribute, ...]
    label_name: str
    relation: str = "data"

    def __post_init__(self):
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ValueError("attribute names must be unique")
        if self.label_name not in names:
            raise ValueError(f"label attribute {self.label_name!r} not in schema")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.attributes)

    def attribute(self, name: str) -> Attribute:
        for a in self.attributes:
            if a.name == name:
                return a
        raise KeyError(name)

    def index(self, name: str) -> int:
        return self.names.index(name)

    @property
    def label(self) -> Attribute:
        return self.attribute(self.label_name)

    def with_categories(self, merged: dict[str, tuple[str, ...]]) -> "FeatureSchema":
        attrs = tuple(
            Attribute(a.name, a.kind, merged.get(a.name, a.categories))
            for a in self.attributes
        )
        return FeatureSchema(attrs, self.label_name, self.relation)


@dataclass(frozen=True)
class DataTable:
    """Raw typed records; cells are float, category token, or MISSING."""

    schema: FeatureSchema
    rows: tuple[tuple, ...]

    def __post_init__(self):
        width = len(self.schema.attributes)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} cells, schema has {width}")

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def column(self, name: str) -> tuple:
        j = self.schema.index(name)
        return tuple(row[j] for row in self.rows)

    def class_counts(self) -> dict[str, int]:
        col = self.column(self.schema.label_name)
        out: dict[str, int] = {}
        for v in col:
            if v is MISSING:
                continue
            out[v] = out.get(v, 0) + 1
        return out


def _guess_label(names: list[str]) -> str:
    for n in names:
        if n.lower() in ("class/asd", "class", "class/asd traits"):
            return n
    return names[-1]


def _strip_unquoted(body: str) -> list[str]:
    """Split a nominal {a,b,'c d'} body; quoted tokens keep inner whitespace
    verbatim (the UCI files contain categories with significant trailing
    blanks), unquoted tokens are stripped."""
    out = []
    token = []
    quoted_token = False
    quote = None
    for ch in body + ",":
        if quote:
            if ch == quote:
                quote = None
            else:
                token.append(ch)
        elif ch in ("'", '"'):
            quote = ch
            quoted_token = True
        elif ch == ",":
            text = "".join(token)
            out.append(text if quoted_token else text.strip())
            token = []
            quoted_token = False
        else:
            token.append(ch)
    if quote is not None:
        raise ValueError("unterminated quote in nominal specification")
    return out


def _parse_attr_line(line: str) -> Attribute:
    rest = line[len("@attribute"):].strip()
    if not rest:
        raise ValueError("empty @attribute line")
    if rest[0] in ("'", '"'):
        quote = rest[0]
        end = rest.index(quote, 1)
        name = rest[1:end]
        spec = rest[end + 1 :].strip()
    else:
        parts = rest.split(None, 1)
        if len(parts) != 2:
            raise ValueError(f"malformed @attribute line: {line!r}")
        name, spec = parts[0], parts[1].strip()
    if spec.startswith("{"):
        if not spec.endswith("}"):
            raise ValueError(f"malformed nominal spec for {name!r}")
        cats = tuple(_strip_unquoted(spec[1:-1]))
        if len(set(cats)) != len(cats):
            raise ValueError(f"duplicate category in {name!r}")
        kind = KIND_BINARY if len(cats) == 2 else KIND_CATEGORICAL
        return Attribute(name, kind, cats)
    if spec.lower().split()[0] in ("numeric", "real", "integer"):
        return Attribute(name, KIND_CONTINUOUS)
    raise ValueError(f"unsupported attribute type {spec!r} for {name!r}")


def _parse_cell(token: str, attr: Attribute, line_no: int):
    bare = token.strip()
    if bare in ("?", ""):
        return MISSING
    if attr.kind == KIND_CONTINUOUS:
        try:
            return float(bare)
        except ValueError:
            raise ValueError(
                f"line {line_no}: cannot parse {token!r} as number for {attr.name!r}"
            ) from None
    # quoted tokens keep inner whitespace, so try the exact token first
    if token in attr.categories:
        return token
    if bare in attr.categories:
        return bare
    raise ValueError(
        f"line {line_no}: unknown category {token!r} for attribute {attr.name!r}"
    )


def parse_arff(text: bytes | str) -> DataTable:
    """Parse the ARFF subset used by the UCI screening files.

    Supports @relation, @attribute with numeric or nominal specs, '%'
    comments, quoted tokens, and '?' missing cells.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    relation = "data"
    attrs: list[Attribute] = []
    rows: list[tuple] = []
    in_data = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("%"):
            continue
        low = line.lower()
        if not in_data:
            if low.startswith("@relation"):
                relation = line[len("@relation"):].strip().strip("'\"") or "data"
            elif low.startswith("@attribute"):
                attrs.append(_parse_attr_line(line))
            elif low.startswith("@data"):
                if not attrs:
                    raise ValueError("@data before any @attribute")
                in_data = True
            else:
                raise ValueError(f"line {line_no}: unexpected header line {line!r}")
            continue
        tokens = next(csv.reader([line], quotechar="'", skipinitialspace=True))
        if len(tokens) != len(attrs):
            raise ValueError(
                f"line {line_no}: row has {len(tokens)} cells, expected {len(attrs)}"
            )
        rows.append(tuple(_parse_cell(t, a, line_no) for t, a in zip(tokens, attrs)))
    if not in_data:
        raise ValueError("no @data section found")
    names = [a.name for a in attrs]
    schema = FeatureSchema(tuple(attrs), _guess_label(names), relation)
    return DataTable(schema, tuple(rows))


def parse_csv(text: bytes | str, schema: FeatureSchema) -> DataTable:
    """Parse RFC-4180 CSV against a known schema; empty cells are missing."""
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty CSV input") from None
    if tuple(header) != schema.names:
        raise ValueError(
            f"CSV header {tuple(header)} does not match schema {schema.names}"
        )
    rows = []
    for line_no, tokens in enumerate(reader, start=2):
        if not tokens:
            continue
        if len(tokens) != len(schema.attributes):
            raise ValueError(f"line {line_no}: arity mismatch")
        rows.append(
            tuple(
                _parse_cell(t, a, line_no)
                for t, a in zip(tokens, schema.attributes)
            )
        )
    return DataTable(schema, tuple(rows))


def _format_number(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e15:
        return str(int(v))
    return repr(float(v))


def _arff_token(text: str) -> str:
    if text == "" or any(ch in text for ch in " ,{}%'\"\t"):
        return "'" + text + "'"
    return text


def export_arff(table: DataTable) -> str:
    """Serialize a table back to ARFF; parse(export(t)) == t."""
    out = [f"@relation {_arff_token(table.schema.relation)}", ""]
    for a in table.schema.attributes:
        if a.kind == KIND_CONTINUOUS:
            out.append(f"@attribute {_arff_token(a.name)} numeric")
        else:
            cats = ",".join(_arff_token(c) for c in a.categories)
            out.append(f"@attribute {_arff_token(a.name)} {{{cats}}}")
    out.append("")
    out.append("@data")
    for row in table.rows:
        cells = []
        for v, a in zip(row, table.schema.attributes):
            if v is MISSING:
                cells.append("?")
            elif a.kind == KIND_CONTINUOUS:
                cells.append(_format_number(v))
            else:
                cells.append(_arff_token(v))
        out.append(",".join(cells))
    return "\n".join(out) + "\n"


def export_csv(table: DataTable) -> str:
    """Serialize to CSV; missing cells become empty fields."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.schema.names)
    for row in table.rows:
        cells = []
        for v, a in zip(row, table.schema.attributes):
            if v is MISSING:
                cells.append("")
            elif a.kind == KIND_CONTINUOUS:
                cells.append(_format_number(v))
            else:
                cells.append(v)
        writer.writerow(cells)
    return buf.getvalue()


def count_missing(table: DataTable) -> dict[str, int]:
    """Exact MISSING counts per attribute; key 'total' holds the sum."""
    counts = {a.name: 0 for a in table.schema.attributes}
    for row in table.rows:
        for v, a in zip(row, table.schema.attributes):
            if v is MISSING:
                counts[a.name] += 1
    counts["total"] = sum(counts.values())
    return counts


def _median_fills(table: DataTable) -> dict[str, object]:
    """Median for continuous attributes, mode for nominal ones."""
    fills: dict[str, object] = {}
    for j, a in enumerate(table.schema.attributes):
        values = [row[j] for row in table.rows if row[j] is not MISSING]
        if any(row[j] is MISSING for row in table.rows):
            if not values:
                raise ValueError(f"attribute {a.name!r} is entirely missing")
        if not values:
            continue
        if a.kind == KIND_CONTINUOUS:
            fills[a.name] = float(median(values))
        else:
            freq: dict[str, int] = {}
            for v in values:
                freq[v] = freq.get(v, 0) + 1
            top = max(freq.values())
            # deterministic tie-break: first category in schema order
            fills[a.name] = next(c for c in a.categories if freq.get(c) == top)
    return fills


def median_fill_values(table: DataTable) -> dict[str, object]:
    """Public access to the median/mode fill values (used by frozen pipelines)."""
    return _median_fills(table)


def _apply_fills(table: DataTable, fills: dict[str, object]) -> DataTable:
    rows = []
    for row in table.rows:
        rows.append(
            tuple(
                fills[a.name] if v is MISSING else v
                for v, a in zip(row, table.schema.attributes)
            )
        )
    return DataTable(table.schema, tuple(rows))


def _knn_impute(table: DataTable, k: int) -> DataTable:
    """Fill each missing cell from the k nearest rows that have it present.

    Distances use the encoded coordinates shared by both rows: scaled
    squared difference for continuous attributes, 0/1 mismatch for nominal
    ones.  Continuous fills take the neighbour mean, nominal fills the
    neighbour mode.
    """
    if k < 1:
        raise ValueError("knn imputation needs k >= 1")
    attrs = table.schema.attributes
    n = table.n_rows
    # per-attribute scale for continuous distance contributions
    spans: dict[int, float] = {}
    for j, a in enumerate(attrs):
        if a.kind == KIND_CONTINUOUS:
            vals = [row[j] for row in table.rows if row[j] is not MISSING]
            if vals:
                span = max(vals) - min(vals)
                spans[j] = span if span > 0 else 1.0
    fallback = _median_fills(table)
    new_rows = [list(row) for row in table.rows]
    for i, row in enumerate(table.rows):
        miss = [j for j, v in enumerate(row) if v is MISSING]
        if not miss:
            continue
        for j in miss:
            a = attrs[j]
            dists = []
            for other_i in range(n):
                if other_i == i or table.rows[other_i][j] is MISSING:
                    continue
                other = table.rows[other_i]
                d = 0.0
                shared = 0
                for jj, (va, vb) in enumerate(zip(row, other)):
                    if va is MISSING or vb is MISSING or jj == j:
                        continue
                    shared += 1
                    if attrs[jj].kind == KIND_CONTINUOUS:
                        d += ((va - vb) / spans[jj]) ** 2
                    else:
                        d += 0.0 if va == vb else 1.0
                if shared:
                    dists.append((d / shared, other_i))
            if not dists:
                new_rows[i][j] = fallback[a.name]
                continue
            dists.sort(key=lambda t: (t[0], t[1]))
            neighbours = [table.rows[oi][j] for _, oi in dists[:k]]
            if a.kind == KIND_CONTINUOUS:
                new_rows[i][j] = float(sum(neighbours) / len(neighbours))
            else:
                freq: dict[str, int] = {}
                for v in neighbours:
                    freq[v] = freq.get(v, 0) + 1
                top = max(freq.values())
                new_rows[i][j] = next(c for c in a.categories if freq.get(c) == top)
    return DataTable(table.schema, tuple(tuple(r) for r in new_rows))


def impute(
    table: DataTable,
    strategy: str = "median",
    k: int = 5,
    max_missing: int = 3,
) -> DataTable:
    """Resolve MISSING cells.

    strategy: "median" (median/mode), "knn" (k nearest rows), or
    "drop_rows" (drop rows with more than `max_missing` missing cells, then
    median-fill the rest so no MISSING remains).
    """
    if strategy == "median":
        return _apply_fills(table, _median_fills(table))
    if strategy == "knn":
        return _knn_impute(table, k)
    if strategy == "drop_rows":
        kept = tuple(
            row
            for row in table.rows
            if sum(1 for v in row if v is MISSING) <= max_missing
        )
        trimmed = DataTable(table.schema, kept)
        if count_missing(trimmed)["total"]:
            trimmed = _apply_fills(trimmed, _median_fills(trimmed))
        return trimmed
    raise ValueError(f"unknown imputation strategy {strategy!r}")


@dataclass(frozen=True)
class ColumnInfo:
    """Provenance of one design-matrix column."""

    name: str
    source: str  # attribute the column came from
    category: str | None = None  # set for one-hot indicator columns
    continuous: bool = False


@dataclass(frozen=True)
class DesignMatrix:
    """Numeric features with provenance plus the binary label vector."""

    x: Matrix
    columns: tuple[ColumnInfo, ...]
    y: np.ndarray

    def __post_init__(self):
        if self.x.cols != len(self.columns):
            raise ValueError("column metadata does not match matrix width")
        if self.x.rows != len(self.y):
            raise ValueError("label vector length does not match matrix")
        y = np.asarray(self.y, dtype=np.int64)
        if y.size and not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be binary 0/1")
        y.flags.writeable = False
        object.__setattr__(self, "y", y)

    @property
    def n_rows(self) -> int:
        return self.x.rows

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    @property
    def source_attributes(self) -> tuple[str, ...]:
        seen: list[str] = []
        for c in self.columns:
            if c.source not in seen:
                seen.append(c.source)
        return tuple(seen)

    def take_rows(self, idx) -> "DesignMatrix":
        idx = np.asarray(idx, dtype=np.int64)
        return DesignMatrix(Matrix(self.x.a[idx]), self.columns, self.y[idx].copy())

    def take_columns(self, col_idx) -> "DesignMatrix":
        col_idx = list(col_idx)
        return DesignMatrix(
            Matrix(self.x.a[:, col_idx]),
            tuple(self.columns[j] for j in col_idx),
            self.y.copy(),
        )


_TRUTHY = {"yes", "y", "true", "1", "1.0"}


def _label_to_int(value: str, attr: Attribute) -> int:
    return 1 if str(value).strip().lower() in _TRUTHY else 0


def encode(
    table: DataTable,
    schema: FeatureSchema | None = None,
    on_unseen: str = "error",
) -> DesignMatrix:
    """Encode a fully-imputed table as numerics.

    Continuous attributes pass through, two-category attributes become one
    0/1 column (second declared category maps to 1), wider categoricals are
    one-hot expanded.  The label maps YES-like tokens to 1.  When applying a
    frozen `schema`, unseen categories either raise (default) or produce an
    all-zero indicator group (`on_unseen="zeros"`).
    """
    if count_missing(table)["total"]:
        raise ValueError("encode requires an imputed table with no MISSING cells")
    schema = schema or table.schema
    if on_unseen not in ("error", "zeros"):
        raise ValueError("on_unseen must be 'error' or 'zeros'")
    cols: list[ColumnInfo] = []
    col_data: list[np.ndarray] = []
    n = table.n_rows
    for a in schema.attributes:
        if a.name == schema.label_name:
            continue
        j = table.schema.index(a.name)
        values = [row[j] for row in table.rows]
        if a.kind == KIND_CONTINUOUS:
            cols.append(ColumnInfo(a.name, a.name, continuous=True))
            col_data.append(np.array([float(v) for v in values], dtype=np.float64))
        elif a.kind == KIND_BINARY:
            lut = {a.categories[0]: 0.0, a.categories[1]: 1.0}
            out = np.empty(n)
            for i, v in enumerate(values):
                if v not in lut:
                    if on_unseen == "error":
                        raise ValueError(f"unseen category {v!r} for {a.name!r}")
                    out[i] = 0.0
                else:
                    out[i] = lut[v]
            cols.append(ColumnInfo(a.name, a.name))
            col_data.append(out)
        else:
            seen = set(a.categories)
            for i, v in enumerate(values):
                if v not in seen and on_unseen == "error":
                    raise ValueError(f"unseen category {v!r} for {a.name!r}")
            for cat in a.categories:
                cols.append(ColumnInfo(f"{a.name}={cat}", a.name, cat))
                col_data.append(
                    np.array([1.0 if v == cat else 0.0 for v in values])
                )
    label_attr = schema.label
    jl = table.schema.index(schema.label_name)
    y = np.array([_label_to_int(row[jl], label_attr) for row in table.rows])
    x = Matrix(np.column_stack(col_data)) if col_data else Matrix(np.zeros((n, 0)))
    return DesignMatrix(x, tuple(cols), y)


@dataclass(frozen=True)
class ScaleParams:
    """Fitted per-column (min, max); constant columns map to zero."""

    by_column: dict[str, tuple[float, float]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: [v[0], v[1]] for k, v in self.by_column.items()}

    @classmethod
    def from_dict(cls, d: dict) -> "ScaleParams":
        return cls({k: (float(v[0]), float(v[1])) for k, v in d.items()})


def min_max_scale(
    m: DesignMatrix, columns: list[str] | None = None
) -> tuple[DesignMatrix, ScaleParams]:
    """Rescale the selected columns to [0, 1] and return the fitted params.

    Default column selection: every column sourced from a continuous
    attribute.  A constant column maps to all zeros.
    """
    if columns is None:
        columns = [c.name for c in m.columns if c.continuous]
    params = {}
    arr = m.x.a.copy()
    name_to_idx = {c.name: j for j, c in enumerate(m.columns)}
    for name in columns:
        j = name_to_idx[name]
        lo = float(arr[:, j].min())
        hi = float(arr[:, j].max())
        params[name] = (lo, hi)
        if hi > lo:
            arr[:, j] = (arr[:, j] - lo) / (hi - lo)
        else:
            arr[:, j] = 0.0
    return DesignMatrix(Matrix(arr), m.columns, m.y.copy()), ScaleParams(params)


def apply_scale(m: DesignMatrix, params: ScaleParams) -> DesignMatrix:
    """Apply previously fitted scaling; idempotent on the fitting data."""
    arr = m.x.a.copy()
    name_to_idx = {c.name: j for j, c in enumerate(m.columns)}
    for name, (lo, hi) in params.by_column.items():
        if name not in name_to_idx:
            continue
        j = name_to_idx[name]
        if hi > lo:
            arr[:, j] = (arr[:, j] - lo) / (hi - lo)
        else:
            arr[:, j] = 0.0
    return DesignMatrix(Matrix(arr), m.columns, m.y.copy())


def combine(first: DataTable, second: DataTable) -> DataTable:
    """Concatenate two tables whose schemas align by attribute name/kind.

    Category sets are unioned (first table's order, then new tokens), which
    absorbs per-dataset differences such as the age_desc value.
    """
    if first.schema.names != second.schema.names:
        raise ValueError("schemas do not align: attribute names differ")
    merged: dict[str, tuple[str, ...]] = {}
    attrs = []
    for a, b in zip(first.schema.attributes, second.schema.attributes):
        if (a.kind == KIND_CONTINUOUS) != (b.kind == KIND_CONTINUOUS):
            raise ValueError(f"attribute {a.name!r} kind mismatch")
        if a.kind == KIND_CONTINUOUS:
            attrs.append(a)
            continue
        cats = list(a.categories) + [c for c in b.categories if c not in a.categories]
        kind = KIND_BINARY if len(cats) == 2 else KIND_CATEGORICAL
        attrs.append(Attribute(a.name, kind, tuple(cats)))
    schema = FeatureSchema(
        tuple(attrs), first.schema.label_name, first.schema.relation + "+combined"
    )
    return DataTable(schema, first.rows + second.rows)


def train_test_split(
    m: DesignMatrix,
    test_fraction: float,
    rng: SeededRng,
    stratify: bool = True,
) -> tuple[DesignMatrix, DesignMatrix]:
    """Disjoint stratified partition; |test| = floor(n * fraction).

    Per-class test counts follow the largest-remainder method so the total
    is exact while class ratios stay within one sample of the global ratio.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    n = m.n_rows
    n_test = int(np.floor(n * test_fraction))
    if not stratify:
        perm = rng.shuffle(n)
        test_idx = np.sort(perm[:n_test])
        train_idx = np.sort(perm[n_test:])
        return m.take_rows(train_idx), m.take_rows(test_idx)
    class_indices = {c: np.flatnonzero(m.y == c) for c in (0, 1)}
    targets = {}
    remainders = []
    assigned = 0
    for c, idx in class_indices.items():
        exact = len(idx) * test_fraction
        targets[c] = int(np.floor(exact))
        assigned += targets[c]
        remainders.append((-(exact - np.floor(exact)), c))
    remainders.sort()
    for _, c in remainders:
        if assigned >= n_test:
            break
        targets[c] += 1
        assigned += 1
    test_parts = []
    train_parts = []
    for c in (0, 1):
        idx = class_indices[c]
        if len(idx) == 0:
            continue
        take = targets[c]
        if take == 0 or take == len(idx):
            raise ValueError(
                f"stratified split leaves class {c} absent from one side"
            )
        perm = rng.shuffle(len(idx))
        test_parts.append(idx[perm[:take]])
        train_parts.append(idx[perm[take:]])
    test_idx = np.sort(np.concatenate(test_parts))
    train_idx = np.sort(np.concatenate(train_parts))
    return m.take_rows(train_idx), m.take_rows(test_idx)
