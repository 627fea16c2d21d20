"""Score tables: the data model every other module consumes.

A table is stored column-wise (numpy arrays) because the search and epoch
machinery push hundreds of thousands of rows through it; ``ScoreTable.records``
materialises the row view on demand.

CSV layout::

    subject_id,object_id,fold,epoch,label,score[,cov_*...]

Only ``subject_id``, ``label`` and ``score`` are required in the header.  An
empty cell means "absent" for the optional fields.  JSONL uses the same keys,
one object per line, with ``null`` or a missing key for absent fields.
"""
from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import errors

OBJECT = "object"
SUBJECT = "subject"

CORE_COLUMNS = ("subject_id", "object_id", "fold", "epoch", "label", "score")
REQUIRED_COLUMNS = ("subject_id", "label", "score")
COV_PREFIX = "cov_"

_NUMBER = re.compile(r"[+-]?(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?")
_NONFINITE = re.compile(r"[+-]?(?:nan|inf|infinity)", re.IGNORECASE)
_UINT = re.compile(r"\d+")
_INT = re.compile(r"[+-]?\d+")

# absent entries of an optional integer column
MISSING = -1


@dataclass(frozen=True)
class ScoreRecord:
    subject_id: str
    label: int
    score: float
    object_id: str | None = None
    fold: int | None = None
    epoch: int | None = None
    covariates: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class Violation:
    kind: str
    row: int
    message: str = ""

    def __str__(self):
        return f"{self.kind}@{self.row}" + (f": {self.message}" if self.message else "")


def _opt_int_column(values):
    if values is None:
        return None
    arr = np.array([MISSING if v is None else int(v) for v in values], dtype=np.int64)
    return arr


@dataclass(frozen=True, eq=False)
class ScoreTable:
    """Column-oriented score/label table.

    ``fold`` and ``epoch`` are either ``None`` (column absent) or int64 arrays
    where ``MISSING`` marks an absent entry.  ``object_id`` is ``None`` or an
    object array whose entries may be ``None``.
    """

    subject_id: np.ndarray
    label: np.ndarray
    score: np.ndarray
    object_id: np.ndarray | None = None
    fold: np.ndarray | None = None
    epoch: np.ndarray | None = None
    covariates: Mapping[str, np.ndarray] = field(default_factory=dict)
    level: str = SUBJECT

    def __post_init__(self):
        set_ = object.__setattr__
        set_(self, "subject_id", np.asarray(self.subject_id, dtype=object))
        set_(self, "label", np.asarray(self.label, dtype=np.int64))
        set_(self, "score", np.asarray(self.score, dtype=np.float64))
        n = len(self.subject_id)
        if self.object_id is not None:
            set_(self, "object_id", np.asarray(self.object_id, dtype=object))
        for name in ("fold", "epoch"):
            col = getattr(self, name)
            if col is not None:
                set_(self, name, np.asarray(col, dtype=np.int64))
        set_(self, "covariates",
             {k: np.asarray(v, dtype=np.float64) for k, v in self.covariates.items()})
        for name, col in self._columns():
            if len(col) != n:
                raise errors.MalformedInput(f"column {name!r} has length {len(col)}, expected {n}")
        if self.level not in (OBJECT, SUBJECT):
            raise errors.MalformedInput(f"unknown level {self.level!r}")

    def _columns(self):
        yield "label", self.label
        yield "score", self.score
        for name in ("object_id", "fold", "epoch"):
            col = getattr(self, name)
            if col is not None:
                yield name, col
        yield from self.covariates.items()

    def __len__(self):
        return len(self.subject_id)

    def __eq__(self, other):
        if not isinstance(other, ScoreTable) or self.level != other.level:
            return NotImplemented if not isinstance(other, ScoreTable) else False
        if list(self.covariates) != list(other.covariates):
            return False
        pairs = [(self.subject_id, other.subject_id), (self.label, other.label),
                 (self.score, other.score), (self.object_id, other.object_id),
                 (self.fold, other.fold), (self.epoch, other.epoch)]
        pairs += [(self.covariates[k], other.covariates[k]) for k in self.covariates]
        for a, b in pairs:
            if (a is None) != (b is None):
                return False
            if a is not None and not np.array_equal(a, b):
                return False
        return True

    __hash__ = None

    @property
    def covariate_names(self):
        return list(self.covariates)

    @property
    def has_folds(self):
        return self.fold is not None

    @property
    def has_epochs(self):
        return self.epoch is not None

    def folds(self):
        return [] if self.fold is None else sorted(set(self.fold.tolist()) - {MISSING})

    def epochs(self):
        return [] if self.epoch is None else sorted(set(self.epoch.tolist()) - {MISSING})

    def take(self, index) -> ScoreTable:
        """Row subset by boolean mask or integer index array (order follows ``index``)."""
        index = np.asarray(index)
        pick = (lambda c: None if c is None else c[index])
        return ScoreTable(
            subject_id=self.subject_id[index], label=self.label[index], score=self.score[index],
            object_id=pick(self.object_id), fold=pick(self.fold), epoch=pick(self.epoch),
            covariates={k: v[index] for k, v in self.covariates.items()}, level=self.level,
        )

    def with_scores(self, scores) -> ScoreTable:
        scores = np.asarray(scores, dtype=np.float64)
        if scores.shape != self.score.shape:
            raise errors.LengthMismatch("replacement scores have the wrong length")
        return ScoreTable(self.subject_id, self.label, scores, self.object_id, self.fold,
                          self.epoch, self.covariates, self.level)

    def with_fold(self, fold: int) -> ScoreTable:
        return ScoreTable(self.subject_id, self.label, self.score, self.object_id,
                          np.full(len(self), int(fold), dtype=np.int64), self.epoch,
                          self.covariates, self.level)

    @property
    def records(self) -> list[ScoreRecord]:
        out = []
        opt = lambda col, i: None if col is None or col[i] == MISSING else int(col[i])
        for i in range(len(self)):
            out.append(ScoreRecord(
                subject_id=str(self.subject_id[i]),
                label=int(self.label[i]),
                score=float(self.score[i]),
                object_id=None if self.object_id is None else self.object_id[i],
                fold=opt(self.fold, i),
                epoch=opt(self.epoch, i),
                covariates={k: float(v[i]) for k, v in self.covariates.items()},
            ))
        return out

    @classmethod
    def from_records(cls, records: Iterable[ScoreRecord], level: str | None = None) -> ScoreTable:
        records = list(records)
        has = lambda attr: any(getattr(r, attr) is not None for r in records)
        cov_names = []
        for r in records:
            for k in r.covariates:
                if k not in cov_names:
                    cov_names.append(k)
        if level is None:
            level = OBJECT if has("object_id") else SUBJECT
        return cls(
            subject_id=[r.subject_id for r in records],
            label=[r.label for r in records],
            score=[r.score for r in records],
            object_id=[r.object_id for r in records] if has("object_id") else None,
            fold=_opt_int_column([r.fold for r in records]) if has("fold") else None,
            epoch=_opt_int_column([r.epoch for r in records]) if has("epoch") else None,
            covariates={k: [r.covariates.get(k, math.nan) for r in records] for k in cov_names},
            level=level,
        )

    @classmethod
    def from_columns(cls, subject_id, label, score, *, object_id=None, fold=None, epoch=None,
                     covariates=None, level=None) -> ScoreTable:
        if level is None:
            level = OBJECT if object_id is not None else SUBJECT
        n = len(subject_id)
        as_col = lambda v: None if v is None else (np.full(n, v, dtype=np.int64) if np.isscalar(v) else v)
        return cls(subject_id, label, score, object_id, as_col(fold), as_col(epoch),
                   covariates or {}, level)


def concat(tables: Sequence[ScoreTable]) -> ScoreTable:
    """Stack tables with identical column sets."""
    if not tables:
        raise errors.MalformedInput("nothing to concatenate")
    first = tables[0]
    for t in tables[1:]:
        if (t.level != first.level or (t.fold is None) != (first.fold is None)
                or (t.epoch is None) != (first.epoch is None)
                or (t.object_id is None) != (first.object_id is None)
                or list(t.covariates) != list(first.covariates)):
            raise errors.MalformedInput("tables have different column sets")
    cat = lambda attr: None if getattr(first, attr) is None else np.concatenate([getattr(t, attr) for t in tables])
    return ScoreTable(
        subject_id=cat("subject_id"), label=cat("label"), score=cat("score"),
        object_id=cat("object_id"), fold=cat("fold"), epoch=cat("epoch"),
        covariates={k: np.concatenate([t.covariates[k] for t in tables]) for k in first.covariates},
        level=first.level,
    )


# --------------------------------------------------------------------------
# validation

_VIOLATION_ERRORS = {
    "BadLabel": errors.BadLabel,
    "NonFiniteScore": errors.NonFiniteScore,
    "InconsistentSubjectLabel": errors.InconsistentSubjectLabel,
}


def validate(table: ScoreTable) -> list[Violation]:
    """Every invariant violation in ``table``, in row order within each check."""
    out: list[Violation] = []
    n = len(table)
    for i in np.flatnonzero((table.label != 0) & (table.label != 1)):
        out.append(Violation("BadLabel", int(i), f"label {table.label[i]}"))
    for i in np.flatnonzero(~np.isfinite(table.score)):
        out.append(Violation("NonFiniteScore", int(i), f"score {table.score[i]}"))
    for name, col in table.covariates.items():
        for i in np.flatnonzero(~np.isfinite(col)):
            out.append(Violation("NonFiniteCovariate", int(i), name))
    if table.level == OBJECT:
        if table.object_id is None:
            out.extend(Violation("MissingObjectId", i) for i in range(n))
        else:
            out.extend(Violation("MissingObjectId", i) for i, o in enumerate(table.object_id)
                       if o is None or o == "")
    for name in ("fold", "epoch"):
        col = getattr(table, name)
        if col is None:
            continue
        missing = col == MISSING
        if missing.any() and not missing.all():
            out.extend(Violation(f"Partial{name.title()}", int(i), f"{name} absent on this row only")
                       for i in np.flatnonzero(missing))
        out.extend(Violation(f"Bad{name.title()}", int(i), f"{name} {col[i]}")
                   for i in np.flatnonzero(col < MISSING))

    first_label: dict[str, int] = {}
    seen: set = set()
    for i in range(n):
        sid = table.subject_id[i]
        if not isinstance(sid, str) or sid == "":
            out.append(Violation("MissingSubjectId", i))
        lab = int(table.label[i])
        if sid in first_label and first_label[sid] != lab:
            out.append(Violation("InconsistentSubjectLabel", i, f"subject {sid!r}"))
        first_label.setdefault(sid, lab)
        key = (sid,
               None if table.object_id is None else table.object_id[i],
               None if table.fold is None else int(table.fold[i]),
               None if table.epoch is None else int(table.epoch[i]))
        if key in seen:
            kind = "DuplicateSubject" if table.level == SUBJECT else "DuplicateRow"
            out.append(Violation(kind, i, f"key {key}"))
        seen.add(key)
    return out


def check(table: ScoreTable) -> ScoreTable:
    """Raise the error matching the first violation, if any."""
    violations = validate(table)
    if violations:
        v = min(violations, key=lambda v: v.row)
        cls = _VIOLATION_ERRORS.get(v.kind, errors.MalformedInput)
        raise cls(str(v), violations=[str(x) for x in violations])
    return table


# --------------------------------------------------------------------------
# parsing

def _parse_score(text, where):
    text = text.strip()
    if _NUMBER.fullmatch(text):
        return float(text)
    if _NONFINITE.fullmatch(text):
        raise errors.NonFiniteScore(f"{where}: non-finite value {text!r}")
    raise errors.MalformedInput(f"{where}: not a number: {text!r}")


def _parse_label(text, where):
    text = text.strip()
    if not _INT.fullmatch(text) or int(text) not in (0, 1):
        raise errors.BadLabel(f"{where}: label must be 0 or 1, got {text!r}")
    return int(text)


def _parse_uint(text, where):
    text = text.strip()
    if text == "":
        return None
    if not _UINT.fullmatch(text):
        raise errors.MalformedInput(f"{where}: expected a non-negative integer, got {text!r}")
    return int(text)


def _build(rows: list[dict], header: Sequence[str]) -> ScoreTable:
    """rows hold already-typed values; None = absent."""
    covs = [h for h in header if h.startswith(COV_PREFIX)]
    n = len(rows)
    object_ids = [r.get("object_id") for r in rows]
    has_obj = any(o is not None for o in object_ids)
    cols = {}
    for name in ("fold", "epoch"):
        vals = [r.get(name) for r in rows]
        present = [v is not None for v in vals]
        if any(present) and not all(present):
            i = present.index(False)
            raise errors.MalformedInput(f"row {i}: {name} absent while other rows carry it")
        cols[name] = np.array(vals, dtype=np.int64) if n and all(present) else None
    table = ScoreTable(
        subject_id=[r["subject_id"] for r in rows],
        label=[r["label"] for r in rows],
        score=[r["score"] for r in rows],
        object_id=object_ids if has_obj else None,
        fold=cols["fold"], epoch=cols["epoch"],
        covariates={c: [r[c] for r in rows] for c in covs},
        level=OBJECT if has_obj else SUBJECT,
    )
    return check(table)


def _check_header(header):
    if len(set(header)) != len(header):
        raise errors.MalformedInput(f"duplicate column in header {header}")
    for col in REQUIRED_COLUMNS:
        if col not in header:
            raise errors.MalformedInput(f"header lacks required column {col!r}")
    for col in header:
        if col not in CORE_COLUMNS and not (col.startswith(COV_PREFIX) and len(col) > len(COV_PREFIX)):
            raise errors.MalformedInput(f"unknown column {col!r}")


def _decode(data) -> str:
    if isinstance(data, str):
        return data
    try:
        return bytes(data).decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise errors.MalformedInput(f"input is not valid UTF-8: {exc}") from None


def parse_score_table(data: bytes | str, format: str = "csv") -> ScoreTable:
    """Parse and validate a CSV or JSONL score table."""
    text = _decode(data)
    if format == "csv":
        return _parse_csv(text)
    if format == "jsonl":
        return _parse_jsonl(text)
    raise errors.MalformedInput(f"unknown format {format!r}")


def _parse_csv(text):
    reader = csv.reader(io.StringIO(text, newline=""), strict=True)
    try:
        header = next(reader)
    except StopIteration:
        raise errors.MalformedInput("empty input; a header row is required") from None
    except csv.Error as exc:
        raise errors.MalformedInput(f"header: {exc}") from None
    header = [h.strip() for h in header]
    _check_header(header)
    rows = []
    try:
        for lineno, raw in enumerate(reader, start=2):
            if not raw:
                continue
            if len(raw) != len(header):
                raise errors.MalformedInput(
                    f"line {lineno}: expected {len(header)} fields, got {len(raw)}")
            cells = dict(zip(header, raw))
            where = f"line {lineno}"
            row = {
                "subject_id": cells["subject_id"],
                "label": _parse_label(cells["label"], where),
                "score": _parse_score(cells["score"], where),
                "object_id": cells.get("object_id") or None,
                "fold": _parse_uint(cells.get("fold", ""), where),
                "epoch": _parse_uint(cells.get("epoch", ""), where),
            }
            if row["subject_id"] == "":
                raise errors.MalformedInput(f"{where}: empty subject_id")
            for c in header:
                if c.startswith(COV_PREFIX):
                    row[c] = _parse_score(cells[c], f"{where} column {c}")
            rows.append(row)
    except csv.Error as exc:
        raise errors.MalformedInput(f"csv: {exc}") from None
    return _build(rows, header)


def _json_number(v, where, name):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise errors.MalformedInput(f"{where}: {name} must be a number, got {v!r}")
    if not math.isfinite(v):
        raise errors.NonFiniteScore(f"{where}: non-finite {name}")
    return float(v)


def _parse_jsonl(text):
    rows = []
    header: list[str] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        where = f"line {lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise errors.MalformedInput(f"{where}: {exc}") from None
        if not isinstance(obj, dict):
            raise errors.MalformedInput(f"{where}: expected a JSON object")
        keys = list(obj)
        try:
            _check_header(keys)
        except errors.MalformedInput as exc:
            raise errors.MalformedInput(f"{where}: {exc}") from None
        for k in keys:
            if k not in header:
                header.append(k)
        label = obj["label"]
        if isinstance(label, bool) or not isinstance(label, int) or label not in (0, 1):
            raise errors.BadLabel(f"{where}: label must be 0 or 1, got {label!r}")
        row = {
            "subject_id": obj["subject_id"],
            "label": label,
            "score": _json_number(obj["score"], where, "score"),
            "object_id": obj.get("object_id") or None,
        }
        if not isinstance(row["subject_id"], str) or not row["subject_id"]:
            raise errors.MalformedInput(f"{where}: subject_id must be a non-empty string")
        for name in ("fold", "epoch"):
            v = obj.get(name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < 0):
                raise errors.MalformedInput(f"{where}: {name} must be a non-negative integer")
            row[name] = v
        for k in keys:
            if k.startswith(COV_PREFIX):
                row[k] = _json_number(obj[k], where, k)
        rows.append(row)
    covs = [h for h in header if h.startswith(COV_PREFIX)]
    for i, r in enumerate(rows):
        for c in covs:
            if c not in r:
                raise errors.MalformedInput(f"record {i}: missing covariate {c!r}")
    return _build(rows, header)


# --------------------------------------------------------------------------
# serialisation

def _fmt(x: float) -> str:
    return repr(float(x))


def _row_cells(table: ScoreTable, i: int):
    opt = lambda col: "" if col is None or col[i] == MISSING else str(int(col[i]))
    obj = "" if table.object_id is None or table.object_id[i] is None else str(table.object_id[i])
    return [str(table.subject_id[i]), obj, opt(table.fold), opt(table.epoch),
            str(int(table.label[i])), _fmt(table.score[i])] + \
           [_fmt(v[i]) for v in table.covariates.values()]


def to_csv(table: ScoreTable) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(list(CORE_COLUMNS) + list(table.covariates))
    for i in range(len(table)):
        writer.writerow(_row_cells(table, i))
    return buf.getvalue()


def to_jsonl(table: ScoreTable) -> str:
    lines = []
    for r in table.records:
        obj = {"subject_id": r.subject_id, "object_id": r.object_id, "fold": r.fold,
               "epoch": r.epoch, "label": r.label, "score": r.score, **r.covariates}
        lines.append(json.dumps(obj))
    return "".join(line + "\n" for line in lines)


def serialize(table: ScoreTable, format: str = "csv") -> bytes:
    if format == "csv":
        return to_csv(table).encode("utf-8")
    if format == "jsonl":
        return to_jsonl(table).encode("utf-8")
    raise errors.MalformedInput(f"unknown format {format!r}")


def read_table(path) -> ScoreTable:
    path = str(path)
    fmt = "jsonl" if path.endswith((".jsonl", ".ndjson")) else "csv"
    with open(path, "rb") as fh:
        return parse_score_table(fh.read(), fmt)


def write_table(table: ScoreTable, path) -> None:
    path = str(path)
    fmt = "jsonl" if path.endswith((".jsonl", ".ndjson")) else "csv"
    with open(path, "wb") as fh:
        fh.write(serialize(table, fmt))
