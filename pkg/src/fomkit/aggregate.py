"""Object-level to subject-level score aggregation.

Rules (CLI spelling in parentheses):

* ``nth_largest`` (``nth_largest:3``) - n-th order statistic, descending.  Default.
* ``nth_positional`` (``nth_positional:3``) - score of the n-th object in input order.
* ``max`` / ``mean``
* ``quantile`` (``quantile:0.75``) - nearest-rank quantile, always an observed score.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import errors
from .scoreset import MISSING, OBJECT, SUBJECT, ScoreTable

KINDS = ("nth_largest", "nth_positional", "max", "mean", "quantile")


@dataclass(frozen=True)
class AggregationRule:
    kind: str = "nth_largest"
    n: int | None = None
    q: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise errors.BadRule(f"unknown aggregation rule {self.kind!r}")
        if self.kind.startswith("nth_") and (self.n is None or self.n < 1):
            raise errors.BadRule(f"{self.kind} needs n >= 1")
        if self.kind == "quantile" and (self.q is None or not 0 <= self.q <= 1):
            raise errors.BadRule("quantile needs q in [0, 1]")

    @classmethod
    def parse(cls, text: str) -> AggregationRule:
        kind, _, arg = text.strip().partition(":")
        try:
            if kind.startswith("nth_"):
                return cls(kind, n=int(arg))
            if kind == "quantile":
                return cls(kind, q=float(arg))
        except ValueError:
            raise errors.BadRule(f"bad rule argument in {text!r}") from None
        if arg:
            raise errors.BadRule(f"rule {kind!r} takes no argument")
        return cls(kind)

    def __str__(self):
        if self.kind.startswith("nth_"):
            return f"{self.kind}:{self.n}"
        if self.kind == "quantile":
            return f"quantile:{self.q:g}"
        return self.kind

    def min_objects(self) -> int:
        return self.n if self.kind.startswith("nth_") else 1

    def reduce(self, scores: np.ndarray) -> float:
        """Apply the rule to one subject's scores (in input order)."""
        if self.kind == "nth_largest":
            return float(np.sort(scores)[::-1][self.n - 1])
        if self.kind == "nth_positional":
            return float(scores[self.n - 1])
        if self.kind == "max":
            return float(scores.max())
        if self.kind == "mean":
            # clamp: fsum/n can drift one ulp outside [min, max]
            return float(min(max(math.fsum(scores) / len(scores), scores.min()), scores.max()))
        rank = max(math.ceil(self.q * len(scores)), 1)
        return float(np.sort(scores)[rank - 1])


def aggregate_subjects(table: ScoreTable, rule: AggregationRule) -> ScoreTable:
    """One record per subject (per epoch, when the table carries epochs).

    Label, fold, epoch and covariates are taken from the subject's first object.
    """
    if table.level != OBJECT:
        raise errors.MalformedInput("aggregation needs an object-level table")
    epochs = table.epoch if table.epoch is not None else np.full(len(table), MISSING)
    groups: dict = {}
    for i, key in enumerate(zip(table.subject_id.tolist(), epochs.tolist())):
        groups.setdefault(key, []).append(i)

    need = rule.min_objects()
    first = np.empty(len(groups), dtype=np.int64)
    scores = np.empty(len(groups))
    for g, ((sid, _), rows) in enumerate(groups.items()):
        rows = np.asarray(rows)
        if len(rows) < need:
            raise errors.TooFewObjects(f"subject {sid!r} has {len(rows)} objects, rule needs {need}",
                                       subject=sid, have=int(len(rows)), need=need)
        if table.fold is not None and np.any(table.fold[rows] != table.fold[rows[0]]):
            raise errors.MixedFoldWithinSubject(f"subject {sid!r} spans several folds", subject=sid)
        first[g] = rows[0]
        scores[g] = rule.reduce(table.score[rows])

    pick = lambda c: None if c is None else c[first]
    return ScoreTable(
        subject_id=table.subject_id[first], label=table.label[first], score=scores,
        object_id=None, fold=pick(table.fold), epoch=pick(table.epoch),
        covariates={k: v[first] for k, v in table.covariates.items()}, level=SUBJECT,
    )
