"""Control-anchored z-scale alignment of k-fold validation scores.

Each fold's model is calibrated differently.  Per fold, the control (label 0)
scores give a median ``m_k`` and two-sided spreads; every score in the fold,
positives included, is then mapped piecewise-linearly so the controls land on
a shared median and spread::

    n = m_t + std_t * (s - m_k) / right_k    if s > m_k
    n = m_t + std_t * (s - m_k) / left_k     if s < m_k
    n = m_t                                  if s == m_k

A single canonical std is used on both sides by default.  Passing
``use_left_std=True`` to :func:`apply_alignment` scales the left side by
``CanonicalScale.left_std`` instead.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import errors
from .metrics import two_sided_std
from .scoreset import MISSING, ScoreTable


@dataclass(frozen=True)
class FoldParams:
    fold: int
    median: float
    right_std: float
    left_std: float
    n_controls: int


@dataclass(frozen=True)
class CanonicalScale:
    median: float = 0.3
    std: float = 0.2
    left_std: float | None = None

    def __post_init__(self):
        if not self.std > 0:
            raise errors.BadConfig(f"canonical std must be > 0, got {self.std}")
        if self.left_std is not None and not self.left_std > 0:
            raise errors.BadConfig(f"canonical left_std must be > 0, got {self.left_std}")


@dataclass(frozen=True)
class AlignmentModel:
    canonical: CanonicalScale
    per_fold: dict = field(default_factory=dict)

    def to_dict(self):
        canon = {"median": self.canonical.median, "std": self.canonical.std}
        if self.canonical.left_std is not None:
            canon["left_std"] = self.canonical.left_std
        folds = [
            {"fold": p.fold, "median": p.median, "right_std": p.right_std,
             "left_std": p.left_std, "n_controls": p.n_controls}
            for _, p in sorted(self.per_fold.items())
        ]
        return {"canonical": canon, "folds": folds}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d):
        c = d["canonical"]
        canonical = CanonicalScale(c["median"], c["std"], c.get("left_std"))
        per_fold = {}
        for f in d["folds"]:
            if f["fold"] in per_fold:
                raise errors.MalformedInput(f"duplicate fold {f['fold']} in alignment model")
            per_fold[int(f["fold"])] = FoldParams(int(f["fold"]), float(f["median"]),
                                                  float(f["right_std"]), float(f["left_std"]),
                                                  int(f["n_controls"]))
        return cls(canonical, per_fold)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def fit_fold(fold: int, control_scores) -> FoldParams:
    x = np.asarray(control_scores, dtype=np.float64)
    if x.size < 2:
        raise errors.TooFewControls(f"fold {fold}: need >= 2 controls, have {x.size}",
                                    fold=fold, have=int(x.size))
    ts = two_sided_std(x)
    if ts.right == 0 or ts.left == 0:
        raise errors.ZeroSpread(f"fold {fold}: control scores have zero spread on one side",
                                fold=fold)
    return FoldParams(fold=fold, median=ts.middle, right_std=ts.right, left_std=ts.left,
                      n_controls=int(x.size))


def fit_alignment(table: ScoreTable, canonical: CanonicalScale | None = None) -> AlignmentModel:
    """Per-fold control median and two-sided spreads; positives never enter the fit."""
    canonical = canonical or CanonicalScale()
    if table.fold is None or np.any(table.fold == MISSING):
        raise errors.MissingFolds("alignment needs a fold assignment on every record")
    per_fold = {}
    for k in table.folds():
        in_fold = table.fold == k
        per_fold[k] = fit_fold(k, table.score[in_fold & (table.label == 0)])
    return AlignmentModel(canonical, per_fold)


def map_scores(scores, params: FoldParams, canonical: CanonicalScale,
               use_left_std: bool = False) -> np.ndarray:
    s = np.asarray(scores, dtype=np.float64)
    left_target = canonical.left_std if (use_left_std and canonical.left_std) else canonical.std
    d = s - params.median
    out = np.full_like(d, canonical.median)
    up, down = d > 0, d < 0
    out[up] = canonical.median + canonical.std * d[up] / params.right_std
    out[down] = canonical.median + left_target * d[down] / params.left_std
    return out


def apply_alignment(table: ScoreTable, model: AlignmentModel, clip: bool = False,
                    use_left_std: bool = False) -> ScoreTable:
    if table.fold is None:
        raise errors.MissingFolds("alignment needs a fold assignment on every record")
    new = table.score.copy()
    for k in sorted(set(table.fold.tolist())):
        if k not in model.per_fold:
            raise errors.UnknownFold(f"fold {k} not present in the alignment model", fold=k)
        idx = table.fold == k
        new[idx] = map_scores(table.score[idx], model.per_fold[k], model.canonical, use_left_std)
    if clip:
        new = np.clip(new, 0.0, 1.0)
    return table.with_scores(new)


def align(table: ScoreTable, canonical: CanonicalScale | None = None, clip: bool = False):
    """Fit on ``table``'s controls and apply; returns (aligned table, model)."""
    model = fit_alignment(table, canonical)
    return apply_alignment(table, model, clip=clip), model
