"""Figures of merit for binary score/label data.

Conventions used throughout: a record is called positive at threshold ``t``
when ``score >= t``; label 1 is the positive class, label 0 the control.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import errors

CE_EPS = 1e-12


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    n_pos: int
    n_neg: int

    @property
    def points(self):
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))


@dataclass(frozen=True)
class TwoSidedStd:
    right: float
    left: float
    middle: float


@dataclass(frozen=True)
class DistributionSummary:
    mean: float
    two_sided: TwoSidedStd
    n: int


def _arrays(labels, scores):
    y = np.asarray(labels)
    s = np.asarray(scores, dtype=np.float64)
    if y.ndim != 1 or s.ndim != 1 or len(y) != len(s):
        raise errors.LengthMismatch(f"labels ({len(y)}) and scores ({len(s)}) differ in length")
    y = y.astype(np.int64)
    if np.any((y != 0) & (y != 1)):
        raise errors.BadLabel("labels must be 0 or 1")
    n_pos = int(y.sum())
    if n_pos == 0 or n_pos == len(y):
        raise errors.DegenerateClasses(
            f"both classes required (positives={n_pos}, negatives={len(y) - n_pos})")
    return y, s


def roc_curve(labels, scores) -> RocCurve:
    """One operating point per distinct score, highest first, ties moving together.

    The first point is (0, 0) at threshold +inf; the last is (1, 1) at the
    lowest score.
    """
    y, s = _arrays(labels, scores)
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # last index of each run of equal scores
    ends = np.r_[np.flatnonzero(np.diff(s_sorted) != 0), len(s_sorted) - 1]
    tp = np.cumsum(y_sorted)[ends]
    fp = (ends + 1) - tp
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    fpr = np.r_[0, fp] / n_neg
    tpr = np.r_[0, tp] / n_pos
    thresholds = np.r_[np.inf, s_sorted[ends]]
    return RocCurve(fpr=fpr, tpr=tpr, thresholds=thresholds, n_pos=n_pos, n_neg=n_neg)


def _trapezoid(x, y):
    return float(np.sum(np.diff(x) * (y[1:] + y[:-1]) * 0.5))


def auc(roc: RocCurve) -> float:
    return _trapezoid(roc.fpr, roc.tpr)


def roc_auc(labels, scores) -> float:
    return auc(roc_curve(labels, scores))


def _check_target_spec(target_spec):
    if isinstance(target_spec, bool) or not isinstance(target_spec, (int, np.integer)):
        if isinstance(target_spec, float) and target_spec.is_integer():
            target_spec = int(target_spec)
        else:
            raise errors.BadSliverSpec(f"target_spec must be an integer in 1..99, got {target_spec!r}")
    if not 1 <= target_spec <= 99:
        raise errors.BadSliverSpec(f"target_spec must be in 1..99, got {target_spec}")
    return int(target_spec)


def _sliver_area(roc: RocCurve, max_fpr: float) -> float:
    """Normalised area for fpr in [0, max_fpr]; no range check on max_fpr."""
    keep = roc.fpr <= max_fpr
    f = np.r_[roc.fpr[keep], max_fpr]
    t = np.r_[roc.tpr[keep], roc.tpr[keep][-1]]
    return _trapezoid(f, t) / max_fpr


def sliver_auc(labels, scores, target_spec: int) -> float:
    """Area under the ROC restricted to fpr <= (100 - target_spec)/100, normalised by that width.

    Past the last operating point inside the sliver the curve is extended
    horizontally, so the area is a lower staircase-trapezoid bound.
    """
    target_spec = _check_target_spec(target_spec)
    return _sliver_area(roc_curve(labels, scores), (100 - target_spec) / 100)


def sens_at_spec(labels, scores, target_spec_pct: float) -> tuple[float, float]:
    """Best sensitivity with specificity >= target_spec_pct/100, and the lowest threshold attaining it.

    Returns ``(0.0, inf)`` when only the all-negative threshold qualifies.
    """
    if not 0 < target_spec_pct <= 100:
        raise errors.BadSpecificity(f"target specificity must be in (0, 100], got {target_spec_pct}")
    roc = roc_curve(labels, scores)
    fp = np.rint(roc.fpr * roc.n_neg)
    tn = roc.n_neg - fp
    # integer-side comparison avoids 1 - fpr rounding
    ok = tn * 100.0 >= target_spec_pct * roc.n_neg
    # qualifying points form a prefix (fpr non-decreasing); its last element is best
    last = int(np.flatnonzero(ok)[-1])
    return float(roc.tpr[last]), float(roc.thresholds[last])


def two_sided_std(values, middle: float | None = None) -> TwoSidedStd:
    """Right/left spreads from samples mirrored about the median (or ``middle``).

    Population standard deviation; values equal to the centre count on both sides.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or len(x) <= 1:
        raise errors.TooFewSamples(f"two-sided std needs at least 2 values, got {x.size}")
    m = float(np.median(x)) if middle is None else float(middle)
    x = x - m
    hi = x[x >= 0]
    lo = x[x <= 0]
    right = float(np.std(np.concatenate((-hi, hi)))) if hi.size else 0.0
    left = float(np.std(np.concatenate((lo, -lo)))) if lo.size else 0.0
    return TwoSidedStd(right=right, left=left, middle=m)


def summarize(values) -> DistributionSummary:
    x = np.asarray(values, dtype=np.float64)
    return DistributionSummary(mean=float(np.mean(x)), two_sided=two_sided_std(x), n=len(x))


def fisher_distance(a, b) -> float:
    """|mean(a) - mean(b)| / (sigma_a + sigma_b) using the spreads that face each other.

    The lower-mean sample contributes its right-hand two-sided std, the
    higher-mean sample its left-hand one.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    sa, sb = two_sided_std(a), two_sided_std(b)
    ma, mb = float(np.mean(a)), float(np.mean(b))
    if ma <= mb:
        spread = sa.right + sb.left
    else:
        spread = sa.left + sb.right
    if spread == 0:
        raise errors.ZeroSpread("both samples have zero spread on their facing sides")
    return abs(ma - mb) / spread


def balanced_cross_entropy(labels, scores) -> float:
    y, s = _arrays(labels, scores)
    pos = np.log(np.maximum(s[y == 1], CE_EPS))
    neg = np.log(np.maximum(1.0 - s[y == 0], CE_EPS))
    return float(-0.5 * (pos.mean() + neg.mean()))


def class_split(labels, scores):
    """(control scores, positive scores)."""
    y, s = _arrays(labels, scores)
    return s[y == 0], s[y == 1]
