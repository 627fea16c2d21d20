"""Slow, independent reference implementations used as test oracles.

Plain Python with exact fractions where it matters; nothing here imports fomkit.
"""
from __future__ import annotations

import math
import statistics
from fractions import Fraction


def concordance_auc(labels, scores) -> float:
    """Mann-Whitney: fraction of (positive, negative) pairs ranked correctly, ties 1/2."""
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    wins = Fraction(0)
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1
            elif p == n:
                wins += Fraction(1, 2)
    return float(wins / (len(pos) * len(neg)))


def sweep_points(labels, scores):
    """Exact (fpr, tpr, threshold) for +inf and every distinct score, descending."""
    n_pos = sum(1 for y in labels if y == 1)
    n_neg = len(labels) - n_pos
    pts = []
    for t in [math.inf] + sorted(set(scores), reverse=True):
        tp = sum(1 for y, s in zip(labels, scores) if y == 1 and s >= t)
        fp = sum(1 for y, s in zip(labels, scores) if y == 0 and s >= t)
        pts.append((Fraction(fp, n_neg), Fraction(tp, n_pos), t))
    return pts


def sliver_oracle(labels, scores, target_spec: int) -> float:
    max_fpr = Fraction(100 - target_spec, 100)
    pts = [(f, t) for f, t, _ in sweep_points(labels, scores) if f <= max_fpr]
    pts.append((max_fpr, pts[-1][1]))
    area = sum((f1 - f0) * (t0 + t1) / 2 for (f0, t0), (f1, t1) in zip(pts, pts[1:]))
    return float(area / max_fpr)


def sens_at_spec_oracle(labels, scores, pct):
    """Try every threshold; keep the best sensitivity, lowest threshold on ties."""
    n_pos = sum(1 for y in labels if y == 1)
    n_neg = len(labels) - n_pos
    need = Fraction(str(pct)) / 100
    best = (Fraction(-1), math.inf)
    for t in [math.inf] + sorted(set(scores)):
        tn = sum(1 for y, s in zip(labels, scores) if y == 0 and s < t)
        if Fraction(tn, n_neg) < need:
            continue
        sens = Fraction(sum(1 for y, s in zip(labels, scores) if y == 1 and s >= t), n_pos)
        if sens > best[0] or (sens == best[0] and t < best[1]):
            best = (sens, t)
    return float(best[0]), float(best[1])


def mirrored_std(values, middle=None):
    """(right, left) population std of the samples reflected about the centre."""
    m = statistics.median(values) if middle is None else middle
    hi = [v - m for v in values if v >= m]
    lo = [v - m for v in values if v <= m]
    right = statistics.pstdev(hi + [-x for x in hi]) if hi else 0.0
    left = statistics.pstdev(lo + [-x for x in lo]) if lo else 0.0
    return right, left


def fisher_oracle(a, b):
    ra, la = mirrored_std(a)
    rb, lb = mirrored_std(b)
    ma, mb = statistics.fmean(a), statistics.fmean(b)
    spread = ra + lb if ma <= mb else la + rb
    return abs(ma - mb) / spread


def rates_at(labels, scores, t):
    """(sensitivity, specificity) with positive meaning score >= t."""
    pos = [s for y, s in zip(labels, scores) if y == 1]
    neg = [s for y, s in zip(labels, scores) if y == 0]
    return sum(s >= t for s in pos) / len(pos), sum(s < t for s in neg) / len(neg)
