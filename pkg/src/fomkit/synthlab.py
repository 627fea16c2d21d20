"""Seeded synthetic data reproducing two structural phenomena.

These generators are engineered on purpose.  They replicate the *shape* of two
findings, not any real dataset:

* Experiment 1: with several objects per subject, the hyperparameters that
  maximise pooled object-level AUC are not the ones that maximise
  subject-level AUC, and the two AUCs are nearly uncorrelated across random
  hyperparameter draws.
* Experiment 2: across training epochs, balanced cross-entropy on the
  validation set bottoms out well before the high-specificity figures of
  merit stop improving.

All constants live in the default configs below.  Changing a default changes
the acceptance results; treat it as a breaking change.

Experiment 1 model
------------------
Object ``j`` of subject ``s`` (label ``y``) has latent feature::

    x = shift*y + u_s + e_sj + drift_j + spike_sj

with subject effect ``u_s``, object noise ``e_sj``, a label-independent drift
along the object index, and label-independent outlier spikes at
``outlier_rate``.  The scorer consumes these hyperparameters:

* ``calib`` in [0, 1]: fraction of the positional drift removed.
* ``smoothing`` in [0, 1]: pulls each object toward its subject mean.  It
  denoises objects (object AUC up) but spreads a single outlier over the
  whole subject, which defeats a robust order statistic (subject AUC down).
* ``threshold`` and ``sharpness``: logistic output ``sigmoid(sharpness*(x - threshold))``.
* ``n_object`` (optional, consumed by the objective, not the scorer): the N of
  the nth-largest aggregation.

Each fold's model gets its own affine calibration, so raw fold scores are not
comparable until aligned.

Experiment 2 model
------------------
Per subject a base logit ``b`` (controls ``-shift + e``, positives
``+shift + e``).  At training progress ``t = epoch/(n_epochs-1)``:

* the upper tail of the controls (``e > 0``) shrinks by ``exp(-tail_compression_rate*t)``;
* the lowest-covariate ``hard_positive_fraction`` of positives sit
  ``hard_offset`` lower, mostly on the wrong side of zero;
* every logit is multiplied by ``base_scale*(1 + overconfidence_rate*t)``,
  so misclassified subjects (the hard positives above all) are pushed toward
  the wrong rail without changing any ranks.

Growing confidence first lowers and then raises the cross-entropy, while
rank-based figures of merit keep improving from the tail compression.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from functools import lru_cache

import numpy as np

from . import errors
from .rng import derive_seed, make_rng
from .scoreset import OBJECT, SUBJECT, ScoreTable


@dataclass(frozen=True)
class Exp1Config:
    n_subjects_per_class: int = 60
    objects_per_subject: int = 7
    noise_scale: float = 1.0
    position_effect: float = 1.0
    outlier_rate: float = 0.15
    folds: int = 5
    class_shift: float = 1.0
    subject_effect: float = 0.3
    outlier_low: float = 4.0
    outlier_high: float = 8.0
    fold_calibration_spread: float = 0.3

    def __post_init__(self):
        if self.n_subjects_per_class < self.folds:
            raise errors.BadConfig("need at least one subject per class per fold")
        if self.objects_per_subject < 1:
            raise errors.BadConfig("objects_per_subject must be >= 1")
        if not self.noise_scale > 0:
            raise errors.BadConfig("noise_scale must be > 0")
        if not 0 <= self.outlier_rate < 1:
            raise errors.BadConfig("outlier_rate must be in [0, 1)")
        if self.folds < 2:
            raise errors.BadConfig("folds must be >= 2")


@dataclass(frozen=True)
class Exp2Config:
    n_epochs: int = 40
    n_per_class: int = 150
    tail_compression_rate: float = 2.0
    hard_positive_fraction: float = 0.2
    overconfidence_rate: float = 4.0
    covariate_name: str = "cov_ga_days"
    class_shift: float = 1.2
    base_scale: float = 0.6
    hard_offset: float = 2.0
    jitter: float = 0.03
    covariate_range: tuple = (100.0, 280.0)

    def __post_init__(self):
        if self.n_epochs < 2:
            raise errors.BadConfig("n_epochs must be >= 2")
        if self.n_per_class < 2:
            raise errors.BadConfig("n_per_class must be >= 2")
        if not 0 <= self.hard_positive_fraction < 1:
            raise errors.BadConfig("hard_positive_fraction must be in [0, 1)")
        if self.tail_compression_rate < 0 or self.overconfidence_rate < 0:
            raise errors.BadConfig("rates must be >= 0")
        if not self.covariate_name.startswith("cov_"):
            raise errors.BadConfig("covariate_name must start with 'cov_'")


def _config_from_dict(cls, d):
    known = {f.name for f in fields(cls)}
    unknown = set(d) - known
    if unknown:
        raise errors.BadConfig(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    d = dict(d)
    if "covariate_range" in d:
        d["covariate_range"] = tuple(d["covariate_range"])
    return cls(**d)


def load_config(kind: str, text: str | None):
    cls = {"exp1": Exp1Config, "exp2": Exp2Config}[kind]
    return cls() if not text else _config_from_dict(cls, json.loads(text))


def config_to_json(config) -> str:
    return json.dumps(asdict(config), indent=2) + "\n"


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


# --------------------------------------------------------------------------
# experiment 1

@dataclass(frozen=True)
class _Exp1Latent:
    labels: np.ndarray      # (n,)
    folds: np.ndarray       # (n,)
    subject_ids: tuple
    base: np.ndarray        # (n, m) shift*y + u + e + spike
    drift: np.ndarray       # (m,)
    fold_scale: np.ndarray  # (k,)
    fold_offset: np.ndarray


@lru_cache(maxsize=16)
def _exp1_latent(config: Exp1Config, seed: int) -> _Exp1Latent:
    rng = make_rng(seed, "exp1-latent")
    c = config
    n_cls, m = c.n_subjects_per_class, c.objects_per_subject
    n = 2 * n_cls
    labels = np.r_[np.zeros(n_cls, dtype=np.int64), np.ones(n_cls, dtype=np.int64)]
    folds = np.empty(n, dtype=np.int64)
    for cls in (0, 1):
        idx = np.flatnonzero(labels == cls)
        folds[rng.permutation(idx)] = np.arange(len(idx)) % c.folds
    u = rng.normal(0.0, c.subject_effect * c.noise_scale, n)
    e = rng.normal(0.0, c.noise_scale, (n, m))
    is_outlier = rng.random((n, m)) < c.outlier_rate
    spikes = rng.uniform(c.outlier_low, c.outlier_high, (n, m)) * is_outlier
    base = c.class_shift * labels[:, None] + u[:, None] + e + spikes
    drift = c.position_effect * (np.arange(m) - (m - 1) / 2)
    fold_scale = np.exp(rng.normal(0.0, c.fold_calibration_spread, c.folds))
    fold_offset = rng.normal(0.0, c.fold_calibration_spread, c.folds)
    subject_ids = tuple(f"S{i:04d}" for i in range(n))
    return _Exp1Latent(labels, folds, subject_ids, base, drift, fold_scale, fold_offset)


EXP1_DEFAULT_PARAMS = {"calib": 1.0, "smoothing": 0.0, "threshold": 0.5, "sharpness": 1.0}


def exp1_object_scores(config: Exp1Config, params: dict, seed: int) -> np.ndarray:
    """(folds, n_subjects, objects) scores: every fold's model applied to every subject."""
    lat = _exp1_latent(config, seed)
    p = {**EXP1_DEFAULT_PARAMS, **params}
    x = lat.base + (1.0 - p["calib"]) * lat.drift[None, :]
    a = p["smoothing"]
    x = (1.0 - a) * x + a * x.mean(axis=1, keepdims=True)
    x = lat.fold_scale[:, None, None] * x[None] + lat.fold_offset[:, None, None]
    return _sigmoid(p["sharpness"] * (x - p["threshold"]))


def _exp1_table(lat: _Exp1Latent, scores: np.ndarray, rows: np.ndarray, fold: int | None):
    m = scores.shape[1]
    sid = np.repeat(np.asarray(lat.subject_ids, dtype=object)[rows], m)
    oid = np.array([f"{s}-o{j}" for s, j in zip(sid, np.tile(np.arange(m), len(rows)))], dtype=object)
    fold_col = np.repeat(lat.folds[rows], m) if fold is None else np.full(len(sid), fold)
    return ScoreTable(subject_id=sid, label=np.repeat(lat.labels[rows], m),
                      score=scores[rows].ravel(), object_id=oid, fold=fold_col, level=OBJECT)


def gen_experiment1(config: Exp1Config, params: dict, seed: int):
    """Per-fold ``(train, validation)`` object-level tables.

    Validation rows carry their fold index; training rows carry the fold they
    are validated in.  Deterministic in (config, params, seed).
    """
    lat = _exp1_latent(config, seed)
    scores = exp1_object_scores(config, params, seed)
    out = []
    for k in range(config.folds):
        val_rows = np.flatnonzero(lat.folds == k)
        train_rows = np.flatnonzero(lat.folds != k)
        out.append((_exp1_table(lat, scores[k], train_rows, None),
                    _exp1_table(lat, scores[k], val_rows, k)))
    return out


class Exp1Adapter:
    """Model adapter over the experiment-1 generator with a fixed data seed.

    The trial seed passed to ``fold_scores`` is ignored: the scorer is
    deterministic, so only hyperparameters vary between trials.
    """

    def __init__(self, config: Exp1Config | None = None, data_seed: int = 0):
        self.config = config or Exp1Config()
        self.data_seed = data_seed
        self._cache_key = None
        self._cache = None

    def fold_scores(self, params, fold, seed=0):
        key = tuple(sorted(params.items()))
        if key != self._cache_key:
            self._cache = gen_experiment1(self.config, params, self.data_seed)
            self._cache_key = key
        return self._cache[fold]


EXP1_SPACE = {
    "calib": {"type": "uniform", "lo": 0.0, "hi": 1.0},
    "smoothing": {"type": "uniform", "lo": 0.0, "hi": 1.0},
    "threshold": {"type": "uniform", "lo": -1.0, "hi": 2.0},
    "sharpness": {"type": "loguniform", "lo": 0.3, "hi": 3.0},
    "n_object": {"type": "int", "lo": 1, "hi": 7},
}


# --------------------------------------------------------------------------
# experiment 2

def gen_experiment2(config: Exp2Config, seed: int) -> ScoreTable:
    """Subject-level per-epoch validation scores, every subject at every epoch."""
    c = config
    rng = make_rng(seed, "exp2-latent")
    n = 2 * c.n_per_class
    labels = np.r_[np.zeros(c.n_per_class, dtype=np.int64), np.ones(c.n_per_class, dtype=np.int64)]
    lo, hi = c.covariate_range
    cov = np.round(rng.uniform(lo, hi, n))
    e = rng.normal(0.0, 1.0, n)
    pos = np.flatnonzero(labels == 1)
    n_hard = int(round(c.hard_positive_fraction * len(pos)))
    hard = np.zeros(n, dtype=bool)
    hard[pos[np.argsort(cov[pos], kind="stable")[:n_hard]]] = True

    jitter = rng.normal(0.0, c.jitter, (c.n_epochs, n))
    epochs = np.arange(c.n_epochs)
    t = epochs / (c.n_epochs - 1)
    ctrl = labels == 0
    compress = np.exp(-c.tail_compression_rate * t)[:, None]
    e_t = np.where(ctrl[None, :] & (e[None, :] > 0), e[None, :] * compress, e[None, :])
    b = np.where(ctrl, -c.class_shift, c.class_shift)[None, :] + e_t
    b = b - hard[None, :] * c.hard_offset
    scale = (c.base_scale * (1.0 + c.overconfidence_rate * t))[:, None]
    scores = _sigmoid(scale * b + jitter)

    sid = np.array([f"P{i:04d}" for i in range(n)], dtype=object)
    return ScoreTable(
        subject_id=np.tile(sid, c.n_epochs),
        label=np.tile(labels, c.n_epochs),
        score=scores.ravel(),
        epoch=np.repeat(epochs, n),
        covariates={c.covariate_name: np.tile(cov, c.n_epochs)},
        level=SUBJECT,
    )


__all__ = ["Exp1Config", "Exp2Config", "gen_experiment1", "gen_experiment2", "Exp1Adapter",
           "EXP1_SPACE", "exp1_object_scores", "load_config", "config_to_json", "derive_seed"]
