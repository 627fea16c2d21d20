"""Black-box hyperparameter search driven by 1 - FoM.

Two samplers: independent random draws, and a small Tree-of-Parzen-Estimators
sampler.  Trials are scored by :func:`cv_objective`, which pools k-fold
validation scores (after control-anchored alignment) at object or subject
level.  Model adapters only need a ``fold_scores(params, fold, seed)`` method
returning ``(train, validation)`` object-level tables.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy import stats
from scipy.special import ndtr

from . import errors, metrics
from .aggregate import AggregationRule, aggregate_subjects
from .epochselect import FomSpec, evaluate_fom
from .foldalign import CanonicalScale, align
from .rng import derive_seed, make_rng
from .scoreset import OBJECT, SUBJECT, ScoreTable, concat

GAMMA = 0.25
N_STARTUP = 10
N_CANDIDATES = 24
BANDWIDTH_FLOOR = 1e-3


# --------------------------------------------------------------------------
# search space

@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float
    type = "uniform"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise errors.BadSpace(f"uniform needs lo < hi, got {self.lo}, {self.hi}")


@dataclass(frozen=True)
class LogUniform:
    lo: float
    hi: float
    type = "loguniform"

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise errors.BadSpace(f"loguniform needs 0 < lo < hi, got {self.lo}, {self.hi}")


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int
    type = "int"

    def __post_init__(self):
        if not self.lo < self.hi:
            raise errors.BadSpace(f"int range needs lo < hi, got {self.lo}, {self.hi}")


@dataclass(frozen=True)
class Choice:
    values: tuple
    type = "choice"

    def __post_init__(self):
        if len(self.values) == 0:
            raise errors.BadSpace("choice needs at least one value")


def _domain_from_dict(name, d):
    kind = d.get("type")
    try:
        if kind == "uniform":
            return Uniform(float(d["lo"]), float(d["hi"]))
        if kind == "loguniform":
            return LogUniform(float(d["lo"]), float(d["hi"]))
        if kind == "int":
            return IntRange(int(d["lo"]), int(d["hi"]))
        if kind == "choice":
            return Choice(tuple(d["values"]))
    except KeyError as exc:
        raise errors.BadSpace(f"parameter {name!r}: missing {exc}") from None
    raise errors.BadSpace(f"parameter {name!r}: unknown domain type {kind!r}")


def _domain_to_dict(dom):
    if isinstance(dom, Choice):
        return {"type": "choice", "values": list(dom.values)}
    return {"type": dom.type, "lo": dom.lo, "hi": dom.hi}


@dataclass(frozen=True)
class SearchSpace:
    params: dict

    @classmethod
    def from_dict(cls, d):
        return cls({name: _domain_from_dict(name, spec) for name, spec in d.items()})

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_dict(self):
        return {name: _domain_to_dict(dom) for name, dom in self.params.items()}

    def contains(self, params) -> bool:
        if set(params) != set(self.params):
            return False
        for name, dom in self.params.items():
            v = params[name]
            if isinstance(dom, Choice):
                if v not in dom.values:
                    return False
            elif isinstance(dom, IntRange):
                if not isinstance(v, int) or not dom.lo <= v <= dom.hi:
                    return False
            elif not dom.lo <= v <= dom.hi:
                return False
        return True


# --------------------------------------------------------------------------
# trials and ledger

@dataclass
class Trial:
    index: int
    params: dict
    loss: float
    aux_foms: dict
    seed: int

    def to_dict(self):
        return {"index": self.index, "params": self.params, "loss": self.loss,
                "aux_foms": self.aux_foms, "seed": self.seed}


@dataclass(frozen=True)
class ObjectiveSpec:
    level: str = SUBJECT
    fom: FomSpec = field(default_factory=lambda: FomSpec("auc"))
    aggregation: AggregationRule = field(default_factory=lambda: AggregationRule("nth_largest", n=1))
    folds: int = 5
    canonical: CanonicalScale = field(default_factory=CanonicalScale)
    # when set, N of an nth_* aggregation is read from this hyperparameter
    aggregation_param: str | None = None

    def __post_init__(self):
        if self.level not in (OBJECT, SUBJECT):
            raise errors.BadConfig(f"level must be object or subject, got {self.level!r}")
        if self.folds < 2:
            raise errors.BadConfig("need at least 2 folds")
        if self.aggregation_param and not self.aggregation.kind.startswith("nth_"):
            raise errors.BadConfig("aggregation_param needs an nth_* aggregation rule")

    def rule_for(self, params) -> AggregationRule:
        if self.aggregation_param is None:
            return self.aggregation
        return AggregationRule(self.aggregation.kind, n=int(params[self.aggregation_param]))

    def describe(self):
        agg = f", aggregation={self.aggregation}" if self.level == SUBJECT else ""
        if self.aggregation_param:
            agg += f" (n from {self.aggregation_param!r})"
        return f"1 - {self.fom.name} at {self.level} level over {self.folds} folds{agg}"

    def to_dict(self):
        return {"level": self.level, "fom": self.fom.name, "aggregation": str(self.aggregation),
                "folds": self.folds, "aggregation_param": self.aggregation_param,
                "canonical": {"median": self.canonical.median, "std": self.canonical.std}}


@dataclass
class TrialLedger:
    space: SearchSpace
    strategy: str
    objective_descr: str
    trials: list = field(default_factory=list)
    seed: int | None = None
    objective: dict | None = None

    def best(self) -> Trial:
        # min() keeps the first (lowest index) among equal losses
        return min(self.trials, key=lambda t: t.loss)

    def header(self):
        return {"type": "header", "space": self.space.to_dict(), "strategy": self.strategy,
                "objective": self.objective_descr, "objective_spec": self.objective,
                "seed": self.seed}

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header())]
        lines += [json.dumps({"type": "trial", **t.to_dict()}) for t in self.trials]
        return "".join(line + "\n" for line in lines)

    @classmethod
    def from_jsonl(cls, text):
        lines = [json.loads(x) for x in text.splitlines() if x.strip()]
        if not lines or lines[0].get("type") != "header":
            raise errors.MalformedInput("ledger must start with a header line")
        h = lines[0]
        ledger = cls(SearchSpace.from_dict(h["space"]), h["strategy"], h["objective"],
                     seed=h.get("seed"), objective=h.get("objective_spec"))
        for rec in lines[1:]:
            ledger.trials.append(Trial(rec["index"], rec["params"], rec["loss"],
                                       rec["aux_foms"], rec["seed"]))
        return ledger


# --------------------------------------------------------------------------
# samplers

def _draw_random(dom, rng):
    if isinstance(dom, Uniform):
        return float(rng.uniform(dom.lo, dom.hi))
    if isinstance(dom, LogUniform):
        v = math.exp(rng.uniform(math.log(dom.lo), math.log(dom.hi)))
        return float(min(max(v, dom.lo), dom.hi))
    if isinstance(dom, IntRange):
        return int(rng.integers(dom.lo, dom.hi + 1))
    return dom.values[int(rng.integers(len(dom.values)))]


def _to_internal(dom, v):
    """Map a value into the continuous space the Parzen estimator works in."""
    return math.log(v) if isinstance(dom, LogUniform) else float(v)


def _bounds(dom):
    if isinstance(dom, LogUniform):
        return math.log(dom.lo), math.log(dom.hi)
    if isinstance(dom, IntRange):
        return dom.lo - 0.5, dom.hi + 0.5
    return float(dom.lo), float(dom.hi)


class _Parzen1D:
    """Truncated Gaussian-kernel density on [lo, hi] plus a flat prior component.

    Scott bandwidth ``std * n**(-1/5)`` floored at ``BANDWIDTH_FLOOR`` of the
    domain width, and never below ``width / min(100, n + 1)`` so a tight good
    set cannot freeze the search on one point.  The prior carries weight 1/(n+1) so the density never
    vanishes inside the domain.
    """

    def __init__(self, points, lo, hi):
        self.lo, self.hi = lo, hi
        self.mu = np.asarray(points, dtype=np.float64)
        n = len(self.mu)
        width = hi - lo
        sd = float(np.std(self.mu)) if n > 1 else width
        h = sd * n ** (-0.2) if n else width
        self.h = max(h, BANDWIDTH_FLOOR * width, width / min(100, n + 1))
        self.w_prior = 1.0 / (n + 1)
        self.mass = ndtr((hi - self.mu) / self.h) - ndtr((lo - self.mu) / self.h)

    def pdf(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        prior = self.w_prior / (self.hi - self.lo)
        if len(self.mu) == 0:
            return np.full_like(x, 1.0 / (self.hi - self.lo))
        z = (x[:, None] - self.mu[None, :]) / self.h
        k = np.exp(-0.5 * z * z) / (self.h * math.sqrt(2 * math.pi)) / self.mass[None, :]
        return prior + (1 - self.w_prior) * k.mean(axis=1)

    def sample(self, rng, size):
        out = np.empty(size)
        for i in range(size):
            if len(self.mu) == 0 or rng.random() < self.w_prior:
                out[i] = rng.uniform(self.lo, self.hi)
                continue
            c = self.mu[rng.integers(len(self.mu))]
            for _ in range(100):
                v = rng.normal(c, self.h)
                if self.lo <= v <= self.hi:
                    break
            out[i] = min(max(v, self.lo), self.hi)
        return out


def _categorical_probs(values, choices):
    counts = np.array([sum(1 for v in values if v == c) for c in choices], dtype=np.float64)
    return (counts + 1.0) / (len(values) + len(choices))


def _tpe_one(dom, good_vals, bad_vals, rng):
    if isinstance(dom, Choice):
        pg = _categorical_probs(good_vals, dom.values)
        pb = _categorical_probs(bad_vals, dom.values)
        cand = rng.choice(len(dom.values), size=N_CANDIDATES, p=pg)
        ratio = np.log(pg[cand]) - np.log(pb[cand])
        return dom.values[int(cand[int(np.argmax(ratio))])]
    lo, hi = _bounds(dom)
    good = _Parzen1D([_to_internal(dom, v) for v in good_vals], lo, hi)
    bad = _Parzen1D([_to_internal(dom, v) for v in bad_vals], lo, hi)
    cand = good.sample(rng, N_CANDIDATES)
    score = np.log(good.pdf(cand)) - np.log(bad.pdf(cand))
    best = float(cand[int(np.argmax(score))])
    if isinstance(dom, IntRange):
        return int(min(max(round(best), dom.lo), dom.hi))
    if isinstance(dom, LogUniform):
        return float(min(max(math.exp(best), dom.lo), dom.hi))
    return float(min(max(best, dom.lo), dom.hi))


def sample_params(space: SearchSpace, trials=(), strategy: str = "random", rng_seed: int = 0,
                  n_startup: int = N_STARTUP, gamma: float = GAMMA) -> dict:
    """Draw one parameter set.  ``trials`` are completed trials (list or ledger)."""
    if not space.params:
        raise errors.EmptySpace("search space has no parameters")
    if strategy not in ("random", "tpe"):
        raise errors.BadConfig(f"unknown strategy {strategy!r}")
    if isinstance(trials, TrialLedger):
        trials = trials.trials
    rng = make_rng(rng_seed, "sample")
    trials = [t for t in trials if math.isfinite(t.loss)]
    if strategy == "random" or len(trials) < n_startup:
        return {name: _draw_random(dom, rng) for name, dom in space.params.items()}
    ranked = sorted(trials, key=lambda t: (t.loss, t.index))
    n_good = max(1, math.ceil(gamma * len(ranked)))
    good, bad = ranked[:n_good], ranked[n_good:]
    return {name: _tpe_one(dom, [t.params[name] for t in good], [t.params[name] for t in bad], rng)
            for name, dom in space.params.items()}


# --------------------------------------------------------------------------
# objective

class ModelAdapter(Protocol):
    def fold_scores(self, params: dict, fold: int, seed: int) -> tuple[ScoreTable, ScoreTable]:
        """(train, validation) object-level tables for ``fold``."""


def pooled_tables(adapter, spec: ObjectiveSpec, params: dict, seed: int = 0) -> dict:
    """Aligned, fold-pooled validation tables keyed by level ("object", "subject")."""
    rule = spec.rule_for(params)
    obj_tables, subj_tables = [], []
    for k in range(spec.folds):
        _, val = adapter.fold_scores(params, k, seed)
        if val.fold is None:
            val = val.with_fold(k)
        metrics.class_split(val.label, val.score)  # DegenerateClasses per fold
        obj_tables.append(val)
        subj_tables.append(aggregate_subjects(val, rule))
    return {OBJECT: _pool_aligned(obj_tables, spec.canonical),
            SUBJECT: _pool_aligned(subj_tables, spec.canonical)}


def _pool_aligned(tables, canonical):
    # zero control spread in a fold: pool raw scores, like the reference code's fallback
    pooled = concat(tables)
    try:
        aligned, _ = align(pooled, canonical)
        return aligned
    except errors.ZeroSpread:
        return pooled


def cv_objective(adapter, spec: ObjectiveSpec, params: dict, seed: int = 0):
    """(loss, aux_foms) with loss = 1 - FoM on the pooled, aligned validation folds.

    ``aux_foms`` always carries ``object_auc`` and ``subject_auc``, plus the
    driving FoM under ``<level>_<fom name>``.
    """
    pooled = pooled_tables(adapter, spec, params, seed)
    aux = {
        "object_auc": metrics.roc_auc(pooled[OBJECT].label, pooled[OBJECT].score),
        "subject_auc": metrics.roc_auc(pooled[SUBJECT].label, pooled[SUBJECT].score),
    }
    table = pooled[spec.level]
    value = evaluate_fom(spec.fom, table.label, table.score)
    aux[f"{spec.level}_{spec.fom.name}"] = value
    return 1.0 - value, aux


def run_search(adapter, spec: ObjectiveSpec, space: SearchSpace, budget: int,
               strategy: str = "random", seed: int = 0, jobs: int = 1,
               ledger_path=None) -> TrialLedger:
    """Run ``budget`` trials.  Trial i samples with seed derived from (seed, "trial", i).

    With ``jobs > 1`` trials run in batches of ``jobs``; TPE conditions each
    batch on all trials finished before it, so results depend on ``jobs`` but
    not on thread timing.  If an objective raises, the completed trials are
    written to ``ledger_path`` and :class:`SearchAborted` is raised.
    """
    if budget < 1:
        raise errors.BadConfig("budget must be >= 1")
    ledger = TrialLedger(space, strategy, spec.describe(), seed=seed, objective=spec.to_dict())
    fh = open(ledger_path, "w", encoding="utf-8", newline="\n") if ledger_path else None
    if fh:
        fh.write(json.dumps(ledger.header()) + "\n")

    def run_one(i, params):
        trial_seed = derive_seed(seed, "trial", i)
        loss, aux = cv_objective(adapter, spec, params, seed=trial_seed)
        return Trial(i, params, loss, aux, trial_seed)

    batch = max(1, int(jobs))
    pool = ThreadPoolExecutor(max_workers=batch) if batch > 1 else None
    try:
        for start in range(0, budget, batch):
            idx = list(range(start, min(start + batch, budget)))
            done = list(ledger.trials)
            params = [sample_params(space, done, strategy, derive_seed(seed, "trial", i)) for i in idx]
            try:
                if pool:
                    results = list(pool.map(run_one, idx, params))
                else:
                    results = [run_one(i, p) for i, p in zip(idx, params)]
            except Exception as exc:
                raise errors.SearchAborted(f"trial in batch starting at {start} failed: {exc}",
                                           ledger) from exc
            for t in results:
                ledger.trials.append(t)
                if fh:
                    fh.write(json.dumps({"type": "trial", **t.to_dict()}) + "\n")
    finally:
        if pool:
            pool.shutdown()
        if fh:
            fh.close()
    return ledger


# --------------------------------------------------------------------------
# analysis

def spearman(a, b) -> float:
    a, b = np.asarray(a, dtype=np.float64), np.asarray(b, dtype=np.float64)
    if len(a) < 2 or np.all(a == a[0]) or np.all(b == b[0]):
        return float("nan")
    return float(stats.spearmanr(a, b).statistic)


@dataclass
class LedgerAnalysis:
    sorted_rows: list
    scatter: list
    spearman: float


def ledger_analysis(ledger: TrialLedger, driving: str | None = None) -> LedgerAnalysis:
    """Sorted-by-driving-FoM table, (object AUC, subject AUC) pairs and their rank correlation.

    ``driving`` is an ``aux_foms`` key; by default trials are ordered by
    ascending ``1 - loss``.
    """
    if not ledger.trials:
        raise errors.BadConfig("ledger is empty")
    key = (lambda t: t.aux_foms[driving]) if driving else (lambda t: 1.0 - t.loss)
    order = sorted(ledger.trials, key=lambda t: (key(t), t.index))
    rows = [(rank, t.index, key(t), t.aux_foms.get("object_auc"), t.aux_foms.get("subject_auc"))
            for rank, t in enumerate(order)]
    pairs = [(t.aux_foms["object_auc"], t.aux_foms["subject_auc"]) for t in ledger.trials]
    rho = spearman([p[0] for p in pairs], [p[1] for p in pairs])
    return LedgerAnalysis(rows, pairs, rho)
