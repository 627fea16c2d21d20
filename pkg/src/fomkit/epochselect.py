"""Per-epoch figure-of-merit series, stopping-epoch selection and assessment reports."""
from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import errors, metrics, svgplot
from .scoreset import ScoreTable

FOM_KINDS = ("neg_val_ce", "bce", "auc", "sliver_auc", "sens_at_spec", "fisher")
TIE_BREAKS = ("earliest", "latest", "most_stable")
HIST_BINS = 20
DEFAULT_WINDOW = 0.05
SENS_SPEC_GRID = np.round(np.linspace(0.0, 1.0, 101), 2)


@dataclass(frozen=True)
class FomSpec:
    kind: str
    target_spec: float | None = None

    def __post_init__(self):
        if self.kind not in FOM_KINDS:
            raise errors.BadFomSpec(f"unknown figure of merit {self.kind!r}")
        if self.kind in ("sliver_auc", "sens_at_spec") and self.target_spec is None:
            raise errors.BadFomSpec(f"{self.kind} needs a target specificity")

    @classmethod
    def parse(cls, text: str) -> FomSpec:
        """``auc | sliver:<1-99> | sens_at_spec:<pct> | fisher | bce | neg_val_ce``."""
        kind, _, arg = text.strip().partition(":")
        if kind in ("sliver", "sliver_auc"):
            if not arg.strip().lstrip("+-").isdigit():
                raise errors.BadSliverSpec(f"sliver needs an integer 1..99, got {arg!r}")
            spec = int(arg)
            if not 1 <= spec <= 99:
                raise errors.BadSliverSpec(f"sliver target must be in 1..99, got {spec}")
            return cls("sliver_auc", spec)
        if kind == "sens_at_spec":
            try:
                pct = float(arg)
            except ValueError:
                raise errors.BadFomSpec(f"sens_at_spec needs a percentage, got {arg!r}") from None
            if not 0 < pct <= 100:
                raise errors.BadSpecificity(f"specificity must be in (0, 100], got {pct}")
            return cls("sens_at_spec", int(pct) if pct.is_integer() else pct)
        if arg:
            raise errors.BadFomSpec(f"{kind} takes no argument")
        return cls(kind)

    @property
    def name(self) -> str:
        if self.kind == "sliver_auc":
            return f"sliver:{self.target_spec:g}"
        if self.kind == "sens_at_spec":
            return f"sens_at_spec:{self.target_spec:g}"
        return self.kind

    def __str__(self):
        return self.name


def evaluate_fom(fom: FomSpec, labels, scores) -> float:
    if fom.kind == "auc":
        return metrics.roc_auc(labels, scores)
    if fom.kind == "sliver_auc":
        return metrics.sliver_auc(labels, scores, fom.target_spec)
    if fom.kind == "sens_at_spec":
        return metrics.sens_at_spec(labels, scores, fom.target_spec)[0]
    if fom.kind == "fisher":
        controls, positives = metrics.class_split(labels, scores)
        return metrics.fisher_distance(controls, positives)
    bce = metrics.balanced_cross_entropy(labels, scores)
    return -bce if fom.kind == "neg_val_ce" else bce


@dataclass
class FomSeries:
    epochs: list
    values: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch"] + [f.name for f in self.values])
        for i, e in enumerate(self.epochs):
            w.writerow([e] + [repr(v[i]) for v in self.values.values()])
        return buf.getvalue()


@dataclass(frozen=True)
class SelectionPolicy:
    tie_tolerance: float = 0.005
    tie_break: str = "earliest"

    def __post_init__(self):
        if not 0 <= self.tie_tolerance < 1:
            raise errors.BadConfig("tie_tolerance must be in [0, 1)")
        if self.tie_break not in TIE_BREAKS:
            raise errors.BadConfig(f"tie_break must be one of {TIE_BREAKS}")

    def __str__(self):
        return f"{self.tie_break}@{self.tie_tolerance:g}"


@dataclass(frozen=True)
class StabilityProfile:
    threshold_star: float
    sens_slope: float
    spec_slope: float
    window: float


def _epoch_tables(dump: ScoreTable):
    if dump.epoch is None:
        raise errors.MissingEpochColumn("score dump has no epoch column")
    for e in dump.epochs():
        part = dump.take(dump.epoch == e)
        if len(set(part.label.tolist())) < 2:
            raise errors.DegenerateEpoch(f"epoch {e} lacks one of the classes", epoch=e)
        yield e, part


def fom_series(dump: ScoreTable, foms, jobs: int = 1) -> FomSeries:
    """Evaluate each FoM on each epoch's records.  Higher is better for every kind but ``bce``."""
    foms = list(foms)
    parts = list(_epoch_tables(dump))

    def one(part):
        return [evaluate_fom(f, part.label, part.score) for f in foms]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, [p for _, p in parts]))
    else:
        rows = [one(p) for _, p in parts]
    values = {f: [r[j] for r in rows] for j, f in enumerate(foms)}
    return FomSeries(epochs=[e for e, _ in parts], values=values)


def threshold_curves(labels, scores, grid):
    """(threshold, sensitivity, specificity) with positive meaning ``score >= threshold``."""
    controls, positives = metrics.class_split(labels, scores)
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        raise errors.BadConfig("threshold grid is empty")
    pos_sorted = np.sort(positives)
    neg_sorted = np.sort(controls)
    sens = 1.0 - np.searchsorted(pos_sorted, grid, side="left") / len(pos_sorted)
    spec = np.searchsorted(neg_sorted, grid, side="left") / len(neg_sorted)
    return [(float(t), float(a), float(b)) for t, a, b in zip(grid, sens, spec)]


def stability_profile(labels, scores, target_spec_pct: float = 90.0,
                      window: float = DEFAULT_WINDOW) -> StabilityProfile:
    """Central-difference slopes of the sens/spec curves around the operating threshold."""
    if not window > 0:
        raise errors.BadConfig("window must be > 0")
    _, t_star = metrics.sens_at_spec(labels, scores, target_spec_pct)
    (_, s_lo, p_lo), (_, s_hi, p_hi) = threshold_curves(labels, scores, [t_star - window, t_star + window])
    return StabilityProfile(threshold_star=t_star, sens_slope=abs(s_hi - s_lo) / (2 * window),
                            spec_slope=abs(p_hi - p_lo) / (2 * window), window=window)


def select_epoch(series: FomSeries, fom: FomSpec, policy: SelectionPolicy | None = None,
                 dump: ScoreTable | None = None, window: float = DEFAULT_WINDOW):
    """Pick a stopping epoch; returns (epoch, value).

    Candidates are epochs within ``tie_tolerance`` (relative to ``|max|``) of
    the best value.  ``most_stable`` needs the score dump and minimises the
    summed sens/spec slopes at the FoM's target specificity (90% if it has none).
    """
    policy = policy or SelectionPolicy()
    if fom not in series.values:
        raise errors.FomNotInSeries(f"{fom.name} was not computed for this series")
    vals = np.asarray(series.values[fom], dtype=np.float64)
    best = vals.max()
    # max - tol*|max| equals (1 - tol)*max for positive maxima and stays sane for negative ones
    cand = np.flatnonzero(vals >= best - policy.tie_tolerance * abs(best))
    if policy.tie_break == "earliest":
        i = int(cand[0])
    elif policy.tie_break == "latest":
        i = int(cand[-1])
    else:
        if dump is None:
            raise errors.BadConfig("most_stable tie break needs the score dump")
        spec = fom.target_spec if fom.kind in ("sliver_auc", "sens_at_spec") else 90.0
        costs = []
        for i in cand:
            part = dump.take(dump.epoch == series.epochs[i])
            p = stability_profile(part.label, part.score, spec, window)
            costs.append(p.sens_slope + p.spec_slope)
        i = int(cand[int(np.argmin(costs))])
    return series.epochs[i], float(vals[i])


def moving_max(values, width: int = 3) -> np.ndarray:
    """Trailing running maximum over ``width`` consecutive entries."""
    v = np.asarray(values, dtype=np.float64)
    return np.array([v[max(0, i - width + 1): i + 1].max() for i in range(len(v))])


# --------------------------------------------------------------------------
# assessment report

def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def histogram_table(labels, scores):
    """Fixed 20-bin histogram on [0, 1]; out-of-range scores land in the end bins."""
    edges = np.linspace(0.0, 1.0, HIST_BINS + 1)
    y = np.asarray(labels)
    idx = np.clip(np.floor(np.clip(np.asarray(scores, dtype=np.float64), 0, 1) * HIST_BINS),
                  0, HIST_BINS - 1).astype(int)
    neg = np.bincount(idx[y == 0], minlength=HIST_BINS)
    pos = np.bincount(idx[y == 1], minlength=HIST_BINS)
    rows = [(f"{edges[b]:.2f}", f"{edges[b + 1]:.2f}", int(neg[b]), int(pos[b]))
            for b in range(HIST_BINS)]
    return edges, rows


@dataclass
class ReportBundle:
    """Relative path -> file text.  ``write`` materialises it under a directory."""

    files: dict = field(default_factory=dict)

    def write(self, out_dir) -> list:
        out_dir = Path(out_dir)
        written = []
        for rel, text in sorted(self.files.items()):
            path = out_dir / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8", newline="\n")
            written.append(path)
        return written


def assessment_report(dump: ScoreTable, covariate: str | None = None, epochs=None,
                      series: FomSeries | None = None, selections=None) -> ReportBundle:
    """CSV tables and SVG plots for qualitative per-epoch assessment.

    ``epochs`` defaults to every epoch in the dump.  ``series`` adds
    ``fom_series.csv|svg``; ``selections`` (list of dicts) adds ``selection.json``.
    """
    if dump.epoch is None:
        raise errors.MissingEpochColumn("score dump has no epoch column")
    if covariate is not None and covariate not in dump.covariates:
        raise errors.UnknownCovariate(
            f"covariate {covariate!r} not in dump (have {dump.covariate_names})", covariate=covariate)
    bundle = ReportBundle()
    files = bundle.files
    if series is not None:
        files["fom_series.csv"] = series.to_csv()
        marks = {}
        for sel in selections or []:
            marks[sel["fom"]] = sel["epoch"]
        files["fom_series.svg"] = svgplot.line_plot(
            {f.name: (series.epochs, v) for f, v in series.values.items()},
            title="Figures of merit per epoch", xlabel="epoch", ylabel="value", markers=marks)
    if selections is not None:
        files["selection.json"] = json.dumps(selections, indent=2) + "\n"

    wanted = dump.epochs() if epochs is None else sorted(set(epochs))
    for e in wanted:
        part = dump.take(dump.epoch == e)
        if len(part) == 0:
            continue
        d = f"epoch_{e}/"
        edges, rows = histogram_table(part.label, part.score)
        files[d + "histogram.csv"] = _csv(rows, ["bin_lo", "bin_hi", "count_control", "count_positive"])
        files[d + "histogram.svg"] = svgplot.histogram_plot(
            edges, {"control": [r[2] for r in rows], "positive": [r[3] for r in rows]},
            title=f"Score histogram, epoch {e}")

        order = np.arange(len(part))
        files[d + "scores.csv"] = _csv(
            [(e, part.subject_id[i], int(part.label[i]), repr(float(part.score[i]))) for i in order],
            ["epoch", "subject_id", "label", "score"])
        files[d + "scores.svg"] = svgplot.scatter_plot(
            {"control": (np.flatnonzero(part.label == 0).tolist(), part.score[part.label == 0].tolist()),
             "positive": (np.flatnonzero(part.label == 1).tolist(), part.score[part.label == 1].tolist())},
            title=f"Scores by class, epoch {e}", xlabel="record", ylabel="score")

        if 0 < part.label.sum() < len(part):
            curves = threshold_curves(part.label, part.score, SENS_SPEC_GRID)
            files[d + "sens_spec.csv"] = _csv(
                [(f"{t:.2f}", repr(s), repr(p)) for t, s, p in curves],
                ["threshold", "sensitivity", "specificity"])
            files[d + "sens_spec.svg"] = svgplot.line_plot(
                {"sensitivity": ([c[0] for c in curves], [c[1] for c in curves]),
                 "specificity": ([c[0] for c in curves], [c[2] for c in curves])},
                title=f"Sensitivity / specificity vs threshold, epoch {e}",
                xlabel="threshold", ylabel="rate", xlim=(0, 1), ylim=(0, 1.02))

        if covariate is not None:
            cov = part.covariates[covariate]
            files[d + f"score_vs_{covariate}.csv"] = _csv(
                [(e, part.subject_id[i], int(part.label[i]), repr(float(cov[i])),
                  repr(float(part.score[i]))) for i in order],
                ["epoch", "subject_id", "label", "cov", "score"])
            files[d + f"score_vs_{covariate}.svg"] = svgplot.scatter_plot(
                {"control": (cov[part.label == 0].tolist(), part.score[part.label == 0].tolist()),
                 "positive": (cov[part.label == 1].tolist(), part.score[part.label == 1].tolist())},
                title=f"Score vs {covariate}, epoch {e}", xlabel=covariate, ylabel="score")
    return bundle
