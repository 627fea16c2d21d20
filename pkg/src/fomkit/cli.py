"""Command-line interface: ``fomkit <metrics|align|aggregate|epochs|search|synth> ...``

Exit codes: 0 success, 2 input error, 3 domain precondition failed, 4 internal failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__, errors, metrics, svgplot
from .aggregate import AggregationRule, aggregate_subjects
from .epochselect import (FomSpec, SelectionPolicy, assessment_report, evaluate_fom,
                          fom_series, select_epoch)
from .foldalign import CanonicalScale, align
from .hypersearch import (ObjectiveSpec, SearchSpace, ledger_analysis, pooled_tables,
                          run_search)
from .scoreset import check, concat, read_table, write_table
from .synthlab import Exp1Adapter, config_to_json, gen_experiment1, gen_experiment2, load_config

log = logging.getLogger("fomkit")

EXIT_OK, EXIT_INPUT, EXIT_PRECONDITION, EXIT_INTERNAL = 0, 2, 3, 4


# --------------------------------------------------------------------------
# helpers

def _digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return "sha256:" + h.hexdigest()


def write_manifest(path, args, inputs):
    """Record the command, normalised flags, seed, version and input digests."""
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "json_errors")}
    manifest = {
        "command": args.command,
        "args": flags,
        "seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "input_digests": {str(p): _digest(p) for p in inputs},
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, default=str) + "\n", encoding="utf-8")


def _write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def _rows_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(str(c) for c in r) for r in rows]
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    return f"{v:.6f}"


# --------------------------------------------------------------------------
# commands

def cmd_metrics(args):
    table = read_table(args.input)
    foms = [FomSpec.parse(f) for f in (args.fom or ["auc"])]
    rows = []
    for f in foms:
        rows.append((f.name, evaluate_fom(f, table.label, table.score)))
    text = _rows_csv(["fom", "value"], [(n, _fmt(v)) for n, v in rows])
    sys.stdout.write(text)
    if args.out:
        write_manifest(str(args.out) + ".manifest.json", args, [args.input])
        _write(args.out, _rows_csv(["fom", "value"], [(n, repr(v)) for n, v in rows]))
    return EXIT_OK


def cmd_align(args):
    table = read_table(args.input)
    canonical = CanonicalScale(args.canonical_median, args.canonical_std)
    out = Path(args.out or "aligned.csv")
    write_manifest(str(out) + ".manifest.json", args, [args.input])
    aligned, model = align(table, canonical, clip=args.clip == "on")
    write_table(aligned, out)
    _write(args.model_out or str(out) + ".model.json", model.to_json())
    log.info("aligned %d records over %d folds", len(aligned), len(model.per_fold))
    return EXIT_OK


def cmd_aggregate(args):
    table = read_table(args.input)
    rule = AggregationRule.parse(args.rule)
    out = Path(args.out or "subjects.csv")
    write_manifest(str(out) + ".manifest.json", args, [args.input])
    write_table(aggregate_subjects(table, rule), out)
    return EXIT_OK


def cmd_epochs(args):
    dump = read_table(args.input)
    foms = [FomSpec.parse(f) for f in (args.fom or ["neg_val_ce", "auc", "sliver:90"])]
    policy = SelectionPolicy(args.tie_tolerance, args.tie_break)
    out_dir = Path(args.out or ".")
    write_manifest(out_dir / "manifest.json", args, [args.input])
    series = fom_series(dump, foms, jobs=args.jobs)
    selections = []
    for f in foms:
        epoch, value = select_epoch(series, f, policy, dump=dump, window=args.window)
        selections.append({"fom": f.name,
                           "policy": {"tie_break": policy.tie_break,
                                      "tie_tolerance": policy.tie_tolerance},
                           "epoch": epoch, "value": value})
    if args.report_epochs == "all":
        epochs = None
    else:
        epochs = sorted({s["epoch"] for s in selections})
    bundle = assessment_report(dump, args.covariate, epochs=epochs, series=series,
                               selections=selections)
    bundle.write(out_dir / "report")
    _write(out_dir / "selection.json", json.dumps(selections, indent=2) + "\n")
    for s in selections:
        print(f"{s['fom']},{s['epoch']},{_fmt(s['value'])}")
    return EXIT_OK


def cmd_search(args):
    space = SearchSpace.from_json(Path(args.space).read_text(encoding="utf-8"))
    inputs = [args.space]
    cfg_text = None
    if args.config:
        cfg_text = Path(args.config).read_text(encoding="utf-8")
        inputs.append(args.config)
    adapter = Exp1Adapter(load_config("exp1", cfg_text), data_seed=args.data_seed)
    spec = ObjectiveSpec(level=args.level, fom=FomSpec.parse(args.objective_fom),
                         aggregation=AggregationRule.parse(args.aggregation),
                         folds=adapter.config.folds, aggregation_param=args.aggregation_param,
                         canonical=CanonicalScale(args.canonical_median, args.canonical_std))
    out_dir = Path(args.out or ".")
    write_manifest(out_dir / "manifest.json", args, inputs)
    try:
        ledger = run_search(adapter, spec, space, args.budget, args.strategy, args.seed,
                            jobs=args.jobs, ledger_path=out_dir / "ledger.jsonl")
    except errors.SearchAborted as exc:
        log.error("search aborted after %d trials; partial ledger kept", len(exc.ledger.trials))
        raise

    analysis = ledger_analysis(ledger)
    _write(out_dir / "trials_sorted.csv", _rows_csv(
        ["rank", "trial", "driving_fom", "object_auc", "subject_auc"],
        [(r, i, repr(d), repr(o), repr(s)) for r, i, d, o, s in analysis.sorted_rows]))
    _write(out_dir / "auc_scatter.csv", _rows_csv(
        ["trial", "object_auc", "subject_auc"],
        [(t.index, repr(o), repr(s)) for t, (o, s) in zip(ledger.trials, analysis.scatter)]))
    best = ledger.best()
    summary = {"best_trial": best.index, "best_loss": best.loss, "best_params": best.params,
               "best_aux_foms": best.aux_foms,
               "spearman_object_vs_subject_auc": None if np.isnan(analysis.spearman)
               else analysis.spearman,
               "n_trials": len(ledger.trials), "strategy": ledger.strategy,
               "objective": ledger.objective_descr}
    _write(out_dir / "analysis.json", json.dumps(summary, indent=2) + "\n")

    ranks = [r[0] for r in analysis.sorted_rows]
    _write(out_dir / "sorted_aucs.svg", svgplot.line_plot(
        {"object AUC": (ranks, [r[3] for r in analysis.sorted_rows]),
         "subject AUC": (ranks, [r[4] for r in analysis.sorted_rows])},
        title=f"AUCs by sorted trial ({spec.level}-driven)", xlabel="sorted trial index",
        ylabel="AUC"))
    _write(out_dir / "auc_scatter.svg", svgplot.scatter_plot(
        {"trials": ([p[0] for p in analysis.scatter], [p[1] for p in analysis.scatter])},
        title="Subject vs object AUC per trial", xlabel="object AUC", ylabel="subject AUC"))

    pooled = pooled_tables(adapter, spec, best.params, best.seed)
    roc_rows, curves = [], {}
    for level, table in pooled.items():
        roc = metrics.roc_curve(table.label, table.score)
        curves[f"{level} (AUC {metrics.auc(roc):.3f})"] = (roc.fpr.tolist(), roc.tpr.tolist())
        roc_rows += [(level, repr(f), repr(t), repr(th)) for f, t, th in roc.points]
    _write(out_dir / "best_roc.csv", _rows_csv(["level", "fpr", "tpr", "threshold"], roc_rows))
    _write(out_dir / "best_roc.svg", svgplot.line_plot(
        curves, title=f"Best trial {best.index} ROC", xlabel="false positive rate",
        ylabel="true positive rate", xlim=(0, 1), ylim=(0, 1.02)))
    print(f"best trial {best.index}: loss {_fmt(best.loss)}, "
          f"object_auc {_fmt(best.aux_foms['object_auc'])}, "
          f"subject_auc {_fmt(best.aux_foms['subject_auc'])}")
    return EXIT_OK


def cmd_synth(args):
    cfg_text = None
    inputs = []
    if args.config:
        cfg_text = Path(args.config).read_text(encoding="utf-8")
        inputs.append(args.config)
    config = load_config(args.experiment, cfg_text)
    out = Path(args.out or f"{args.experiment}.csv")
    write_manifest(str(out) + ".manifest.json", args, inputs)
    if args.experiment == "exp2":
        table = gen_experiment2(config, args.seed)
    else:
        params = json.loads(args.params) if args.params else {}
        table = concat([val for _, val in gen_experiment1(config, params, args.seed)])
    check(table)
    write_table(table, out)
    _write(str(out) + ".config.json", config_to_json(config))
    return EXIT_OK


# --------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json-errors", action="store_true",
                        help="emit errors as JSON on stderr")
    common.add_argument("--jobs", type=int, default=1, help="worker threads (default 1)")
    common.add_argument("-o", "--out", "--out-dir", dest="out", default=None,
                        help="output file or directory")
    common.add_argument("-v", "--verbose", action="store_true")

    seeded = argparse.ArgumentParser(add_help=False)
    seeded.add_argument("--seed", type=int, required=True, help="random seed (required)")
    unseeded = argparse.ArgumentParser(add_help=False)
    unseeded.add_argument("--seed", type=int, default=None,
                          help="accepted for uniformity; the command is not randomized")

    p = argparse.ArgumentParser(prog="fomkit", description="Clinically tailored figures of merit.")
    p.add_argument("--version", action="version", version=f"fomkit {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    m = sub.add_parser("metrics", parents=[common, unseeded], help="compute figures of merit for a score table")
    m.add_argument("input")
    m.add_argument("--fom", action="append",
                   help="auc | sliver:<1-99> | sens_at_spec:<pct> | fisher | bce | neg_val_ce (repeatable)")
    m.set_defaults(func=cmd_metrics)

    a = sub.add_parser("align", parents=[common, unseeded], help="z-scale align k-fold validation scores")
    a.add_argument("input")
    a.add_argument("--canonical-median", type=float, default=0.3)
    a.add_argument("--canonical-std", type=float, default=0.2)
    a.add_argument("--clip", choices=("off", "on"), default="off")
    a.add_argument("--model-out", default=None, help="alignment model JSON path")
    a.set_defaults(func=cmd_align)

    g = sub.add_parser("aggregate", parents=[common, unseeded], help="object-level to subject-level scores")
    g.add_argument("input")
    g.add_argument("--rule", default="nth_largest:1",
                   help="nth_largest:N | nth_positional:N | max | mean | quantile:Q")
    g.set_defaults(func=cmd_aggregate)

    e = sub.add_parser("epochs", parents=[common, unseeded], help="per-epoch FoMs, stopping epochs, report")
    e.add_argument("input")
    e.add_argument("--fom", action="append")
    e.add_argument("--tie-tolerance", type=float, default=0.005)
    e.add_argument("--tie-break", choices=("earliest", "latest", "most_stable"), default="earliest")
    e.add_argument("--window", type=float, default=0.05, help="stability finite-difference half-width")
    e.add_argument("--covariate", default=None, help="covariate column for score-vs-covariate plots")
    e.add_argument("--report-epochs", choices=("selected", "all"), default="selected")
    e.set_defaults(func=cmd_epochs)

    s = sub.add_parser("search", parents=[common, seeded],
                       help="hyperparameter search over the synthetic experiment-1 model")
    s.add_argument("--space", required=True, help="search space JSON")
    s.add_argument("--budget", type=int, default=50)
    s.add_argument("--strategy", choices=("random", "tpe"), default="random")
    s.add_argument("--level", choices=("object", "subject"), default="subject")
    s.add_argument("--objective-fom", default="auc")
    s.add_argument("--aggregation", default="nth_largest:1")
    s.add_argument("--aggregation-param", default=None,
                   help="hyperparameter supplying N for nth_* aggregation")
    s.add_argument("--config", default=None, help="Exp1Config JSON")
    s.add_argument("--data-seed", type=int, default=0)
    s.add_argument("--canonical-median", type=float, default=0.3)
    s.add_argument("--canonical-std", type=float, default=0.2)
    s.set_defaults(func=cmd_search)

    y = sub.add_parser("synth", parents=[common, seeded], help="write synthetic score tables")
    y.add_argument("experiment", choices=("exp1", "exp2"))
    y.add_argument("--config", default=None, help="config JSON (fields of Exp1Config/Exp2Config)")
    y.add_argument("--params", default=None, help="exp1 scorer hyperparameters as JSON")
    y.set_defaults(func=cmd_synth)
    return p


def _report(exc, code, as_json):
    if as_json:
        payload = exc.to_dict() if isinstance(exc, errors.FomError) else \
            {"error": type(exc).__name__, "message": str(exc)}
        payload["exit_code"] = code
        sys.stderr.write(json.dumps(payload, default=str) + "\n")
        return
    kind = getattr(exc, "kind", type(exc).__name__)
    sys.stderr.write(f"error: {kind}: {exc}\n")
    for v in getattr(exc, "context", {}).get("violations", [])[:50]:
        sys.stderr.write(f"  {v}\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (errors.InputError, OSError, json.JSONDecodeError) as exc:
        _report(exc, EXIT_INPUT, args.json_errors)
        return EXIT_INPUT
    except errors.PreconditionError as exc:
        _report(exc, EXIT_PRECONDITION, args.json_errors)
        return EXIT_PRECONDITION
    except Exception as exc:  # noqa: BLE001 - stable exit-code contract
        log.debug("internal failure", exc_info=True)
        _report(exc, EXIT_INTERNAL, args.json_errors)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
