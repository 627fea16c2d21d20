"""Epoch selection under different figures of merit on the synthetic training-dynamics dump.

    python3 scripts/run_experiment2.py --seed 0 --out runs/exp2
"""
import argparse
import json
from pathlib import Path

from fomkit.epochselect import (FomSpec, SelectionPolicy, assessment_report, fom_series,
                                moving_max, select_epoch)
from fomkit.scoreset import write_table
from fomkit.synthlab import gen_experiment2, load_config

FOMS = ("neg_val_ce", "auc", "sliver:90", "sens_at_spec:90", "fisher")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--config", help="JSON overrides for the generator config")
    ap.add_argument("--tie-tolerance", type=float, default=0.005)
    ap.add_argument("--out", default="runs/exp2")
    args = ap.parse_args(argv)

    cfg = load_config("exp2", Path(args.config).read_text() if args.config else "{}")
    dump = gen_experiment2(cfg, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_table(dump, out / "dump.csv")

    foms = [FomSpec.parse(f) for f in FOMS]
    series = fom_series(dump, foms)
    policy = SelectionPolicy(args.tie_tolerance, "earliest")
    selections = []
    for fom in foms:
        epoch, value = select_epoch(series, fom, policy)
        selections.append({"fom": fom.name, "policy": "earliest", "epoch": epoch, "value": value})
        print(f"{fom.name:>16}: epoch {epoch:3d}  value {value:.4f}")

    epochs = sorted({s["epoch"] for s in selections})
    assessment_report(dump, cfg.covariate_name, epochs, series, selections).write(out / "report")
    smoothed = {f.name: moving_max(series.values[f], 3).tolist() for f in foms}
    (out / "selection.json").write_text(json.dumps(
        {"selections": selections, "moving_max_3": smoothed}, indent=2) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
