"""fomkit: clinically tailored figures of merit, fold alignment, epoch selection and search."""
__version__ = "0.1.0"

from . import errors  # noqa: E402
from .aggregate import AggregationRule, aggregate_subjects  # noqa: E402
from .epochselect import (FomSeries, FomSpec, SelectionPolicy, assessment_report,  # noqa: E402
                          evaluate_fom, fom_series, select_epoch, stability_profile)
from .foldalign import AlignmentModel, CanonicalScale, align, apply_alignment, fit_alignment  # noqa: E402
from .hypersearch import (ObjectiveSpec, SearchSpace, TrialLedger, cv_objective,  # noqa: E402
                          ledger_analysis, run_search, sample_params)
from .metrics import (auc, balanced_cross_entropy, fisher_distance, roc_auc, roc_curve,  # noqa: E402
                      sens_at_spec, sliver_auc, two_sided_std)
from .scoreset import ScoreRecord, ScoreTable, parse_score_table, read_table, write_table  # noqa: E402
from .synthlab import Exp1Adapter, Exp1Config, Exp2Config, gen_experiment1, gen_experiment2  # noqa: E402

__all__ = [
    "errors", "AggregationRule", "aggregate_subjects", "FomSeries", "FomSpec", "SelectionPolicy",
    "assessment_report", "evaluate_fom", "fom_series", "select_epoch", "stability_profile",
    "AlignmentModel", "CanonicalScale", "align", "apply_alignment", "fit_alignment",
    "ObjectiveSpec", "SearchSpace", "TrialLedger", "cv_objective", "ledger_analysis",
    "run_search", "sample_params", "auc", "balanced_cross_entropy", "fisher_distance",
    "roc_auc", "roc_curve", "sens_at_spec", "sliver_auc", "two_sided_std", "ScoreRecord",
    "ScoreTable", "parse_score_table", "read_table", "write_table", "Exp1Adapter",
    "Exp1Config", "Exp2Config", "gen_experiment1", "gen_experiment2",
]
