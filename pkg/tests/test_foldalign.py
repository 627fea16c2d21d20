import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fomkit import errors
from fomkit.foldalign import (AlignmentModel, CanonicalScale, FoldParams, align, apply_alignment,
                              fit_alignment, map_scores)
from fomkit.metrics import roc_auc, two_sided_std
from fomkit.scoreset import ScoreTable

from oracles import mirrored_std


def table(folds):
    """folds: list of (control scores, positive scores)."""
    sid, lab, sc, fo = [], [], [], []
    for k, (ctrl, pos) in enumerate(folds):
        for j, s in enumerate(ctrl):
            sid.append(f"c{k}_{j}"); lab.append(0); sc.append(s); fo.append(k)
        for j, s in enumerate(pos):
            sid.append(f"p{k}_{j}"); lab.append(1); sc.append(s); fo.append(k)
    return ScoreTable(sid, lab, sc, fold=fo)


def test_fit_example():
    model = fit_alignment(table([([0.2, 0.3, 0.4], [0.9])]))
    p = model.per_fold[0]
    r, l = mirrored_std([0.2, 0.3, 0.4])
    assert p.median == 0.3 and p.n_controls == 3
    assert p.right_std == pytest.approx(0.0707107, abs=1e-7) and p.right_std == pytest.approx(r)
    assert p.left_std == pytest.approx(0.0707107, abs=1e-7) and p.left_std == pytest.approx(l)


def test_positives_do_not_move_fit():
    a = fit_alignment(table([([0.2, 0.3, 0.4], [0.9])]))
    b = fit_alignment(table([([0.2, 0.3, 0.4], [0.0, 5.0, -3.0])]))
    assert a == b


def test_identical_folds_identical_params():
    m = fit_alignment(table([([0.1, 0.5, 0.6], [0.9]), ([0.1, 0.5, 0.6], [0.2])]))
    p0, p1 = m.per_fold[0], m.per_fold[1]
    assert (p0.median, p0.right_std, p0.left_std) == (p1.median, p1.right_std, p1.left_std)


def test_fit_errors():
    with pytest.raises(errors.ZeroSpread):
        fit_alignment(table([([0.5, 0.5, 0.5], [0.9])]))
    with pytest.raises(errors.TooFewControls):
        fit_alignment(table([([0.5], [0.9])]))
    with pytest.raises(errors.MissingFolds):
        fit_alignment(ScoreTable(["a", "b"], [0, 1], [0.1, 0.2]))


def test_apply_examples():
    model = fit_alignment(table([([0.2, 0.3, 0.4], [0.9])]))
    out = map_scores([0.4, 0.3], model.per_fold[0], CanonicalScale())
    assert out[0] == pytest.approx(0.58284, abs=1e-5)
    assert out[0] == pytest.approx(0.3 + 0.2 * 0.1 / mirrored_std([0.2, 0.3, 0.4])[0], abs=1e-12)
    assert out[1] == 0.3


def test_one_right_std_above_maps_identically_across_folds():
    canon = CanonicalScale(0.3, 0.2)
    folds = {0: FoldParams(0, 0.5, 0.125, 0.0625, 10), 1: FoldParams(1, 0.25, 0.375, 0.5, 10)}
    model = AlignmentModel(canon, folds)
    probe = ScoreTable(["a", "b"], [1, 1], [0.5 + 0.125, 0.25 + 0.375], fold=[0, 1])
    out = apply_alignment(probe, model).score
    assert out[0] == out[1] == 0.5


def test_unknown_fold():
    model = fit_alignment(table([([0.2, 0.3, 0.4], [0.9])]))
    with pytest.raises(errors.UnknownFold):
        apply_alignment(ScoreTable(["x"], [0], [0.1], fold=[3]), model)


def test_clip_and_left_std():
    t = table([([0.2, 0.3, 0.4], [0.9, -0.5])])
    model = fit_alignment(t)
    clipped = apply_alignment(t, model, clip=True).score
    assert clipped.min() >= 0 and clipped.max() <= 1
    wide = AlignmentModel(CanonicalScale(0.3, 0.2, left_std=0.4), model.per_fold)
    out = apply_alignment(t, wide, use_left_std=True).score
    assert out[0] == pytest.approx(0.3 - 0.4 * 0.1 / model.per_fold[0].left_std)
    assert out[2] == pytest.approx(0.3 + 0.2 * 0.1 / model.per_fold[0].right_std)


def test_canonical_validation():
    with pytest.raises(errors.BadConfig):
        CanonicalScale(0.3, 0.0)
    with pytest.raises(errors.BadConfig):
        CanonicalScale(0.3, 0.2, left_std=-1)


def test_model_json_round_trip():
    model = fit_alignment(table([([0.2, 0.3, 0.4], [0.9]), ([0.1, 0.15, 0.5], [0.7])]),
                          CanonicalScale(0.4, 0.1, 0.05))
    text = model.to_json()
    assert AlignmentModel.from_json(text) == model
    d = model.to_dict()
    assert set(d) == {"canonical", "folds"}
    assert set(d["folds"][0]) == {"fold", "median", "right_std", "left_std", "n_controls"}


def test_even_control_count_centres_on_the_median_image():
    # with an even count the sample median is a midpoint; mapped spreads are exact
    # about m_t but the mapped sample median moves when the two spreads differ
    t = table([([0.0, 0.1, 0.2, 0.9], [0.5])])
    aligned, _ = align(t)
    ctrl = aligned.score[aligned.label == 0]
    ts = two_sided_std(ctrl, middle=0.3)
    assert ts.right == pytest.approx(0.2, abs=1e-12) and ts.left == pytest.approx(0.2, abs=1e-12)
    assert abs(np.median(ctrl) - 0.3) > 1e-3


# ---------------------------------------------------------------- properties

@st.composite
def fold_tables(draw):
    n_folds = draw(st.integers(1, 4))
    folds = []
    for _ in range(n_folds):
        n = 2 * draw(st.integers(1, 7)) + 1
        ctrl = draw(st.lists(st.integers(0, 10_000), min_size=n, max_size=n, unique=True))
        scale = draw(st.floats(0.1, 10))
        offset = draw(st.floats(-5, 5))
        pos = draw(st.lists(st.integers(0, 10_000), min_size=1, max_size=8))
        folds.append(([offset + scale * c / 10_000 for c in ctrl],
                      [offset + scale * p / 10_000 for p in pos]))
    return table(folds)


@given(fold_tables())
def test_aligned_controls_hit_canonical_scale(t):
    aligned, model = align(t)
    for k in t.folds():
        ctrl = aligned.score[(aligned.fold == k) & (aligned.label == 0)]
        ts = two_sided_std(ctrl)
        assert ts.middle == pytest.approx(0.3, abs=1e-9)
        assert ts.right == pytest.approx(0.2, abs=1e-9)
        assert ts.left == pytest.approx(0.2, abs=1e-9)


@given(fold_tables())
def test_rank_order_and_auc_preserved_within_fold(t):
    aligned, _ = align(t)
    for k in t.folds():
        idx = t.fold == k
        before, after = t.score[idx], aligned.score[idx]
        i, j = np.triu_indices(len(before), 1)
        assert np.all(np.sign(before[i] - before[j]) == np.sign(after[i] - after[j]))
        if 0 < t.label[idx].sum() < idx.sum():
            assert roc_auc(t.label[idx], after) == pytest.approx(roc_auc(t.label[idx], before),
                                                                  abs=1e-12)


@given(fold_tables())
def test_realignment_is_idempotent(t):
    once, _ = align(t)
    twice, _ = align(once)
    np.testing.assert_allclose(twice.score, once.score, atol=1e-9, rtol=0)
