import json
import warnings

import numpy as np
import pytest

from rltlab.features import FEATURE_NAMES
from rltlab.learn import (
    BoostedQuantileModel,
    DataRow,
    Dataset,
    QrfParams,
    SgbParams,
    Selector,
    empirical_quantile,
    feature_importance,
    fit_qrf,
    fit_sgbqr,
    oob_predict,
    pinball_loss,
    predict_quantile,
    select_rule,
    selector_from_json,
    selector_to_json,
    stratified_split,
    train_selector,
)
from rltlab.rules import ALL_RULES, RuleId


def test_constant_target_any_quantile():
    rng = np.random.default_rng(0)
    x = rng.uniform(size=(40, 3))
    y = np.full(40, 3.25)
    f = fit_qrf(x, y, QrfParams(trees=15, seed=1))
    for tau in (0.1, 0.5, 0.9):
        assert predict_quantile(f, x[0], tau) == 3.25


def test_single_leaf_payload_and_quantile():
    x = np.arange(5, dtype=float).reshape(-1, 1)
    y = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    f = fit_qrf(x, y, QrfParams(trees=1, min_leaf=5, bootstrap=False, seed=0))
    tree = f.trees[0]
    assert tree.feature[0] == -1  # no split: min_leaf equals the row count
    assert sorted(y[tree.leaf_rows(0)]) == [1.0, 2.0, 3.0, 4.0, 5.0]
    assert predict_quantile(f, x[0], 0.3) == 2.0
    assert predict_quantile(f, x[0], 0.999) == 5.0
    assert predict_quantile(f, x[0], 0.2) == 1.0  # F(1) = 0.2 >= 0.2


def test_quantile_monotone_in_tau():
    rng = np.random.default_rng(3)
    x = rng.uniform(size=(200, 4))
    y = x[:, 0] + rng.normal(scale=0.2, size=200)
    f = fit_qrf(x, y, QrfParams(trees=50, seed=3))
    q = [predict_quantile(f, x[7], tau) for tau in (0.1, 0.3, 0.5, 0.7, 0.9)]
    assert all(q[i] <= q[i + 1] + 1e-12 for i in range(len(q) - 1))


def test_group_median_recovery():
    # y perfectly split by a threshold on feature 0: training-row predictions
    # at tau = 0.5 equal the group medians
    rng = np.random.default_rng(4)
    x = rng.uniform(size=(300, 2))
    lo_vals = np.array([1.0, 2.0, 3.0])
    hi_vals = np.array([11.0, 12.0, 13.0])
    y = np.where(x[:, 0] <= 0.5, lo_vals[rng.integers(0, 3, 300)],
                 hi_vals[rng.integers(0, 3, 300)])
    f = fit_qrf(x, y, QrfParams(trees=100, min_leaf=5, seed=4))
    lo_med = empirical_quantile(y[x[:, 0] <= 0.5], 0.5)
    hi_med = empirical_quantile(y[x[:, 0] > 0.5], 0.5)
    for i in (0, 10, 50):
        want = lo_med if x[i, 0] <= 0.5 else hi_med
        assert predict_quantile(f, x[i], 0.5) == pytest.approx(want, abs=1.0)


def test_oob_single_tree_mostly_absent():
    x = np.arange(10, dtype=float).reshape(-1, 1)
    y = x[:, 0]
    f = fit_qrf(x, y, QrfParams(trees=1, seed=5))
    preds = oob_predict(f, x, 0.5)
    in_bag_rows = {int(r) for r in f.trees[0].order}
    for i, p in enumerate(preds):
        if i in in_bag_rows:
            assert p is None


def test_oob_constant_target():
    rng = np.random.default_rng(6)
    x = rng.uniform(size=(30, 2))
    y = np.full(30, 2.0)
    f = fit_qrf(x, y, QrfParams(trees=40, seed=6))
    preds = oob_predict(f, x, 0.3)
    assert all(p == 2.0 for p in preds if p is not None)


def test_feature_importance_concentration():
    rng = np.random.default_rng(7)
    x = rng.uniform(size=(400, 4))
    y = (x[:, 0] > 0.5).astype(float) * 10.0
    f = fit_qrf(x, y, QrfParams(trees=60, seed=7))
    imp = feature_importance(f)
    assert imp.shape == (4,)
    assert imp.sum() == pytest.approx(1.0)
    assert imp[0] > 0.9


def test_feature_importance_noise_target():
    d = 5
    maxima = []
    for seed in range(10):
        rng = np.random.default_rng(100 + seed)
        x = rng.uniform(size=(200, d))
        y = rng.normal(size=200)
        f = fit_qrf(x, y, QrfParams(trees=40, seed=seed))
        maxima.append(feature_importance(f).max())
    assert float(np.median(maxima)) <= 3.0 / d


def test_feature_importance_no_splits_uniform():
    x = np.zeros((10, 3))
    y = np.zeros(10)
    f = fit_qrf(x, y, QrfParams(trees=5, seed=0))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        imp = feature_importance(f)
    assert any("no splits" in str(w.message) for w in caught)
    assert imp == pytest.approx([1 / 3] * 3)


def test_fit_requires_two_rows():
    with pytest.raises(ValueError):
        fit_qrf(np.zeros((1, 2)), np.zeros(1))


def test_pinball_examples():
    assert pinball_loss(np.array([1.0]), np.array([0.0]), 0.3) == pytest.approx(0.3)
    assert pinball_loss(np.array([0.0]), np.array([1.0]), 0.3) == pytest.approx(0.7)


def test_sgb_zero_stages_is_empirical_quantile():
    rng = np.random.default_rng(8)
    x = rng.uniform(size=(50, 2))
    y = rng.uniform(size=50)
    m = fit_sgbqr(x, y, 0.3, SgbParams(stages=0, seed=8))
    assert m.predict(x) == pytest.approx(np.full(50, empirical_quantile(y, 0.3)))


def test_sgb_training_loss_nonincreasing_full_sample():
    # with subsample 1.0 each leaf update is a convex step toward the
    # leaf-local minimizer, so the training pinball loss cannot increase
    rng = np.random.default_rng(9)
    x = rng.uniform(size=(120, 3))
    y = 2.0 * x[:, 0] + rng.uniform(size=120)
    tau = 0.3
    losses = []
    for stages in range(0, 26, 5):
        m = fit_sgbqr(x, y, tau, SgbParams(stages=stages, subsample=1.0, seed=9))
        losses.append(pinball_loss(y, m.predict(x), tau))
    assert all(losses[i + 1] <= losses[i] + 1e-12 for i in range(len(losses) - 1))


def test_sgb_learns_step():
    rng = np.random.default_rng(10)
    x = rng.uniform(size=(500, 3))
    y = (x[:, 0] > 0.5).astype(float) + rng.uniform(size=500)
    m = fit_sgbqr(x, y, 0.3, SgbParams(stages=150, seed=10))
    lo = m.predict(np.array([[0.2, 0.5, 0.5]]))[0]
    hi = m.predict(np.array([[0.8, 0.5, 0.5]]))[0]
    assert hi - lo > 0.6


def _dataset(rows):
    return Dataset(tuple(rows))


def _row(inst, family, feats, targets):
    return DataRow(inst, family, np.asarray(feats, dtype=float), targets)


def test_stratified_split_counts():
    rows = []
    for i in range(10):
        rows.append(_row(f"a{i}", "A", np.zeros(3), {}))
    for i in range(20):
        rows.append(_row(f"b{i}", "B", np.zeros(3), {}))
    train, test = stratified_split(_dataset(rows), ratio=0.7, seed=0)
    by_family = lambda ds, fam: sum(1 for r in ds.rows if r.family == fam)
    assert by_family(train, "A") == 7 and by_family(test, "A") == 3
    assert by_family(train, "B") == 14 and by_family(test, "B") == 6


def test_stratified_split_round_half_up():
    rows = [_row(f"x{i}", "F", np.zeros(2), {}) for i in range(5)]
    train, test = stratified_split(_dataset(rows), ratio=0.7, seed=1)
    assert len(train) == 4 and len(test) == 1  # round(3.5) -> 4


def test_stratified_split_deterministic():
    rows = [_row(f"x{i}", "F" if i % 2 else "G", np.zeros(2), {}) for i in range(12)]
    a = stratified_split(_dataset(rows), seed=3)
    b = stratified_split(_dataset(rows), seed=3)
    assert [r.instance for r in a[0].rows] == [r.instance for r in b[0].rows]
    assert [r.instance for r in a[1].rows] == [r.instance for r in b[1].rows]


def test_stratified_split_singleton_family_warns():
    rows = [_row("solo", "S", np.zeros(2), {})] + [
        _row(f"x{i}", "F", np.zeros(2), {}) for i in range(4)]
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        train, test = stratified_split(_dataset(rows), seed=0)
    assert any("single instance" in str(w.message) for w in caught)
    assert any(r.instance == "solo" for r in train.rows)


def _toy_dataset(n_per=12, seed=0):
    """Two families; rule DUAL is best in family A, rule RANGE in family B,
    separated by feature 0."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(n_per):
        feats = np.zeros(len(FEATURE_NAMES))
        feats[0] = rng.uniform(0.0, 0.4)
        feats[1:] = rng.uniform(size=len(FEATURE_NAMES) - 1)
        targets = {r: 0.2 for r in ALL_RULES}
        targets[RuleId.DUAL] = 1.0
        rows.append(_row(f"a{i}", "A", feats, targets))
        feats2 = feats.copy()
        feats2[0] = rng.uniform(0.6, 1.0)
        targets2 = {r: 0.2 for r in ALL_RULES}
        targets2[RuleId.RANGE] = 1.0
        rows.append(_row(f"b{i}", "B", feats2, targets2))
    return _dataset(rows)


def test_selector_single_dominant_rule():
    rows = []
    rng = np.random.default_rng(11)
    for i in range(12):
        feats = rng.uniform(size=len(FEATURE_NAMES))
        targets = {r: 0.1 for r in ALL_RULES}
        targets[RuleId.MAX] = 1.0
        rows.append(_row(f"i{i}", "F", feats, targets))
    sel = train_selector(_dataset(rows), params=QrfParams(trees=30), master_seed=0)
    for row in rows:
        assert select_rule(sel, row.features) is RuleId.MAX


def test_selector_two_regimes():
    ds = _toy_dataset()
    sel = train_selector(ds, params=QrfParams(trees=60), master_seed=1)
    hits = 0
    for row in ds.rows:
        want = RuleId.DUAL if row.family == "A" else RuleId.RANGE
        hits += select_rule(sel, row.features) is want
    assert hits >= 0.9 * len(ds.rows)


def test_selector_tie_breaks_by_rule_order():
    preds = {r: 0.5 for r in ALL_RULES}
    sel = train_selector(_toy_dataset(4), params=QrfParams(trees=5), master_seed=0)
    best = ALL_RULES[0]
    for r in ALL_RULES[1:]:
        if preds[r] > preds[best]:
            best = r
    assert best is ALL_RULES[0]
    # and select_rule is invariant to a strictly increasing transform
    row = _toy_dataset(4).rows[0]
    raw = sel.predictions(row.features)
    base = select_rule(sel, row.features)
    transformed = {r: np.exp(3.0 * v) for r, v in raw.items()}
    arg = ALL_RULES[0]
    for r in ALL_RULES[1:]:
        if transformed[r] > transformed[arg]:
            arg = r
    assert arg is base


def test_selector_serialization_round_trip_and_determinism():
    ds = _toy_dataset(6)
    sel_a = train_selector(ds, params=QrfParams(trees=10), master_seed=5)
    sel_b = train_selector(ds, params=QrfParams(trees=10), master_seed=5)
    ja, jb = selector_to_json(sel_a), selector_to_json(sel_b)
    assert ja == jb
    back = selector_from_json(ja)
    row = ds.rows[0]
    assert select_rule(back, row.features) is select_rule(sel_a, row.features)
    for r in ALL_RULES:
        assert back.predictions(row.features)[r] == sel_a.predictions(row.features)[r]


def test_selector_rejects_schema_mismatch():
    ds = _toy_dataset(4)
    sel = train_selector(ds, params=QrfParams(trees=5), master_seed=0)
    blob = json.loads(selector_to_json(sel))
    blob["schema"] = "0000000000000000"
    bad = selector_from_json(json.dumps(blob))
    with pytest.raises(ValueError, match="schema"):
        bad.predictions(ds.rows[0].features)
