"""Rolling-origin evaluation engine: plan geometry, fold bookkeeping,
scoring, and the reference model."""
import numpy as np
import pytest

from edforecast.backtest import FoldResult, make_plan, run_backtest, score
from edforecast.errors import ContractError
from edforecast.tuner import TunerPolicy

TOY_GRIDS = {"knn": [{"k": 5}, {"k": 10}], "lm": [{}]}


@pytest.fixture(scope="module")
def toy_run(synth_560):
    series, cov = synth_560
    plan = make_plan(len(series), train_len=400, valid_len=60, test_len=60,
                     horizons=(1,))
    run = run_backtest(plan, series, cov, ["lm", "knn", "seasonal_naive"],
                       horizons=(1,), grids=TOY_GRIDS, include_validation=True)
    return plan, series, run


class TestMakePlan:
    def test_default_geometry_shrinks_the_test_slice(self):
        plan = make_plan(2870, train_len=1460, valid_len=730, test_len=730,
                         horizons=(1, 3, 7))
        assert plan.train_len == 1460
        assert plan.valid_len == 730
        assert plan.test_len == 680
        assert plan.ts_train_len == 2190

    def test_infeasible_total_rejected(self):
        with pytest.raises(ContractError):
            make_plan(2100, train_len=1460, valid_len=730, test_len=730,
                      horizons=(1,))

    def test_toy_overrides_accepted(self):
        plan = make_plan(210, train_len=100, valid_len=50, test_len=50,
                         horizons=(1, 3, 7))
        assert (plan.train_len, plan.valid_len, plan.test_len) == (100, 50, 50)


class TestScore:
    def test_perfect_predictions_score_zero(self):
        folds = [FoldResult(None, 1, "m", {}, 100.0, 100.0) for _ in range(3)]
        s = score(folds)[("m", 1)]
        assert s.mae == 0.0 and s.mape == 0.0 and s.n == 3

    def test_hand_built_group(self):
        folds = [FoldResult(None, 1, "m", {}, 110.0, 100.0),
                 FoldResult(None, 1, "m", {}, 95.0, 100.0),
                 FoldResult(None, 1, "m", {}, 100.0, 200.0)]
        s = score(folds)[("m", 1)]
        assert s.mae == pytest.approx((10 + 5 + 100) / 3)
        assert s.mape == pytest.approx((10 + 5 + 50) / 3)

    def test_groups_are_keyed_by_model_and_horizon(self):
        folds = [FoldResult(None, 1, "a", {}, 1.0, 1.0),
                 FoldResult(None, 3, "a", {}, 1.0, 1.0),
                 FoldResult(None, 1, "b", {}, 1.0, 1.0)]
        assert set(score(folds)) == {("a", 1), ("a", 3), ("b", 1)}

    def test_empty_input_rejected(self):
        with pytest.raises(ContractError):
            score([])


class TestRunBacktest:
    def test_one_fold_per_model_and_test_day(self, toy_run):
        plan, _, run = toy_run
        by_model = {}
        for f in run.folds:
            by_model.setdefault(f.model_id, []).append(f)
        assert set(by_model) == {"lm", "knn", "seasonal_naive"}
        for folds in by_model.values():
            assert len(folds) == plan.test_len

    def test_seasonal_naive_equals_the_lag7_oracle(self, toy_run):
        _, series, run = toy_run
        for f in run.folds:
            if f.model_id != "seasonal_naive":
                continue
            t = (f.target_date - series.start).days
            assert f.prediction == series.values[t - 7]
            assert f.actual == series.values[t]

    def test_validation_folds_cover_the_validation_slice(self, toy_run):
        plan, series, run = toy_run
        n = len(series)
        lo = n - plan.test_len - plan.valid_len
        dates = set(series.dates()[lo:n - plan.test_len])
        for f in run.validation_folds:
            assert f.target_date in dates

    def test_ledger_errors_match_predictions(self, toy_run):
        _, _, run = toy_run
        led = run.ledgers[("knn", 1)]
        mat = led.predictions_matrix()
        actuals = np.asarray(led.actuals)
        np.testing.assert_allclose(np.abs(mat - actuals[:, None]),
                                   led.errors_matrix(), atol=1e-12)

    def test_rerun_is_bit_identical(self, synth_560, toy_run):
        plan, series, run1 = toy_run
        _, cov = synth_560
        run2 = run_backtest(plan, series, cov,
                            ["lm", "knn", "seasonal_naive"], horizons=(1,),
                            grids=TOY_GRIDS, include_validation=True)
        p1 = [(f.target_date, f.model_id, f.prediction) for f in run1.folds]
        p2 = [(f.target_date, f.model_id, f.prediction) for f in run2.folds]
        assert p1 == p2

    def test_folds_csv_round_trips_the_predictions(self, toy_run, tmp_path):
        _, _, run = toy_run
        p = tmp_path / "folds.csv"
        run.folds_to_csv(p)
        import csv
        with open(p) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(run.folds)
        for row, f in zip(rows, run.folds):
            assert float(row["prediction"]) == f.prediction
            assert float(row["actual"]) == f.actual

    def test_mutating_values_after_an_origin_leaves_its_prediction_alone(
            self, synth_560):
        """Leakage probe on two fast models: poisoning the series after a
        cutoff must not change any prediction whose origin precedes it."""
        series, cov = synth_560
        plan = make_plan(len(series), train_len=400, valid_len=60,
                         test_len=60, horizons=(1,))
        base = run_backtest(plan, series, cov, ["lm", "seasonal_naive"],
                            horizons=(1,), grids=TOY_GRIDS)
        cut = len(series) - 30
        poisoned = series.values.copy()
        poisoned[cut:] += 500.0
        s2 = series.with_values(poisoned)
        alt = run_backtest(plan, s2, cov, ["lm", "seasonal_naive"],
                           horizons=(1,), grids=TOY_GRIDS)
        base_by_key = {(f.target_date, f.model_id): f.prediction
                       for f in base.folds}
        for f in alt.folds:
            t = (f.target_date - series.start).days
            if t - 1 < cut:  # origin strictly before the poisoned region
                assert f.prediction == base_by_key[(f.target_date, f.model_id)]


class TestOnlinePolicies:
    def test_yesterday_policy_extends_the_ledger_into_the_test_slice(
            self, synth_560):
        series, cov = synth_560
        plan = make_plan(len(series), train_len=400, valid_len=50,
                         test_len=50, horizons=(1,))
        policy = TunerPolicy(kind="yesterday", refit_period=1)
        run = run_backtest(plan, series, cov, ["knn"], horizons=(1,),
                           policy=policy, grids={"knn": TOY_GRIDS["knn"]})
        led = run.ledgers[("knn", 1)]
        assert len(led.dates) == plan.valid_len + plan.test_len
        # daily refits: one fit of the candidate fleet per test day
        assert run.fit_counts[("knn", 1)] == plan.test_len

    def test_weekly_refits_freeze_selection_between_boundaries(self, synth_560):
        series, cov = synth_560
        plan = make_plan(len(series), train_len=400, valid_len=50,
                         test_len=50, horizons=(1,))
        policy = TunerPolicy(kind="overall_average", refit_period=7)
        run = run_backtest(plan, series, cov, ["knn"], horizons=(1,),
                           policy=policy, grids={"knn": TOY_GRIDS["knn"]})
        assert run.fit_counts[("knn", 1)] == len(range(0, 50, 7))
        hp_by_day = [f.hyperparams for f in run.folds]
        for i, hp in enumerate(hp_by_day):
            block_start = (i // 7) * 7
            assert hp == hp_by_day[block_start]
