"""Rolling-origin temporal cross-validation.

For each test day t and horizon h every model is (re)fitted on a fixed-length
window ending at t - h — or reuses the fit from the last refit boundary with
its parameters frozen — and predicts the single day t. The same discipline
builds the per-candidate validation error ledgers the tuner selects from,
so a refit period of one day is bit-for-bit the daily-reselection method.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import timedelta

import numpy as np

from .errors import ContractError, FitError
from .features import ModelMatrix, build_matrix
from .ingest import CovariateTable
from .registry import fit_ml_model, fit_ts_model, model_family
from .registry import grid_for as registry_grid_for
from .seeds import derive_seed
from .series import DailySeries, ErrorSummary, mae, mape
from .tuner import (TunerPolicy, ValidationLedger, build_ledger,
                    schedule_refits, select)

DEFAULT_TRAIN_LEN = 1460
DEFAULT_VALID_LEN = 730
DEFAULT_TEST_LEN = 730
DEFAULT_HORIZONS = (1, 3, 7)
SEASONAL_LAG = 7


@dataclass(frozen=True)
class BacktestPlan:
    train_len: int
    valid_len: int
    test_len: int
    horizons: tuple = DEFAULT_HORIZONS
    step: int = 1

    def __post_init__(self):
        if min(self.train_len, self.valid_len, self.test_len) < 1:
            raise ContractError("every plan slice needs at least one day")
        if self.step != 1:
            raise ContractError("only daily-step rolling origins are supported")
        if not self.horizons or any(h < 1 for h in self.horizons):
            raise ContractError("horizons must be positive")

    @property
    def ts_train_len(self) -> int:
        """Univariate models train on the whole pool ahead of the test slice."""
        return self.train_len + self.valid_len


def make_plan(total_len: int, train_len: int = DEFAULT_TRAIN_LEN,
              valid_len: int = DEFAULT_VALID_LEN, test_len: int = DEFAULT_TEST_LEN,
              horizons=DEFAULT_HORIZONS) -> BacktestPlan:
    """Validate the rolling-window geometry against the available length.

    The test slice shrinks to what remains after the training pool; a
    negative remainder is an error stating the required minimum.
    """
    horizons = tuple(sorted(set(int(h) for h in horizons)))
    fitted_test = min(test_len, total_len - train_len - valid_len)
    if fitted_test < 1:
        raise ContractError(
            f"series of {total_len} days cannot host train {train_len} + "
            f"valid {valid_len} + test >= 1; need at least {train_len + valid_len + 1}")
    return BacktestPlan(train_len=train_len, valid_len=valid_len,
                        test_len=fitted_test, horizons=horizons)


@dataclass(frozen=True)
class FoldResult:
    target_date: object
    horizon: int
    model_id: str
    hyperparams: dict
    prediction: float
    actual: float

    @property
    def abs_error(self) -> float:
        return abs(self.prediction - self.actual)


@dataclass
class RunResult:
    folds: list = field(default_factory=list)
    validation_folds: list = field(default_factory=list)
    ledgers: dict = field(default_factory=dict)      # (model_id, h) -> ValidationLedger
    failures: dict = field(default_factory=dict)     # (model_id, h) -> failed day count
    fit_counts: dict = field(default_factory=dict)   # (model_id, h) -> selected-model fits
    warnings: list = field(default_factory=list)

    def folds_to_csv(self, path, which: str = "test"):
        rows = self.folds if which == "test" else self.validation_folds
        with open(path, "w") as fh:
            fh.write("date,horizon,model,prediction,actual,hyperparams_json\n")
            for r in rows:
                hp = json.dumps(r.hyperparams, sort_keys=True).replace('"', '""')
                fh.write(f"{r.target_date.isoformat()},{r.horizon},{r.model_id},"
                         f"{r.prediction!r},{r.actual!r},\"{hp}\"\n")


def score(folds, by=("model_id", "horizon")) -> dict:
    """MAE/MAPE per group of FoldResults (default per model and horizon)."""
    if not folds:
        raise ContractError("no fold results to score")
    groups: dict = {}
    for r in folds:
        key = tuple(getattr(r, k) for k in by)
        groups.setdefault(key, []).append(r)
    out = {}
    for key, rows in sorted(groups.items(), key=lambda kv: str(kv[0])):
        actual = [r.actual for r in rows]
        pred = [r.prediction for r in rows]
        out[key] = ErrorSummary(mae=mae(actual, pred), mape=mape(actual, pred),
                                n=len(rows))
    return out


class _Engine:
    def __init__(self, plan, series, cov, policy, seed, grids, model_options,
                 ledger_stride, jobs=1):
        self.plan = plan
        self.series = series
        self.cov = cov
        self.policy = policy
        self.seed = seed
        self.grids = grids or {}
        self.model_options = model_options or {}
        self.ledger_stride = max(1, int(ledger_stride))
        self.jobs = int(jobs)
        self.values = series.values
        n = len(series)
        self.test_start = n - plan.test_len
        self.valid_start = self.test_start - plan.valid_len
        if self.valid_start < 0:
            raise ContractError("plan does not fit the series")
        self.result = RunResult()
        self._matrices: dict = {}

    # -- shared helpers ---------------------------------------------------

    def date_of(self, idx: int):
        return self.series.start + timedelta(days=int(idx))

    def matrix(self, h: int) -> ModelMatrix:
        if h not in self._matrices:
            self._matrices[h] = build_matrix(self.series, self.cov, h)
        return self._matrices[h]

    def ml_window(self, matrix: ModelMatrix, target_idx: int, h: int) -> ModelMatrix:
        lo = self.date_of(target_idx - h - self.plan.train_len + 1)
        hi = self.date_of(target_idx - h)
        window = matrix.window(lo, hi)
        if len(window) != self.plan.train_len:
            raise ContractError(
                f"training window for target {self.date_of(target_idx)} h={h} has "
                f"{len(window)} rows, expected {self.plan.train_len}")
        # Chronology invariant: nothing in the fit postdates target - h.
        if window.frame.index.max() > self.date_of(target_idx - h):
            raise ContractError("training window leaks past the forecast origin")
        return window

    def ts_window_values(self, target_idx: int, h: int, window_len: int) -> np.ndarray:
        lo = target_idx - h - window_len + 1
        hi = target_idx - h
        if lo < 0:
            raise ContractError(
                f"series too short for the univariate window ending {self.date_of(hi)}")
        return self.values[lo:hi + 1]

    def _feature_rows(self, matrix: ModelMatrix, t0: int, t1: int):
        """Feature frame and actuals for target indices [t0, t1]."""
        window = matrix.window(self.date_of(t0), self.date_of(t1))
        if len(window) != t1 - t0 + 1:
            raise ContractError("test slice is missing model-matrix rows")
        return window.features(), window.targets()

    # -- covariate (ML) models --------------------------------------------

    def run_ml(self, model_id: str, h: int):
        plan, policy = self.plan, self.policy
        matrix = self.matrix(h)
        first_window = self.ml_window(matrix, self.valid_start, h)
        grid = [dict(hp) for hp in
                registry_grid_for(model_id, first_window, self.grids)]

        def fit_candidates(boundary_idx, indices, tag):
            fits = []
            for j in indices:
                try:
                    window = self.ml_window(matrix, boundary_idx, h)
                    seed = derive_seed(self.seed, model_id, "h", h, tag,
                                       boundary_idx, "cand", j)
                    fits.append(fit_ml_model(model_id, window, grid[j], seed=seed))
                except FitError:
                    fits.append(None)
            return fits

        # Validation phase: every candidate scored daily; refits may be
        # strided, with parameters frozen in between (features still roll).
        ledger = build_ledger(self.plan, matrix, model_id, grid,
                              seed=self.seed, stride=self.ledger_stride,
                              jobs=self.jobs)

        # Test phase.
        failures = 0
        fit_count = 0
        for off in schedule_refits(policy, plan.test_len):
            b = self.test_start + off
            t_end = min(b + policy.refit_period, len(self.series)) - 1
            sel = select(ledger, policy, as_of=self.date_of(b))
            if sel.used_fallback:
                self.result.warnings.append(
                    f"{model_id} h={h} {self.date_of(b)}: empty tuning window, "
                    "fell back to overall average")
            if policy.needs_daily_errors:
                fits = fit_candidates(b, range(len(grid)), "test")
            else:
                fits = [None] * len(grid)
                fits[sel.index] = fit_candidates(b, [sel.index], "test")[0]
            fit_count += 1
            feats, actual = self._feature_rows(matrix, b, t_end)
            block = np.full((len(actual), len(grid)), np.nan)
            for j, fit in enumerate(fits):
                if fit is not None:
                    block[:, j] = fit.predict_frame(feats)
            for i in range(len(actual)):
                date = self.date_of(b + i)
                pred = block[i, sel.index]
                if np.isnan(pred):
                    failures += 1
                else:
                    self.result.folds.append(FoldResult(
                        target_date=date, horizon=h, model_id=model_id,
                        hyperparams=dict(grid[sel.index]),
                        prediction=float(pred), actual=float(actual[i])))
                if policy.needs_daily_errors:
                    ledger.append(date, np.abs(block[i] - actual[i]),
                                  predictions=block[i], actual=actual[i])

        self.result.ledgers[(model_id, h)] = ledger
        self.result.failures[(model_id, h)] = failures
        self.result.fit_counts[(model_id, h)] = fit_count
        # Validation-slice folds for the candidate selected at test start
        # (consumed by the stacker).
        sel0 = select(ledger, policy, as_of=self.date_of(self.test_start))
        val_preds = ledger.predictions_matrix()
        for i in range(plan.valid_len):
            pred = val_preds[i, sel0.index]
            if np.isnan(pred):
                continue
            t = self.valid_start + i
            self.result.validation_folds.append(FoldResult(
                target_date=self.date_of(t), horizon=h, model_id=model_id,
                hyperparams=dict(grid[sel0.index]),
                prediction=float(pred), actual=float(self.values[t])))

    # -- univariate (TS) models -------------------------------------------

    def _run_ts_slice(self, model_id, h, slice_start, slice_len, window_len, out):
        options = self.model_options.get(model_id, self.model_options)
        failures = 0
        fit_count = 0
        for off in schedule_refits(self.policy, slice_len):
            b = slice_start + off
            t_end = min(b + self.policy.refit_period, slice_start + slice_len) - 1
            window_vals = self.ts_window_values(b, h, window_len)
            start_date = self.date_of(b - h - window_len + 1)
            try:
                fit = fit_ts_model(model_id,
                                   DailySeries(start=start_date, values=window_vals),
                                   options)
            except FitError:
                failures += t_end - b + 1
                continue
            fit_count += 1
            for t in range(b, t_end + 1):
                try:
                    if t == b:
                        pred = fit.forecast(h, allowed=(h,))
                    else:
                        pred = fit.reforecast(self.ts_window_values(t, h, window_len),
                                              h, phase=t - b, allowed=(h,))
                except FitError:
                    failures += 1
                    continue
                out.append(FoldResult(
                    target_date=self.date_of(t), horizon=h, model_id=model_id,
                    hyperparams={}, prediction=float(pred),
                    actual=float(self.values[t])))
        return failures, fit_count

    def run_ts(self, model_id: str, h: int, include_validation: bool):
        if include_validation:
            # Only train_len days precede a validation date, so the
            # univariate window is the shorter training slice there.
            self._run_ts_slice(model_id, h, self.valid_start, self.plan.valid_len,
                               self.plan.train_len, self.result.validation_folds)
        failures, fit_count = self._run_ts_slice(
            model_id, h, self.test_start, self.plan.test_len,
            self.plan.ts_train_len, self.result.folds)
        self.result.failures[(model_id, h)] = failures
        self.result.fit_counts[(model_id, h)] = fit_count

    # -- reference model ---------------------------------------------------

    def run_reference(self, model_id: str, h: int, include_validation: bool):
        if model_id != "seasonal_naive":
            raise ContractError(f"unknown reference model {model_id!r}")
        spans = [(self.test_start, self.plan.test_len, self.result.folds)]
        if include_validation:
            spans.append((self.valid_start, self.plan.valid_len,
                          self.result.validation_folds))
        for start, length, out in spans:
            for t in range(start, start + length):
                lag = max(SEASONAL_LAG, h)
                out.append(FoldResult(
                    target_date=self.date_of(t), horizon=h, model_id=model_id,
                    hyperparams={}, prediction=float(self.values[t - lag]),
                    actual=float(self.values[t])))
        self.result.failures[(model_id, h)] = 0
        self.result.fit_counts[(model_id, h)] = 0


def run_backtest(plan: BacktestPlan, series: DailySeries, cov: CovariateTable,
                 model_ids, horizons=None, policy: TunerPolicy | None = None,
                 seed: int = 0, grids: dict | None = None,
                 model_options: dict | None = None, ledger_stride: int = 1,
                 include_validation: bool = False, jobs: int = 1) -> RunResult:
    """Run the full rolling-origin evaluation for every (model, horizon).

    Fit failures quarantine the affected (model, day) pairs and are counted
    in the result instead of aborting the run. With include_validation=True
    the validation-slice predictions (stacker training data) are collected
    too.
    """
    policy = policy or TunerPolicy()
    horizons = tuple(horizons) if horizons else plan.horizons
    engine = _Engine(plan, series, cov, policy, seed, grids, model_options,
                     ledger_stride, jobs=jobs)
    for model_id in model_ids:
        family = model_family(model_id)
        for h in horizons:
            if family == "ml":
                engine.run_ml(model_id, h)
            elif family == "ts":
                engine.run_ts(model_id, h, include_validation)
            else:
                engine.run_reference(model_id, h, include_validation)
    return engine.result
