"""Hyperparameter selection: per-day error ledgers over the validation
slice, five selection rules, and the refit-period schedule that freezes
selections (and fitted parameters) between boundaries."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from datetime import date as date_type
from datetime import timedelta

import numpy as np

from .errors import ContractError
from .mlmodels.grids import complexity_key

POLICY_KINDS = ("yesterday", "past_n_days", "ema", "overall_average", "default_rule")
REFIT_PERIODS = (1, 7, 30, 60, 365, 730)


@dataclass(frozen=True)
class TunerPolicy:
    kind: str = "default_rule"
    n: int = 7                 # window for past_n_days
    alpha: float = 0.1         # decay for ema
    refit_period: int = 1

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ContractError(f"unknown tuner policy {self.kind!r}")
        if self.n < 1:
            raise ContractError("past_n_days window must be >= 1")
        if not (0.0 < self.alpha <= 1.0):
            raise ContractError("ema alpha must be in (0, 1]")
        if self.refit_period < 1:
            raise ContractError("refit period must be >= 1")

    @property
    def needs_daily_errors(self) -> bool:
        """True when selection depends on recent errors, so the ledger must
        be extended with realized test-period errors."""
        return self.kind in ("yesterday", "past_n_days", "ema")


@dataclass
class ValidationLedger:
    """Per-day absolute errors for every hyperparameter candidate of one
    (model, horizon) pair. Rows are appended in date order; NaN marks a
    quarantined (failed) candidate-day."""

    model_id: str
    horizon: int
    candidates: list                    # hyperparameter dicts, fixed order
    validation_end: date_type | None = None  # last validation-slice date
    dates: list = field(default_factory=list)
    rows: list = field(default_factory=list)       # absolute errors per date
    pred_rows: list = field(default_factory=list)  # raw predictions per date
    actuals: list = field(default_factory=list)

    def append(self, date, errors, predictions=None, actual=None):
        errors = np.asarray(errors, dtype=float)
        if errors.shape != (len(self.candidates),):
            raise ContractError("ledger row length does not match the candidate list")
        if self.dates and date <= self.dates[-1]:
            raise ContractError("ledger rows must be appended in date order")
        self.dates.append(date)
        self.rows.append(errors)
        if predictions is None:
            predictions = np.full(len(self.candidates), np.nan)
        self.pred_rows.append(np.asarray(predictions, dtype=float))
        self.actuals.append(np.nan if actual is None else float(actual))

    def predictions_matrix(self) -> np.ndarray:
        if not self.pred_rows:
            return np.empty((0, len(self.candidates)))
        return np.vstack(self.pred_rows)

    def errors_matrix(self) -> np.ndarray:
        if not self.rows:
            return np.empty((0, len(self.candidates)))
        return np.vstack(self.rows)

    def rows_before(self, as_of) -> np.ndarray:
        k = sum(1 for d in self.dates if d < as_of)
        return self.errors_matrix()[:k]

    def validation_rows(self) -> np.ndarray:
        if self.validation_end is None:
            return self.errors_matrix()
        k = sum(1 for d in self.dates if d <= self.validation_end)
        return self.errors_matrix()[:k]

    def to_csv(self, path):
        with open(path, "w") as fh:
            fh.write("date,model,candidate_json,abs_error\n")
            for date, row in zip(self.dates, self.rows):
                for hp, err in zip(self.candidates, row):
                    cand = json.dumps(hp, sort_keys=True).replace('"', '""')
                    err_s = "" if np.isnan(err) else repr(float(err))
                    fh.write(f'{date.isoformat()},{self.model_id},"{cand}",{err_s}\n')


@dataclass(frozen=True)
class Selection:
    index: int
    hyperparams: dict
    used_fallback: bool = False


def _candidate_means(window: np.ndarray) -> np.ndarray:
    """Mean absolute error per candidate ignoring quarantined days; a
    candidate with no usable day scores +inf."""
    scores = np.full(window.shape[1], np.inf)
    for j in range(window.shape[1]):
        col = window[:, j]
        ok = ~np.isnan(col)
        if ok.any():
            scores[j] = float(col[ok].mean())
    return scores


def _ema_scores(window: np.ndarray, alpha: float) -> np.ndarray:
    scores = np.full(window.shape[1], np.inf)
    for j in range(window.shape[1]):
        col = window[:, j]
        col = col[~np.isnan(col)]
        if col.size == 0:
            continue
        e = float(col[0])
        for err in col[1:]:
            e = alpha * float(err) + (1.0 - alpha) * e
        scores[j] = e
    return scores


def select(ledger: ValidationLedger, policy: TunerPolicy, as_of) -> Selection:
    """Pick a hyperparameter candidate using errors strictly before as_of.

    Ties are broken by fixed candidate order (np.argmin), except the default
    rule, which prefers the simpler candidate first.
    """
    if len(ledger.candidates) == 1:
        return Selection(0, dict(ledger.candidates[0]))
    history = ledger.rows_before(as_of)
    if history.shape[0] == 0:
        raise ContractError(f"ledger has no errors before {as_of}")

    kind = policy.kind
    fallback = False
    if kind == "yesterday":
        prev = as_of - timedelta(days=1)
        idx = [i for i, d in enumerate(ledger.dates) if d == prev]
        window = history[[idx[0]]] if idx else history[:0]
    elif kind == "past_n_days":
        lo = as_of - timedelta(days=policy.n)
        keep = [i for i, d in enumerate(ledger.dates) if lo <= d < as_of]
        window = history[keep] if keep else history[:0]
    elif kind == "ema":
        window = history
    elif kind in ("overall_average", "default_rule"):
        window = history if kind == "overall_average" else ledger.validation_rows()
    else:  # pragma: no cover - guarded by TunerPolicy
        raise ContractError(f"unknown policy kind {kind!r}")

    if window.shape[0] == 0 or np.all(np.isnan(window)):
        window = history
        kind = "overall_average"
        fallback = True

    if kind == "ema":
        scores = _ema_scores(window, policy.alpha)
    else:
        scores = _candidate_means(window)
    if not np.isfinite(scores).any():
        raise ContractError("no candidate has a usable error history")

    if kind == "default_rule":
        best = min(range(len(scores)),
                   key=lambda j: (scores[j],
                                  complexity_key(ledger.model_id, ledger.candidates[j]),
                                  j))
    else:
        best = int(np.argmin(scores))
    return Selection(best, dict(ledger.candidates[best]), used_fallback=fallback)


def _fit_quarantined(model_id, window, hp, seed):
    from .errors import FitError
    from .registry import fit_ml_model
    try:
        return fit_ml_model(model_id, window, hp, seed=seed)
    except FitError:
        return None


def build_ledger(plan, matrix, model_id: str, grid, seed: int = 0,
                 stride: int = 1, jobs: int = 1) -> ValidationLedger:
    """One out-of-sample absolute error (and prediction) per validation day
    and candidate, under the same rolling-window discipline as the test
    phase: candidates refit every `stride` days on the train_len rows ending
    at the forecast origin, with parameters frozen in between.
    """
    from .seeds import derive_seed

    grid = [dict(hp) for hp in grid]
    if not grid:
        raise ContractError("candidate grid is empty")
    frame = matrix.frame
    dates = list(frame.index)
    n = len(dates)
    h = matrix.horizon
    valid_lo = n - plan.test_len - plan.valid_len
    if valid_lo - h - plan.train_len + 1 < 0:
        raise ContractError("matrix too short for the validation ledger geometry")
    ledger = ValidationLedger(model_id=model_id, horizon=h, candidates=grid,
                              validation_end=dates[n - plan.test_len - 1])
    stride = max(1, int(stride))
    for b in range(valid_lo, valid_lo + plan.valid_len, stride):
        t_end = min(b + stride, valid_lo + plan.valid_len)
        window = matrix.rows_between(b - h - plan.train_len + 1, b - h + 1)
        seeds = [derive_seed(seed, model_id, "h", h, "ledger", b, "cand", j)
                 for j in range(len(grid))]
        if jobs != 1 and len(grid) > 1:
            from joblib import Parallel, delayed
            fits = Parallel(n_jobs=jobs)(
                delayed(_fit_quarantined)(model_id, window, hp, s)
                for hp, s in zip(grid, seeds))
        else:
            fits = [_fit_quarantined(model_id, window, hp, s)
                    for hp, s in zip(grid, seeds)]
        block = matrix.rows_between(b, t_end)
        feats = block.features()
        actual = block.targets()
        preds = np.full((len(actual), len(grid)), np.nan)
        for j, fit in enumerate(fits):
            if fit is not None:
                preds[:, j] = fit.predict_frame(feats)
        for i in range(len(actual)):
            ledger.append(dates[b + i], np.abs(preds[i] - actual[i]),
                          predictions=preds[i], actual=actual[i])
    return ledger


def schedule_refits(policy: TunerPolicy, test_len: int) -> list:
    """Offsets of refit boundaries within the test slice: day 0 and every
    refit_period days after."""
    if test_len < 1:
        raise ContractError("test slice must contain at least one day")
    return list(range(0, test_len, policy.refit_period))
