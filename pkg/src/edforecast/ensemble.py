"""Stacked regression over base-model predictions and permutation variable
importance on held-out data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import ContractError
from .features import ModelMatrix
from .mlmodels import fit_glmnet, fit_lm
from .mlmodels.grids import complexity_key, default_grid
from .seeds import derive_rng
from .series import mae

EG_BUDGET = 200_000
EG_GAP_TOL = 1e-8   # duality gap on the mean-squared objective


@dataclass(frozen=True)
class StackWeights:
    model_ids: tuple
    weights: tuple
    intercept: float
    variant: str             # convex | glm | penalized
    converged: bool = True
    gap: float = 0.0

    def __post_init__(self):
        if len(self.model_ids) != len(self.weights):
            raise ContractError("one weight per base model required")
        if self.variant == "convex":
            w = np.asarray(self.weights)
            if w.min() < 0 or abs(w.sum() - 1.0) > 1e-9:
                raise ContractError("convex stack weights must lie on the simplex")
            if self.intercept != 0.0:
                raise ContractError("the convex stacker has no intercept")

    def to_json_dict(self):
        return {"schema_version": 1, "variant": self.variant,
                "model_ids": list(self.model_ids),
                "weights": list(self.weights), "intercept": self.intercept,
                "converged": self.converged, "gap": self.gap}

    @classmethod
    def from_json_dict(cls, doc):
        return cls(model_ids=tuple(doc["model_ids"]),
                   weights=tuple(doc["weights"]),
                   intercept=float(doc["intercept"]), variant=doc["variant"],
                   converged=bool(doc["converged"]), gap=float(doc["gap"]))


def _check_stack_inputs(preds, actual, min_models=2):
    P = np.asarray(preds, dtype=float)
    y = np.asarray(actual, dtype=float)
    if P.ndim != 2 or y.ndim != 1 or P.shape[0] != y.size:
        raise ContractError("predictions must be (n_dates, n_models) against n_dates actuals")
    if P.shape[1] < min_models:
        raise ContractError(f"stacking needs at least {min_models} base models")
    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(y))):
        raise ContractError("stack inputs must be finite")
    return P, y


def _simplex_gap(G, b, w) -> float:
    """Frank-Wolfe duality gap of the quadratic objective at w."""
    g = 2.0 * (G @ w - b)
    return float(g @ w - g.min())


def _kkt_polish(G, b, w, tol):
    """Exact active-set solve seeded with the current support.

    Solves the equality-constrained least squares on the active support,
    drops coordinates that go negative, and re-admits coordinates whose
    gradient violates optimality, until the KKT conditions hold.
    """
    m = b.size
    active = w > max(tol, 1e-12)
    if not active.any():
        active[int(np.argmin(np.diag(G) - 2 * b))] = True
    for _ in range(2 * m + 2):
        idx = np.flatnonzero(active)
        k = idx.size
        A = np.zeros((k + 1, k + 1))
        A[:k, :k] = 2.0 * G[np.ix_(idx, idx)]
        A[:k, k] = 1.0
        A[k, :k] = 1.0
        rhs = np.concatenate([2.0 * b[idx], [1.0]])
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        ws = sol[:k]
        if ws.min() < -1e-12:
            active[idx[int(np.argmin(ws))]] = False
            continue
        cand = np.zeros(m)
        cand[idx] = np.clip(ws, 0.0, None)
        cand /= cand.sum()
        g = 2.0 * (G @ cand - b)
        worst = int(np.argmin(g))
        if not active[worst] and (g @ cand - g[worst]) > tol:
            active[worst] = True
            continue
        return cand
    return w


def fit_stack_convex(preds, actual, model_ids=None, budget=EG_BUDGET,
                     gap_tol=EG_GAP_TOL) -> StackWeights:
    """Least squares over the probability simplex.

    Exponentiated-gradient descent with exact line search along each
    proposal segment, finished by an exact active-set solve on the support
    the iterates identify; stops at Frank-Wolfe duality gap <= gap_tol on
    the mean-squared objective. Every iterate stays on the simplex.
    """
    P, y = _check_stack_inputs(preds, actual)
    n, m = P.shape
    model_ids = tuple(model_ids) if model_ids else tuple(f"m{i}" for i in range(m))
    G = (P.T @ P) / n
    b = (P.T @ y) / n
    c = float(y @ y) / n

    def objective(w):
        return float(w @ G @ w - 2.0 * b @ w + c)

    w = np.full(m, 1.0 / m)
    f = objective(w)
    eta = 1.0 / max(1e-12, 2.0 * float(np.max(np.diag(G))))
    gap = _simplex_gap(G, b, w)
    stalled = 0
    for _ in range(budget):
        if gap <= gap_tol or stalled >= 50:
            break
        g = 2.0 * (G @ w - b)
        z = np.log(np.maximum(w, 1e-300)) - eta * g
        z -= z.max()
        prop = np.exp(z)
        prop /= prop.sum()
        # Exact line search along the in-simplex segment w -> prop.
        d = prop - w
        curv = float(d @ G @ d)
        slope = float(d @ (G @ w - b))
        t = 1.0 if curv <= 0 else min(1.0, max(0.0, -slope / curv))
        w_new = w + t * d
        f_new = objective(w_new)
        if f_new <= f:
            stalled = stalled + 1 if f_new == f else 0
            w, f = w_new, f_new
            eta = min(eta * 1.2, 1e100)  # keep eta * g finite
        else:
            stalled += 1
            eta *= 0.5
        gap = _simplex_gap(G, b, w)
    polished = _kkt_polish(G, b, w, gap_tol)
    if objective(polished) <= f:
        w = polished
        gap = _simplex_gap(G, b, w)
    converged = gap <= gap_tol
    weights = w / w.sum()
    return StackWeights(model_ids=model_ids,
                        weights=tuple(float(v) for v in weights),
                        intercept=0.0, variant="convex",
                        converged=converged, gap=float(gap))


def fit_stack_glm(preds, actual, model_ids=None, variant="glm",
                  seed: int = 0) -> StackWeights:
    """Unconstrained least-squares stacker (variant "glm") or elastic-net
    stacker (variant "penalized", tuned on a chronological 80/20 split of
    the stacking data by mean validation error with a simplicity tie-break).
    """
    P, y = _check_stack_inputs(preds, actual, min_models=1)
    n, m = P.shape
    model_ids = tuple(model_ids) if model_ids else tuple(f"m{i}" for i in range(m))
    frame = pd.DataFrame({f"pred_{mid}": P[:, j] for j, mid in enumerate(model_ids)})
    frame.insert(0, "target", y)
    matrix = ModelMatrix(horizon=1, frame=frame)

    if variant == "glm":
        fit = fit_lm(matrix)
        coef = {name: c for name, c in zip(fit.encoded_columns, fit.coefficients)}
        return StackWeights(model_ids=model_ids,
                            weights=tuple(float(coef.get(f"pred_{mid}", 0.0))
                                          for mid in model_ids),
                            intercept=float(fit.intercept), variant="glm")
    if variant != "penalized":
        raise ContractError(f"unknown stack variant {variant!r}")

    split = max(1, int(round(0.8 * n)))
    if split >= n:
        split = n - 1
    head = ModelMatrix(horizon=1, frame=frame.iloc[:split])
    tail_X = frame.iloc[split:]
    grid = default_grid("glmnet", head)
    scored = []
    for j, hp in enumerate(grid):
        cand = fit_glmnet(head, hp)
        err = float(np.mean(np.abs(cand.predict_frame(tail_X) - y[split:])))
        scored.append((err, complexity_key("glmnet", hp), j, hp))
    _, _, _, best_hp = min(scored)
    fit = fit_glmnet(matrix, best_hp)
    coef = {name: c for name, c in zip(fit.encoded_columns, fit.coefficients)}
    return StackWeights(model_ids=model_ids,
                        weights=tuple(float(coef.get(f"pred_{mid}", 0.0))
                                      for mid in model_ids),
                        intercept=float(fit.intercept), variant="penalized")


def predict_stack(stack: StackWeights, preds_row: dict) -> float:
    missing = [mid for mid in stack.model_ids if mid not in preds_row]
    if missing:
        raise ContractError(f"missing base predictions for {missing}")
    return float(stack.intercept +
                 sum(w * preds_row[mid]
                     for mid, w in zip(stack.model_ids, stack.weights)))


def stack_from_run(run, horizon: int, variants=("convex",), exclude=("seasonal_naive",)):
    """Fit stackers on a backtest run's validation-slice predictions and
    apply them to its test-slice predictions.

    Returns (stacks, test_folds) where stacks maps variant -> StackWeights
    and test_folds maps variant -> FoldResult list on the test dates where
    every base model predicted.
    """
    from .backtest import FoldResult

    def table(folds):
        by_date: dict = {}
        for f in folds:
            if f.horizon != horizon or f.model_id in exclude:
                continue
            by_date.setdefault(f.target_date, {})[f.model_id] = f
        return by_date

    val = table(run.validation_folds)
    test = table(run.folds)
    if not val or not test:
        raise ContractError("stacking needs validation and test predictions")
    model_ids = tuple(sorted(set.intersection(
        *(set(v) for v in list(val.values()) + list(test.values())))))
    if len(model_ids) < 2:
        raise ContractError("stacking needs at least 2 base models on common dates")

    def matrix_of(by_date):
        dates = sorted(d for d, row in by_date.items()
                       if all(m in row for m in model_ids))
        P = np.array([[by_date[d][m].prediction for m in model_ids] for d in dates])
        y = np.array([by_date[d][model_ids[0]].actual for d in dates])
        return dates, P, y

    _, P_val, y_val = matrix_of(val)
    test_dates, P_test, y_test = matrix_of(test)

    stacks = {}
    test_folds = {}
    for variant in variants:
        if variant == "convex":
            stack = fit_stack_convex(P_val, y_val, model_ids=model_ids)
        else:
            stack = fit_stack_glm(P_val, y_val, model_ids=model_ids,
                                  variant=variant)
        preds = P_test @ np.asarray(stack.weights) + stack.intercept
        stacks[variant] = stack
        test_folds[variant] = [
            FoldResult(target_date=d, horizon=horizon,
                       model_id=f"stack_{variant}",
                       hyperparams={"variant": variant},
                       prediction=float(p), actual=float(a))
            for d, p, a in zip(test_dates, preds, y_test)]
    return stacks, test_folds


@dataclass(frozen=True)
class ImportanceReport:
    feature_names: tuple
    raw: tuple            # mean MAE increase per feature (can be negative)
    shares: tuple         # clipped-at-zero, normalized to sum 1
    baseline_mae: float
    n_repeats: int
    seed: int

    def to_json_dict(self):
        return {"schema_version": 1, "baseline_mae": self.baseline_mae,
                "n_repeats": self.n_repeats, "seed": self.seed,
                "importance": {name: {"raw": r, "share": s}
                               for name, r, s in zip(self.feature_names,
                                                     self.raw, self.shares)}}

    def to_csv(self, path):
        order = sorted(range(len(self.feature_names)),
                       key=lambda i: -self.raw[i])
        with open(path, "w") as fh:
            fh.write("feature,raw_importance,share\n")
            for i in order:
                fh.write(f"{self.feature_names[i]},{self.raw[i]!r},{self.shares[i]!r}\n")

    def top(self, k):
        order = sorted(range(len(self.feature_names)), key=lambda i: -self.raw[i])
        return [self.feature_names[i] for i in order[:k]]


def permutation_importance(model, matrix: ModelMatrix, n_repeats: int = 10,
                           seed: int = 0, identity: bool = False) -> ImportanceReport:
    """Mean held-out MAE increase per feature when that feature's values are
    shuffled. Raw (pre-encoding) columns are permuted, so one-hot blocks of
    a categorical move jointly. `identity` replaces every shuffle with the
    identity permutation (test hook)."""
    if n_repeats < 1:
        raise ContractError("n_repeats must be >= 1")
    features = matrix.features()
    actual = matrix.targets()
    baseline = mae(actual, model.predict_frame(features))
    n = len(features)
    raw = []
    names = list(features.columns)
    for col in names:
        deltas = []
        for r in range(n_repeats):
            if identity:
                perm = np.arange(n)
            else:
                rng = derive_rng(seed, "permute", col, r)
                perm = rng.permutation(n)
            shuffled = features.copy()
            shuffled[col] = features[col].to_numpy()[perm]
            deltas.append(mae(actual, model.predict_frame(shuffled)) - baseline)
        raw.append(float(np.mean(deltas)))
    clipped = np.clip(np.asarray(raw), 0.0, None)
    total = clipped.sum()
    shares = clipped / total if total > 0 else np.zeros(len(raw))
    return ImportanceReport(feature_names=tuple(names), raw=tuple(raw),
                            shares=tuple(float(s) for s in shares),
                            baseline_mae=float(baseline), n_repeats=n_repeats,
                            seed=seed)
