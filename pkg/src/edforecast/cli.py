"""Command-line interface.

Every subcommand logs JSON events to stderr, writes artifacts atomically
(temp file + rename), and prints a machine-readable JSON summary to stdout.

Exit codes: 0 success; 1 runtime failure (data quality, fit failure);
2 contract violation (bad config, bad arguments, unparseable input).
"""
from __future__ import annotations

import dataclasses
import functools
import json
import os
import sys
import tempfile

import click

from . import config as cfg_mod
from .backtest import run_backtest, score
from .ensemble import permutation_importance, stack_from_run
from .errors import ContractError, EdForecastError, ParseError
from .features import build_matrix
from .registry import ML_MODELS, fit_ml_model, grid_for
from .seeds import derive_seed
from .synth import emit_csv_bundle
from .tuner import build_ledger, select


def _log(event: str, **fields):
    print(json.dumps({"event": event, **fields}, sort_keys=True, default=str),
          file=sys.stderr)


def _emit(doc: dict):
    print(json.dumps(doc, sort_keys=True, default=str, indent=2))


def _atomic_write_text(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_via(path, writer):
    """Run `writer(tmp_path)` and rename the result into place."""
    path = os.fspath(path)
    d = os.path.dirname(path) or "."
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=".part")
    os.close(fd)
    try:
        writer(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ContractError, ParseError) as e:
            _log("error", kind=type(e).__name__, message=str(e))
            raise SystemExit(2)
        except EdForecastError as e:
            _log("error", kind=type(e).__name__, message=str(e))
            raise SystemExit(1)
    return wrapper


def _load(config_path):
    cfg = cfg_mod.load_config(config_path)
    _log("config_loaded", path=config_path, seed=cfg["seed"],
         models=cfg["models"], horizons=cfg["horizons"])
    series, cov = cfg_mod.load_data(cfg)
    _log("data_loaded", n_days=len(series), start=series.start.isoformat(),
         end=series.end.isoformat())
    return cfg, series, cov


def _scores_doc(summaries) -> dict:
    doc: dict = {}
    for (model_id, h), s in summaries.items():
        doc.setdefault(model_id, {})[f"h{h}"] = {
            "mae": s.mae, "mape": s.mape, "n": s.n}
    return doc


@click.group()
@click.option("--jobs", default=1, show_default=True,
              help="Parallel workers for candidate fits (1 = serial; "
                   "results are identical for any value).")
@click.pass_context
def main(ctx, jobs):
    """Daily attendance forecasting: data synthesis, rolling-origin
    backtests, hyperparameter tuning, stacking, and feature importance."""
    ctx.ensure_object(dict)
    ctx.obj["jobs"] = jobs


@main.command()
@click.argument("spec")
@click.option("--days", required=True, type=int, help="Number of days to generate.")
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--seed", default=None, type=int,
              help="Override the spec's random seed.")
@_handle_errors
def synth(spec, days, out, seed):
    """Generate a synthetic CSV bundle from a bundled or file spec."""
    dgp = cfg_mod.resolve_spec(spec)
    if seed is not None:
        dgp = dataclasses.replace(dgp, seed=seed)
    os.makedirs(out, exist_ok=True)
    paths = emit_csv_bundle(dgp, days, out)
    _log("synth_written", out=out, n_days=days)
    _emit({"command": "synth", "n_days": days,
           "files": {k: os.fspath(v) if not isinstance(v, list)
                     else [os.fspath(p) for p in v]
                     for k, v in paths.items()}})


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@_handle_errors
def ingest(config_path):
    """Load and validate the configured data; print a summary."""
    cfg, series, cov = _load(config_path)
    _emit({
        "command": "ingest",
        "n_days": len(series),
        "start": series.start.isoformat(),
        "end": series.end.isoformat(),
        "mean": float(series.values.mean()),
        "events": sorted(cov.events),
        "fill_counts": {k: int(v) for k, v in cov.fill_counts.items()},
    })


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--horizon", required=True, type=click.Choice(["1", "3", "7"]))
@click.option("--out", required=True, type=click.Path(), help="Matrix CSV path.")
@_handle_errors
def features(config_path, horizon, out):
    """Write the covariate model matrix for one horizon as CSV."""
    cfg, series, cov = _load(config_path)
    matrix = build_matrix(series, cov, int(horizon))
    _atomic_write_via(out, matrix.to_csv)
    _log("matrix_written", path=out, rows=len(matrix))
    _emit({"command": "features", "horizon": int(horizon), "path": out,
           "rows": len(matrix), "columns": list(matrix.frame.columns)})


def _run_configured(cfg, series, cov, jobs, include_validation):
    plan = cfg_mod.plan_from(cfg, len(series))
    policy = cfg_mod.policy_from(cfg)
    _log("backtest_start", train_len=plan.train_len, valid_len=plan.valid_len,
         test_len=plan.test_len, policy=policy.kind,
         refit_period=policy.refit_period)
    run = run_backtest(plan, series, cov, cfg["models"],
                       horizons=tuple(cfg["horizons"]), policy=policy,
                       seed=cfg["seed"], grids=cfg["grids"] or None,
                       model_options=cfg["model_options"] or None,
                       ledger_stride=cfg["ledger_stride"],
                       include_validation=include_validation, jobs=jobs)
    for w in run.warnings:
        _log("warning", message=w)
    for (model_id, h), n in sorted(run.failures.items()):
        if n:
            _log("fit_failures", model=model_id, horizon=h, days=n)
    return plan, run


def _fit_stacks(cfg, run):
    variants = tuple(cfg["stack"]["variants"])
    stacks, stack_folds = {}, []
    for h in cfg["horizons"]:
        per_h, folds_h = stack_from_run(run, h, variants=variants)
        for variant, sw in per_h.items():
            stacks[f"{variant}_h{h}"] = sw
            stack_folds.extend(folds_h[variant])
            _log("stack_fitted", variant=variant, horizon=h,
                 weights=dict(zip(sw.model_ids, sw.weights)),
                 converged=sw.converged, gap=sw.gap)
    return stacks, stack_folds


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.pass_context
@_handle_errors
def backtest(ctx, config_path, out):
    """Run the full rolling-origin evaluation; write folds, scores, ledgers."""
    cfg, series, cov = _load(config_path)
    os.makedirs(out, exist_ok=True)
    stacking = bool(cfg["stack"]["enabled"])
    plan, run = _run_configured(cfg, series, cov, ctx.obj["jobs"],
                                include_validation=stacking)
    folds = list(run.folds)
    stack_doc = {}
    if stacking:
        stacks, stack_folds = _fit_stacks(cfg, run)
        folds += stack_folds
        stack_doc = {name: sw.to_json_dict() for name, sw in stacks.items()}
        _atomic_write_text(os.path.join(out, "stack_weights.json"),
                           json.dumps(stack_doc, sort_keys=True, indent=2))
    summaries = score(folds)
    scores_doc = _scores_doc(summaries)
    _atomic_write_via(os.path.join(out, "folds.csv"), run.folds_to_csv)
    _atomic_write_text(os.path.join(out, "scores.json"),
                       json.dumps(scores_doc, sort_keys=True, indent=2))
    ledger_dir = os.path.join(out, "ledgers")
    os.makedirs(ledger_dir, exist_ok=True)
    for (model_id, h), ledger in sorted(run.ledgers.items()):
        _atomic_write_via(os.path.join(ledger_dir, f"{model_id}_h{h}.csv"),
                          ledger.to_csv)
    _log("backtest_done", folds=len(run.folds))
    _emit({"command": "backtest", "out": out, "scores": scores_doc,
           "stacks": sorted(stack_doc),
           "failures": {f"{m}_h{h}": n for (m, h), n in sorted(run.failures.items())},
           "warnings": run.warnings})


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.pass_context
@_handle_errors
def tune(ctx, config_path, out):
    """Build validation-slice error ledgers and report the candidate each
    selection rule would pick at the start of the test slice."""
    cfg, series, cov = _load(config_path)
    os.makedirs(out, exist_ok=True)
    plan = cfg_mod.plan_from(cfg, len(series))
    policy = cfg_mod.policy_from(cfg)
    models = [m for m in cfg["models"] if m in ML_MODELS]
    if not models:
        raise ContractError("tune needs at least one covariate model in 'models'")
    selections: dict = {}
    for model_id in models:
        for h in cfg["horizons"]:
            matrix = build_matrix(series, cov, h)
            grid = grid_for(
                model_id,
                matrix.rows_between(0, plan.train_len),
                overrides=cfg["grids"] or None)
            ledger = build_ledger(plan, matrix, model_id, grid,
                                  seed=cfg["seed"], stride=cfg["ledger_stride"],
                                  jobs=ctx.obj["jobs"])
            _atomic_write_via(os.path.join(out, f"{model_id}_h{h}.csv"),
                              ledger.to_csv)
            as_of = matrix.dates()[len(matrix) - plan.test_len]
            sel = select(ledger, policy, as_of)
            selections[f"{model_id}_h{h}"] = {
                "hyperparams": sel.hyperparams,
                "candidate_index": sel.index,
                "used_fallback": sel.used_fallback,
                "as_of": as_of.isoformat(),
            }
            _log("tuned", model=model_id, horizon=h,
                 hyperparams=sel.hyperparams)
    _atomic_write_text(os.path.join(out, "selections.json"),
                       json.dumps(selections, sort_keys=True, indent=2))
    _emit({"command": "tune", "out": out, "policy": policy.kind,
           "selections": selections})


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.pass_context
@_handle_errors
def stack(ctx, config_path, out):
    """Fit stacking weights on validation predictions and score the stacked
    forecasts on the test slice."""
    cfg, series, cov = _load(config_path)
    os.makedirs(out, exist_ok=True)
    plan, run = _run_configured(cfg, series, cov, ctx.obj["jobs"],
                                include_validation=True)
    stacks, stack_folds = _fit_stacks(cfg, run)
    stack_doc = {name: sw.to_json_dict() for name, sw in stacks.items()}
    _atomic_write_text(os.path.join(out, "stack_weights.json"),
                       json.dumps(stack_doc, sort_keys=True, indent=2))
    scores_doc = _scores_doc(score(list(run.folds) + stack_folds))
    _atomic_write_text(os.path.join(out, "scores.json"),
                       json.dumps(scores_doc, sort_keys=True, indent=2))
    _emit({"command": "stack", "out": out, "scores": scores_doc,
           "weights": {name: dict(zip(sw.model_ids, sw.weights))
                       for name, sw in stacks.items()}})


@main.command()
@click.argument("model_id")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path(), help="Output directory.")
@click.option("--horizon", default="1", type=click.Choice(["1", "3", "7"]),
              show_default=True)
@click.option("--identity", is_flag=True,
              help="Replace every shuffle with the identity permutation "
                   "(diagnostic; all importances become exactly zero).")
@_handle_errors
def importance(model_id, config_path, out, horizon, identity):
    """Permutation feature importance for one covariate model.

    The model is fitted on all but the last `importance.holdout_days` rows
    and importance is measured on the held-out tail.
    """
    if model_id not in ML_MODELS:
        raise ContractError(
            f"importance needs a covariate model, one of {list(ML_MODELS)}; "
            f"got {model_id!r}")
    cfg, series, cov = _load(config_path)
    os.makedirs(out, exist_ok=True)
    h = int(horizon)
    matrix = build_matrix(series, cov, h)
    holdout = cfg["importance"]["holdout_days"]
    if len(matrix) <= holdout + 28:
        raise ContractError(
            f"matrix has {len(matrix)} rows; needs more than holdout "
            f"({holdout}) plus a 28-day minimum training slice")
    train = matrix.rows_between(0, len(matrix) - holdout)
    tail = matrix.rows_between(len(matrix) - holdout, len(matrix))
    grid = grid_for(model_id, train, overrides=cfg["grids"] or None)
    hp = grid[0]
    model = fit_ml_model(model_id, train, hp,
                         seed=derive_seed(cfg["seed"], model_id, "importance"))
    _log("model_fitted", model=model_id, horizon=h, hyperparams=hp,
         train_rows=len(train), holdout_rows=len(tail))
    report = permutation_importance(model, tail,
                                    n_repeats=cfg["importance"]["n_repeats"],
                                    seed=cfg["seed"], identity=identity)
    _atomic_write_via(os.path.join(out, f"importance_{model_id}_h{h}.csv"),
                      report.to_csv)
    _atomic_write_text(os.path.join(out, f"importance_{model_id}_h{h}.json"),
                       json.dumps(report.to_json_dict(), sort_keys=True, indent=2))
    _emit({"command": "importance", "model": model_id, "horizon": h,
           "out": out, "baseline_mae": report.baseline_mae,
           "top": report.top(5)})


if __name__ == "__main__":
    main()
