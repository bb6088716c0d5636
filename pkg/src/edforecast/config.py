"""Experiment configuration: schema validation, defaults, and data loading."""
from __future__ import annotations

import glob
import json
import os
from importlib import resources

import jsonschema

from .backtest import make_plan
from .errors import ContractError, ParseError
from .ingest import (adjust_trends, build_covariate_table, load_attendance_csv,
                     load_calendar, load_trends, load_weather_csv)
from .registry import ALL_MODELS
from .synth import DgpSpec, generate, load_bundled_spec
from .tuner import TunerPolicy

DEFAULTS = {
    "seed": 0,
    "horizons": [1, 3, 7],
    "models": list(ALL_MODELS),
    "geometry": {"train_len": 1460, "valid_len": 730, "test_len": 730},
    "tuner": {"kind": "default_rule", "n": 7, "alpha": 0.1, "refit_period": 1},
    "grids": {},
    "model_options": {},
    "ledger_stride": 1,
    "stack": {"enabled": False, "variants": ["convex"]},
    "importance": {"n_repeats": 10, "holdout_days": 180},
}


def _schema() -> dict:
    path = resources.files("edforecast").joinpath("schemas/experiment.schema.json")
    return json.loads(path.read_text())


def validate_config(doc: dict) -> dict:
    """Validate against the published schema and fill in defaults."""
    try:
        jsonschema.validate(doc, _schema())
    except jsonschema.ValidationError as e:
        raise ContractError(f"invalid experiment config: {e.message}") from e
    cfg = json.loads(json.dumps(doc))
    for key, default in DEFAULTS.items():
        if key not in cfg:
            cfg[key] = json.loads(json.dumps(default))
        elif isinstance(default, dict):
            for k, v in default.items():
                cfg[key].setdefault(k, v)
    return cfg


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as e:
        raise ParseError(f"{path}: invalid JSON: {e}") from e
    if not isinstance(doc, dict):
        raise ContractError(f"{path}: config must be a JSON object")
    return validate_config(doc)


def resolve_spec(name_or_path: str) -> DgpSpec:
    """A generator spec referenced by bundled name or by file path."""
    if os.path.exists(name_or_path):
        with open(name_or_path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as e:
                raise ParseError(f"{name_or_path}: invalid JSON: {e}") from e
        return DgpSpec.from_json_dict(doc)
    try:
        return load_bundled_spec(name_or_path)
    except FileNotFoundError:
        raise ContractError(f"no generator spec named {name_or_path!r} "
                            "(not a file, not bundled)") from None


def load_data(cfg: dict):
    """Materialize (series, covariates) from the config's data section."""
    data = cfg["data"]
    if "synth_spec" in data:
        spec = resolve_spec(data["synth_spec"])
        series, cov, _ = generate(spec, data["n_days"])
        return series, cov
    series = load_attendance_csv(data["attendance_csv"])
    years = range(series.start.year, series.end.year + 2)
    calendar = load_calendar(data["calendar_json"], years)
    weather = load_weather_csv(data["weather_csv"])
    daily_paths = []
    for pattern in data["trends_daily_csvs"]:
        hits = sorted(glob.glob(pattern))
        daily_paths.extend(hits if hits else [pattern])
    frames = load_trends(daily_paths, data["trends_monthly_csv"])
    flu_start, flu = adjust_trends(frames)
    cov = build_covariate_table(series, calendar, weather, flu_start, flu)
    return series, cov


def plan_from(cfg: dict, total_len: int):
    geo = cfg["geometry"]
    return make_plan(total_len, train_len=geo["train_len"],
                     valid_len=geo["valid_len"], test_len=geo["test_len"],
                     horizons=tuple(cfg["horizons"]))


def policy_from(cfg: dict) -> TunerPolicy:
    t = cfg["tuner"]
    return TunerPolicy(kind=t["kind"], n=t["n"], alpha=t["alpha"],
                       refit_period=t["refit_period"])
