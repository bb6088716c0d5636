"""Experiment configuration: schema validation, defaults, data loading."""
import json

import pytest

from edforecast.config import (load_config, load_data, plan_from, policy_from,
                               resolve_spec, validate_config)
from edforecast.errors import ContractError, ParseError


def minimal():
    return {"schema_version": 1,
            "data": {"synth_spec": "stmarys_like", "n_days": 200}}


class TestValidateConfig:
    def test_defaults_are_filled_in(self):
        cfg = validate_config(minimal())
        assert cfg["seed"] == 0
        assert cfg["horizons"] == [1, 3, 7]
        assert cfg["geometry"]["train_len"] == 1460
        assert cfg["tuner"]["kind"] == "default_rule"
        assert cfg["stack"]["enabled"] is False

    def test_partial_sections_keep_unset_defaults(self):
        doc = minimal()
        doc["geometry"] = {"train_len": 100}
        cfg = validate_config(doc)
        assert cfg["geometry"]["train_len"] == 100
        assert cfg["geometry"]["valid_len"] == 730

    def test_wrong_schema_version_rejected(self):
        doc = minimal()
        doc["schema_version"] = 2
        with pytest.raises(ContractError):
            validate_config(doc)

    def test_unknown_model_rejected(self):
        doc = minimal()
        doc["models"] = ["lm", "prophet"]
        with pytest.raises(ContractError):
            validate_config(doc)

    def test_unknown_horizon_rejected(self):
        doc = minimal()
        doc["horizons"] = [2]
        with pytest.raises(ContractError):
            validate_config(doc)

    def test_unknown_top_level_key_rejected(self):
        doc = minimal()
        doc["surprise"] = 1
        with pytest.raises(ContractError):
            validate_config(doc)

    def test_validation_does_not_mutate_the_input(self):
        doc = minimal()
        validate_config(doc)
        assert "seed" not in doc


class TestLoadConfig:
    def test_invalid_json_is_a_parse_error(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text("{nope")
        with pytest.raises(ParseError):
            load_config(p)

    def test_round_trip(self, tmp_path):
        p = tmp_path / "c.json"
        p.write_text(json.dumps(minimal()))
        cfg = load_config(p)
        assert cfg["data"]["n_days"] == 200


class TestResolveSpec:
    def test_bundled_name(self):
        spec = resolve_spec("stmarys_like")
        assert spec.noise_sd > 0

    def test_unknown_name_rejected(self):
        with pytest.raises(ContractError):
            resolve_spec("no_such_hospital")

    def test_file_path_wins_over_bundled_names(self, tmp_path):
        p = tmp_path / "spec.json"
        p.write_text(json.dumps({"base_level": 100.0, "noise_sd": 0.0,
                                 "seed": 5}))
        spec = resolve_spec(str(p))
        assert spec.base_level == 100.0


class TestLoadData:
    def test_synthetic_source(self):
        cfg = validate_config(minimal())
        series, cov = load_data(cfg)
        assert len(series) == 200
        assert len(cov) == 200

    def test_csv_source_round_trips_the_synthetic_bundle(self, tmp_path):
        from edforecast.synth import emit_csv_bundle, load_bundled_spec
        import numpy as np
        spec = load_bundled_spec("stmarys_like")
        paths = emit_csv_bundle(spec, 400, tmp_path)
        doc = {"schema_version": 1, "data": {
            "attendance_csv": str(paths["attendance"]),
            "calendar_json": str(paths["calendar"]),
            "weather_csv": str(paths["weather"]),
            "trends_daily_csvs": [str(tmp_path / "trends_daily_*.csv")],
            "trends_monthly_csv": str(paths["trends_monthly"]),
        }}
        series, cov = load_data(validate_config(doc))
        gen_series, gen_cov = load_data(validate_config(
            {"schema_version": 1,
             "data": {"synth_spec": "stmarys_like", "n_days": 400}}))
        np.testing.assert_array_equal(series.values, gen_series.values)
        np.testing.assert_allclose(cov.flu, gen_cov.flu, atol=1e-9)
        np.testing.assert_array_equal(cov.bank_holiday, gen_cov.bank_holiday)


class TestDerivedObjects:
    def test_plan_from_uses_the_geometry_section(self):
        doc = minimal()
        doc["geometry"] = {"train_len": 100, "valid_len": 50, "test_len": 50}
        doc["horizons"] = [1]
        plan = plan_from(validate_config(doc), 210)
        assert (plan.train_len, plan.valid_len, plan.test_len) == (100, 50, 50)

    def test_policy_from_uses_the_tuner_section(self):
        doc = minimal()
        doc["tuner"] = {"kind": "ema", "alpha": 0.4, "refit_period": 7}
        policy = policy_from(validate_config(doc))
        assert policy.kind == "ema"
        assert policy.alpha == 0.4
        assert policy.refit_period == 7
