"""Covariate model-matrix construction and its leakage discipline."""
from datetime import timedelta

import numpy as np
import pytest

from conftest import flat_covariates, make_series
from edforecast.errors import ContractError
from edforecast.features import build_matrix, ts_feature_view


class TestBuildMatrix:
    def test_constant_series_lags_are_constant(self):
        s = make_series(np.full(40, 77.0))
        m = build_matrix(s, flat_covariates(s), 1)
        for col in ("lag_origin", "lag_same_weekday", "rollmean_prev_week"):
            np.testing.assert_allclose(m.frame[col], 77.0)

    @pytest.mark.parametrize("h", [1, 3, 7])
    def test_lags_match_brute_force_reindexing(self, h):
        rng = np.random.default_rng(h)
        vals = rng.uniform(100, 300, size=60)
        s = make_series(vals)
        m = build_matrix(s, flat_covariates(s), h)
        week_lag = 7 if 7 >= h else 14
        for d, row in m.frame.iterrows():
            t = (d - s.start).days
            assert row["target"] == vals[t]
            assert row["lag_origin"] == vals[t - h]
            assert row["lag_same_weekday"] == vals[t - week_lag]
            assert row["rollmean_prev_week"] == pytest.approx(
                vals[t - h - 6:t - h + 1].mean())

    @pytest.mark.parametrize("h", [1, 3, 7])
    def test_no_feature_can_see_past_the_origin(self, h):
        """Changing values at or after the forecast origin's next day must
        not change any feature row whose origin is earlier."""
        rng = np.random.default_rng(1)
        vals = rng.uniform(100, 300, size=60)
        s = make_series(vals)
        m1 = build_matrix(s, flat_covariates(s), h)
        cut = 45
        mutated = vals.copy()
        mutated[cut:] += 1000.0
        s2 = make_series(mutated)
        m2 = build_matrix(s2, flat_covariates(s2), h)
        feats1 = m1.features()
        feats2 = m2.features()
        for d in feats1.index:
            t = (d - s.start).days
            if t - h < cut:  # origin strictly before the mutation
                assert feats1.loc[d].equals(feats2.loc[d])

    def test_weekday_and_month_come_from_the_target_date(self):
        s = make_series(np.arange(100.0, 140.0))  # starts on a Monday
        m = build_matrix(s, flat_covariates(s), 1)
        d = m.frame.index[0]
        assert m.frame.loc[d, "day_of_week"] == d.isoweekday()
        assert m.frame.loc[d, "month"] == d.month

    def test_weather_and_flu_are_lagged_to_the_origin(self):
        s = make_series(np.arange(100.0, 140.0))
        cov = flat_covariates(s)
        flu = np.arange(float(len(s)))
        object.__setattr__(cov, "flu", flu)
        h = 3
        m = build_matrix(s, cov, h)
        for d, row in m.frame.iterrows():
            t = (d - s.start).days
            assert row["flu_prev"] == flu[t - h]

    def test_too_short_series_rejected(self):
        s = make_series(np.full(10, 5.0))
        with pytest.raises(ContractError):
            build_matrix(s, flat_covariates(s), 1)

    def test_misaligned_covariates_rejected(self):
        s = make_series(np.full(40, 5.0))
        short = make_series(np.full(30, 5.0))
        with pytest.raises(ContractError):
            build_matrix(s, flat_covariates(short), 1)

    def test_event_columns_present_and_binary(self):
        s = make_series(np.full(40, 5.0))
        cov = flat_covariates(s, events=("fair",))
        m = build_matrix(s, cov, 1)
        assert "event_fair" in m.frame.columns
        assert set(np.unique(m.frame["event_fair"])) <= {0, 1}


class TestTsFeatureView:
    def test_identity_for_any_series(self):
        s = make_series([1, 2, 3])
        assert ts_feature_view(s) is s

    def test_identity_for_length_one(self):
        s = make_series([42.0])
        assert ts_feature_view(s) is s

    def test_identity_preserves_kind(self):
        s = make_series([-1.0, 1.0], kind="transformed")
        assert ts_feature_view(s).kind == "transformed"
