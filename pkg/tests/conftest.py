"""Shared fixtures and helpers for the test suite."""
from datetime import date, timedelta

import numpy as np
import pandas as pd
import pytest

from edforecast.features import ModelMatrix
from edforecast.ingest import CovariateTable
from edforecast.series import DailySeries
from edforecast.synth import generate, load_bundled_spec

START = date(2015, 1, 5)  # a Monday

# Populated by test_acceptance.py; replayed after the run so every
# acceptance criterion gets an explicit PASS/FAIL line in the output.
ACCEPTANCE_RESULTS = []


def record_criterion(name, ok, detail=""):
    ACCEPTANCE_RESULTS.append((name, bool(ok), detail))
    suffix = f" [{detail}]" if detail else ""
    print(f"{'PASS' if ok else 'FAIL'}: {name}{suffix}")
    assert ok, f"{name}{suffix}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for name, ok, detail in ACCEPTANCE_RESULTS:
        suffix = f" [{detail}]" if detail else ""
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}: {name}{suffix}")


def make_series(values, start=START, kind="raw"):
    return DailySeries(start, np.asarray(values, dtype=float), kind)


def numeric_matrix(X, y, horizon=1, start=START):
    """A ModelMatrix whose features are plain numeric columns f0, f1, ...

    No column is named like a categorical, so encoders pass values through
    unchanged; this makes closed-form oracles easy to state.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    dates = [start + timedelta(days=i) for i in range(len(y))]
    frame = pd.DataFrame(index=pd.Index(dates, name="date"))
    frame["target"] = y
    for j in range(X.shape[1]):
        frame[f"f{j}"] = X[:, j]
    return ModelMatrix(horizon, frame)


def flat_covariates(series, events=()):
    """An all-zeros covariate table aligned to `series`."""
    n = len(series)
    z = np.zeros(n)
    return CovariateTable(
        start=series.start, bank_holiday=z.astype(bool),
        school_holiday=z.astype(bool), precipitation=z.copy(),
        temp_max=np.full(n, 15.0), temp_min=np.full(n, 5.0), flu=z.copy(),
        events={name: z.astype(bool) for name in events})


@pytest.fixture(scope="session")
def synth_560():
    spec = load_bundled_spec("stmarys_like")
    series, cov, truth = generate(spec, 560)
    return series, cov


@pytest.fixture(scope="session")
def matrix_560(synth_560):
    from edforecast.features import build_matrix
    series, cov = synth_560
    return build_matrix(series, cov, 1)
